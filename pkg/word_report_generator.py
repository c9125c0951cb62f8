# word_report_generator.py - Word summary of a consolidated gap report
"""
Writes report.docx next to report.json: a header with the run selection, one table row
per (m, n, method) with bounds, estimate and sandwich verdict, and a footer.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from docx import Document
from docx.enum.text import WD_ALIGN_PARAGRAPH
from docx.shared import Pt

logger = logging.getLogger(__name__)

TABLE_COLUMNS = [
    ('m', 'm'),
    ('n', 'n'),
    ('lower', 'lower'),
    ('upper', 'upper'),
    ('method', 'method'),
    ('lambda_hat', 'estimate'),
    ('std_error', 'std. error'),
    ('verdict', 'verdict'),
]


def _fmt(value) -> str:
    if value is None:
        return '-'
    if isinstance(value, float):
        return '-' if value != value else f'{value:.6g}'
    return str(value)


class ReportDocumentGenerator:
    def __init__(self, output_folder: Union[str, Path]):
        self.output_folder = Path(output_folder)
        self.output_folder.mkdir(parents=True, exist_ok=True)

    def create_report_document(self, report: Dict, filename: str = 'report.docx') -> Path:
        doc = Document()
        self._setup_document_style(doc)
        self._add_header(doc, report)
        self._add_results_table(doc, report.get('rows', []))
        self._add_footer(doc, report)

        path = self.output_folder / filename
        doc.save(path)
        logger.info(f"📄 Word report created: {path}")
        return path

    def _setup_document_style(self, doc):
        style = doc.styles['Normal']
        style.font.name = 'Calibri'
        style.font.size = Pt(10)

    def _add_header(self, doc, report: Dict):
        title_para = doc.add_paragraph()
        title_run = title_para.add_run('H-type spectral gap report')
        title_run.bold = True
        title_run.font.size = Pt(16)
        title_para.alignment = WD_ALIGN_PARAGRAPH.CENTER

        details_para = doc.add_paragraph()
        details_para.add_run('Runs: ').bold = True
        details_para.add_run(f"{', '.join(report.get('runs', []))}\n")
        details_para.add_run('Rows: ').bold = True
        details_para.add_run(f"{len(report.get('rows', []))}")

    def _add_results_table(self, doc, rows: List[Dict]):
        header_para = doc.add_paragraph()
        header_para.add_run('Bounds, estimates and verdicts').bold = True

        table = doc.add_table(rows=1, cols=len(TABLE_COLUMNS))
        table.style = 'Table Grid'
        for cell, (_, label) in zip(table.rows[0].cells, TABLE_COLUMNS):
            cell.text = label
            cell.paragraphs[0].runs[0].bold = True

        for row in rows:
            cells = table.add_row().cells
            for cell, (key, _) in zip(cells, TABLE_COLUMNS):
                cell.text = _fmt(row.get(key))

    def _add_footer(self, doc, report: Dict):
        failures = [r for r in report.get('rows', []) if r.get('verdict') == 'FAIL']
        footer_para = doc.add_paragraph()
        if failures:
            footer_para.add_run(f"{len(failures)} estimate(s) outside the sandwich: ")
            footer_para.add_run('; '.join(f"H({r['m']},{r['n']}) {r['method']} {r.get('direction')}"
                                          for r in failures))
        else:
            footer_para.add_run('Every estimate is consistent with the closed-form sandwich.')
        footer_para.add_run(f"\nTool version: {report.get('tool_version', 'unknown')}")


def write_report_docx(report: Dict, output_folder: Union[str, Path],
                      filename: Optional[str] = None) -> Path:
    generator = ReportDocumentGenerator(output_folder)
    return generator.create_report_document(report, filename or 'report.docx')
