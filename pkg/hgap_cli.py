# hgap_cli.py - Command-line front end for the H-type spectral gap toolkit
"""
python hgap_cli.py [--config FILE] [--verbose] <command> [options]

Commands: radon, build, verify, eigen, bounds, simulate, estimate-gap, check-lemma, report.
Exit code 0 on success, 1 on a validation error, 2 on a computation error; errors are
written to stderr as one JSON object. Every invocation is appended to the run registry.
"""

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from clifford_structures import (HTypeStructure, build_generators, hurwitz_radon, load_structure, save_structure,
                                 structure_to_json, verify_structure)
from dirichlet_eigen import eigen_table
from gap_bounds import GapBoundResult, euclidean_reference, gap_bounds, ratio_asymptotics
from hgap_config import (COMMAND_OPTIONS, COMMON_OPTIONS, TOOL_VERSION, RunConfig, load_config_file,
                         resolve_config)
from hgap_errors import ComputationError, ConfigError, HGapError
from hypo_sde import run_ensemble, simulate_path, time_change_samples, lemma_diagnostics, write_full_paths, \
    write_terminal_csv
from run_registry import RunRecord, RunRegistry, hash_text, new_run_id, output_manifest
from small_dev_mc import (ExtrapolationPolicy, GapEstimate, dt_ladder, estimate_gap_exit, estimate_gap_smalldev,
                          euclidean_mean_exit_time, sandwich_check, scaling_identity_check, small_dev_prob,
                          survival_curve)
from word_report_generator import write_report_docx

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1
FLOAT_FORMAT = '%.17g'


@dataclass
class CommandResult:
    stdout: str = ''
    outputs: List[Path] = field(default_factory=list)
    summary: Dict = field(default_factory=dict)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they exit with the validation code"""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='hgap', description='H-type group spectral gap toolkit')
    parser.add_argument('--config', help='INI file with [common] and per-command sections')
    parser.add_argument('--verbose', action='store_true', help='debug logging on stderr')
    sub = parser.add_subparsers(dest='command', required=True)
    for command, options in COMMAND_OPTIONS.items():
        p = sub.add_parser(command, allow_abbrev=False)
        for option in COMMON_OPTIONS + options:
            if option.flag:
                p.add_argument(option.cli_flag, dest=option.name, action='store_true', help=option.help)
            else:
                p.add_argument(option.cli_flag, dest=option.name, default=None, help=option.help)
    return parser


def _configure_logging(verbose: bool):
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        force=True,
    )


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default)


def _write_text(path: str, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _emit(text: str, out: Optional[str]) -> CommandResult:
    """Write text to `out` when given, else hand it back for stdout"""
    if out:
        return CommandResult(stdout=str(out), outputs=[_write_text(out, text)])
    return CommandResult(stdout=text)


def _frame_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT)


# ---- command handlers ----

def cmd_radon(config: RunConfig) -> CommandResult:
    rho = hurwitz_radon(config.parameters['m'])
    return CommandResult(stdout=str(rho), summary={'m': config.parameters['m'], 'rho': rho})


def cmd_build(config: RunConfig) -> CommandResult:
    p = config.parameters
    S = build_generators(p['m'], p['n'])
    summary = {'m': S.m, 'n': S.n}
    if p['out']:
        path = save_structure(S, p['out'])
        return CommandResult(stdout=str(path), outputs=[path], summary=summary)
    return CommandResult(stdout=json.dumps(structure_to_json(S)), summary=summary)


def cmd_verify(config: RunConfig) -> CommandResult:
    p = config.parameters
    S = load_structure(p['structure'], verify=False)
    report = verify_structure(S, samples=p['samples'], seed=config.seed)
    return CommandResult(stdout=to_json(report.to_dict()), summary={'m': S.m, 'n': S.n, 'passed': report.passed})


def cmd_eigen(config: RunConfig) -> CommandResult:
    p = config.parameters
    table = eigen_table(p['d_max'])
    if p['format'] == 'csv':
        text = _frame_csv(table)
    else:
        text = to_json({'format_version': REPORT_FORMAT_VERSION, 'rows': table.to_dict(orient='records')})
    result = _emit(text, p['out'])
    result.summary = {'d_max': p['d_max']}
    return result


def cmd_bounds(config: RunConfig) -> CommandResult:
    p = config.parameters
    if p['sweep']:
        frame = ratio_asymptotics(p['m_list'], p['n'])
        result = _emit(_frame_csv(frame), p['out'])
        result.summary = {'sweep': frame.to_dict(orient='records')}
        return result

    if p['m'] is None:
        raise ConfigError("'bounds' needs --m unless --sweep is given")
    bounds = gap_bounds(p['m'], p['n'])
    if p['format'] == 'json':
        text = to_json({'format_version': REPORT_FORMAT_VERSION, **bounds.to_dict()})
    else:
        text = _frame_csv(pd.DataFrame([bounds.to_dict()]))
    result = _emit(text, p['out'])
    result.summary = {'bounds': bounds.to_dict()}
    return result


def cmd_simulate(config: RunConfig) -> CommandResult:
    p = config.parameters
    S = load_structure(p['structure'])
    batch = run_ensemble(S, p['T'], p['dt'], config.seed, p['paths'], workers=config.threads, scheme=p['scheme'])
    outputs = [write_terminal_csv(batch, p['out'])]
    if p['full_paths']:
        samples = [simulate_path(S, p['T'], p['dt'], config.seed, path_index=i, scheme=p['scheme'])
                   for i in range(p['paths'])]
        outputs.append(write_full_paths(samples, p['full_paths']))
    summary = {'m': S.m, 'n': S.n, 'paths': batch.count, 'mean_tau_T': float(np.mean(batch.tau))}
    return CommandResult(stdout='\n'.join(str(o) for o in outputs), outputs=outputs, summary=summary)


def _structure_for_estimate(p: Dict):
    if (p['structure'] is None) == (p['euclidean'] is None):
        raise ConfigError("'estimate-gap' needs exactly one of --structure or --euclidean")
    if p['euclidean'] is not None:
        S = HTypeStructure.euclidean(p['euclidean'])
        return S, euclidean_reference(S.m)
    S = load_structure(p['structure'])
    return S, gap_bounds(S.m, S.n)


def cmd_estimate_gap(config: RunConfig) -> CommandResult:
    p = config.parameters
    S, bounds = _structure_for_estimate(p)
    methods = ['exit', 'smalldev'] if p['method'] == 'both' else [p['method']]

    estimates: Dict[str, GapEstimate] = {}
    curves = {}
    frames = []
    survival = small_dev = None
    if 'exit' in methods:
        survival = survival_curve(S, p['dt'], p['paths'], p['t_max'], config.seed, workers=config.threads)
        estimates['exit'] = estimate_gap_exit(survival)
        frames.append(survival.to_frame())
        curves['survival'] = survival.to_frame().drop(columns='kind').to_dict(orient='list')
        curves['mean_exit_time'] = {'value': survival.mean_exit_time, 'std_error': survival.mean_exit_se,
                                    'censored': survival.censored}
        if S.is_euclidean:
            curves['mean_exit_time']['expected'] = 1.0 / S.m
            curves['mean_exit_time']['expected_discrete'] = euclidean_mean_exit_time(S.m, p['dt'])
    if 'smalldev' in methods:
        small_dev = small_dev_prob(S, p['eps_grid'], p['dt'], p['paths'], config.seed, workers=config.threads)
        estimates['smalldev'] = estimate_gap_smalldev(small_dev, ExtrapolationPolicy(model=p['model']))
        frames.append(small_dev.to_frame())
        curves['small_deviation'] = small_dev.to_frame().drop(columns='kind').to_dict(orient='list')

    verdicts = {name: sandwich_check(est, bounds, p['k_sigma']).to_dict() for name, est in estimates.items()}
    report = {
        'format_version': REPORT_FORMAT_VERSION,
        'structure': {'m': S.m, 'n': S.n, 'euclidean': S.is_euclidean},
        'parameters': config.snapshot(),
        'bounds': bounds.to_dict(),
        'estimates': {name: est.to_dict() for name, est in estimates.items()},
        'verdicts': verdicts,
        'curves': curves,
    }
    if len(estimates) == 2:
        a, b = estimates['exit'], estimates['smalldev']
        combined = math.hypot(a.std_error, b.std_error)
        report['agreement'] = {
            'difference': a.lambda_hat - b.lambda_hat,
            'combined_std_error': combined,
            'agree': abs(a.lambda_hat - b.lambda_hat) <= 3.0 * combined,
        }
        scaling_eps = [e for e in small_dev.eps_grid if e ** -2 <= survival.t_max]
        if scaling_eps:
            report['scaling_identity'] = scaling_identity_check(small_dev, survival, scaling_eps).to_dict(
                orient='records')
    if p['dt_ladder']:
        ladder = dt_ladder(S, p['dt_ladder'], p['paths'], p['t_max'], config.seed, workers=config.threads)
        report['dt_ladder'] = ladder.to_dict()

    outputs = [_write_text(p['out'], to_json(report))]
    if p['csv']:
        curve_frame = pd.concat(frames, ignore_index=True)
        outputs.append(_write_text(p['csv'], _frame_csv(curve_frame)))

    summary = {key: report[key] for key in ('structure', 'bounds', 'estimates', 'verdicts')}
    summary['k_sigma'] = p['k_sigma']
    return CommandResult(stdout='\n'.join(str(o) for o in outputs), outputs=outputs, summary=summary)


def cmd_check_lemma(config: RunConfig) -> CommandResult:
    p = config.parameters
    S = load_structure(p['structure'])
    samples = time_change_samples(S, p['T'], p['dt'], config.seed, p['paths'], workers=config.threads)
    diagnostics = lemma_diagnostics(samples, alpha=p['alpha'])
    doc = {'format_version': REPORT_FORMAT_VERSION, 'structure': {'m': S.m, 'n': S.n}, **diagnostics.to_dict()}
    result = _emit(to_json(doc), p['out'])
    result.summary = {'m': S.m, 'n': S.n, 'passed': diagnostics.passed, 'verdicts': diagnostics.verdicts}
    return result


def _bounds_from_dict(doc: Dict) -> GapBoundResult:
    return GapBoundResult(**{k: doc[k] for k in GapBoundResult.__dataclass_fields__})


def _estimate_from_dict(doc: Dict) -> GapEstimate:
    return GapEstimate(lambda_hat=doc['lambda_hat'], std_error=doc['std_error'], method=doc['method'],
                       window=tuple(doc['window']), diagnostics=doc.get('diagnostics', {}))


def _curve_rows(record: RunRecord, m: int, n: int) -> List[Dict]:
    """Plot-ready curve points from the report JSON an estimate run wrote"""
    rows = []
    for path in record.outputs:
        if not path.endswith('.json') or not Path(path).exists():
            continue
        doc = json.loads(Path(path).read_text())
        for kind, curve in doc.get('curves', {}).items():
            if 'abscissa' not in curve:
                continue
            for i in range(len(curve['abscissa'])):
                rows.append({'run_id': record.run_id, 'm': m, 'n': n, 'kind': kind,
                             'abscissa': curve['abscissa'][i], 'estimate': curve['estimate'][i],
                             'ci_low': curve['ci_low'][i], 'ci_high': curve['ci_high'][i]})
    return rows


def build_report(records: List[RunRecord]) -> Dict:
    """Join bounds and estimates per (m, n); estimates are judged against the pair's bounds"""
    pairs: Dict = {}
    curve_rows = []
    for record in records:
        if record.exit_code != 0:
            logger.warning(f"⚠️ Skipping failed run {record.run_id} (exit {record.exit_code})")
            continue
        summary = record.summary
        if record.command == 'bounds' and 'bounds' in summary:
            b = summary['bounds']
            pairs.setdefault((b['m'], b['n']), {'bounds': None, 'estimates': []})['bounds'] = b
        elif record.command == 'estimate-gap':
            b = summary['bounds']
            entry = pairs.setdefault((b['m'], b['n']), {'bounds': None, 'estimates': []})
            if entry['bounds'] is None:
                entry['bounds'] = b
            for method, est in summary.get('estimates', {}).items():
                entry['estimates'].append((record.run_id, est, summary.get('k_sigma', 3.0)))
            curve_rows.extend(_curve_rows(record, b['m'], b['n']))
        else:
            logger.info(f"Run {record.run_id} ({record.command}) carries no bounds or estimates")

    rows = []
    for (m, n), entry in sorted(pairs.items()):
        b = entry['bounds']
        base = {'m': m, 'n': n, 'lower': b['lower'], 'upper': b['upper']}
        if not entry['estimates']:
            rows.append({**base, 'run_id': None, 'method': None, 'lambda_hat': None, 'std_error': None,
                         'verdict': None, 'direction': None})
            continue
        for run_id, est, k_sigma in entry['estimates']:
            verdict = sandwich_check(_estimate_from_dict(est), _bounds_from_dict(b), k_sigma)
            rows.append({**base, 'run_id': run_id, 'method': est['method'], 'lambda_hat': est['lambda_hat'],
                         'std_error': est['std_error'], 'verdict': verdict.verdict, 'direction': verdict.direction})
    return {
        'format_version': REPORT_FORMAT_VERSION,
        'tool_version': TOOL_VERSION,
        'runs': [r.run_id for r in records],
        'rows': rows,
        'curves': curve_rows,
    }


def cmd_report(config: RunConfig) -> CommandResult:
    p = config.parameters
    registry = RunRegistry(config.registry)
    if p['runs'] and p['glob']:
        raise ConfigError("give --runs or --glob, not both")
    if p['runs']:
        records = registry.resolve(p['runs'])
    elif p['glob']:
        records = registry.glob(p['glob'])
    else:
        raise ConfigError("empty run selection: give --runs or --glob")

    report = build_report(records)
    out_dir = Path(p['out'])
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [
        _write_text(out_dir / 'report.json', to_json({k: v for k, v in report.items() if k != 'curves'})),
        _write_text(out_dir / 'report.csv', _frame_csv(pd.DataFrame(
            report['rows'], columns=['m', 'n', 'lower', 'upper', 'run_id', 'method', 'lambda_hat', 'std_error',
                                     'verdict', 'direction']))),
        _write_text(out_dir / 'curves.csv', _frame_csv(pd.DataFrame(
            report['curves'], columns=['run_id', 'm', 'n', 'kind', 'abscissa', 'estimate', 'ci_low', 'ci_high']))),
    ]
    if p['docx']:
        outputs.append(write_report_docx(report, out_dir))
    summary = {'runs': report['runs'], 'rows': len(report['rows'])}
    return CommandResult(stdout='\n'.join(str(o) for o in outputs), outputs=outputs, summary=summary)


HANDLERS: Dict[str, Callable[[RunConfig], CommandResult]] = {
    'radon': cmd_radon,
    'build': cmd_build,
    'verify': cmd_verify,
    'eigen': cmd_eigen,
    'bounds': cmd_bounds,
    'simulate': cmd_simulate,
    'estimate-gap': cmd_estimate_gap,
    'check-lemma': cmd_check_lemma,
    'report': cmd_report,
}


def _register(config: RunConfig, result: CommandResult, exit_code: int, started_at: str, wall_time: float):
    outputs = output_manifest(p for p in result.outputs if Path(p).exists())
    if result.stdout:
        outputs['<stdout>'] = hash_text(result.stdout)
    record = RunRecord(
        run_id=new_run_id(config.command),
        command=config.command,
        config=config.snapshot(),
        tool_version=TOOL_VERSION,
        started_at=started_at,
        wall_time=wall_time,
        exit_code=exit_code,
        outputs=outputs,
        summary=json.loads(to_json(result.summary)),
    )
    try:
        RunRegistry(config.registry).log_run(record)
    except OSError as e:
        logger.warning(f"⚠️ Could not write run registry {config.registry}: {e}")
    return record


def run(argv: Optional[List[str]] = None) -> int:
    started = time.perf_counter()
    started_at = datetime.now().isoformat(timespec='seconds')
    config = None
    result = CommandResult()
    exit_code = 0
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.verbose)
        sections = load_config_file(args.config) if args.config else None
        flags = {k: v for k, v in vars(args).items() if k not in ('command', 'config', 'verbose')}
        config = resolve_config(args.command, flags, sections)
        result = HANDLERS[config.command](config)
        if result.stdout:
            sys.stdout.write(result.stdout.rstrip('\n') + '\n')
    except HGapError as e:
        exit_code = e.exit_code
        sys.stderr.write(json.dumps(e.to_dict()) + '\n')
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        error = ComputationError(f"{type(e).__name__}: {e}")
        logger.error(f"❌ {config.command if config else 'hgap'} failed: {error}")
        exit_code = error.exit_code
        sys.stderr.write(json.dumps(error.to_dict()) + '\n')

    if config is not None:
        _register(config, result, exit_code, started_at, time.perf_counter() - started)
    return exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
