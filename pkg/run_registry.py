# run_registry.py - Append-only run registry with de-duplication
"""
Every CLI invocation leaves one RunRecord in a JSON-lines file: the config snapshot that
produced it, the tool version, wall time, exit code and a SHA-256 manifest of its outputs.
Replaying a record's config with its seed must reproduce the same hashes.
"""

import fnmatch
import hashlib
import json
import logging
import threading
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from hgap_config import DEFAULT_REGISTRY, get_setting
from hgap_errors import ConfigError, UnknownRunId

logger = logging.getLogger(__name__)

REGISTRY_FORMAT_VERSION = 1


def hash_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def hash_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def new_run_id(command: str) -> str:
    return f"{datetime.now().strftime('%Y%m%dT%H%M%S')}-{command}-{uuid.uuid4().hex[:8]}"


@dataclass
class RunRecord:
    run_id: str
    command: str
    config: Dict
    tool_version: str
    started_at: str
    wall_time: float
    exit_code: int
    outputs: Dict[str, str] = field(default_factory=dict)
    summary: Dict = field(default_factory=dict)
    format_version: int = REGISTRY_FORMAT_VERSION

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Dict) -> 'RunRecord':
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        return cls(**known)


class RunRegistry:
    def __init__(self, path: Optional[Union[str, Path]] = None):
        # Explicit path first, then HGAP_REGISTRY or Streamlit secrets, then the default
        self.path = Path(path or get_setting('HGAP_REGISTRY', 'hgap_registry', DEFAULT_REGISTRY))

        # Cache of known runs so lookups don't re-read the file
        self._records_cache: Dict[str, RunRecord] = {}
        self._cache_refreshed = False
        self._write_lock = threading.Lock()

    def _refresh_cache(self):
        """Load every record in the registry file into the cache"""
        self._records_cache = {}
        if self.path.exists():
            with open(self.path) as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        record = RunRecord.from_dict(json.loads(line))
                    except (json.JSONDecodeError, TypeError) as e:
                        logger.warning(f"⚠️ Skipping unreadable registry line {lineno}: {e}")
                        continue
                    self._records_cache[record.run_id] = record
        self._cache_refreshed = True
        logger.debug(f"📊 Cached {len(self._records_cache)} runs from {self.path}")

    def log_run(self, record: RunRecord) -> RunRecord:
        """Append a record; a run id that is already present is not written twice"""
        with self._write_lock:
            if not self._cache_refreshed:
                self._refresh_cache()
            if record.run_id in self._records_cache:
                logger.warning(f"⚠️ Run {record.run_id} already registered, not appending again")
                return self._records_cache[record.run_id]

            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, 'a') as fh:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + '\n')
            self._records_cache[record.run_id] = record
        logger.info(f"📊 Registered run {record.run_id} ({record.command}, exit {record.exit_code})")
        return record

    def records(self) -> List[RunRecord]:
        if not self._cache_refreshed:
            self._refresh_cache()
        return list(self._records_cache.values())

    def find(self, run_id: str) -> Optional[RunRecord]:
        if not self._cache_refreshed:
            self._refresh_cache()
        return self._records_cache.get(run_id)

    def resolve(self, run_ids: Iterable[str]) -> List[RunRecord]:
        """Records for the given ids in first-seen order; duplicates are dropped with a warning"""
        seen, selected = set(), []
        for run_id in run_ids:
            if run_id in seen:
                logger.warning(f"⚠️ Duplicate run id {run_id} ignored")
                continue
            seen.add(run_id)
            record = self.find(run_id)
            if record is None:
                raise UnknownRunId(f"run id '{run_id}' is not in {self.path}")
            selected.append(record)
        if not selected:
            raise ConfigError("empty run selection")
        return selected

    def glob(self, pattern: str) -> List[RunRecord]:
        selected = [r for r in self.records() if fnmatch.fnmatch(r.run_id, pattern)]
        if not selected:
            raise ConfigError(f"no registered run matches '{pattern}'")
        return selected

    def stats(self) -> Dict:
        """Run counts per command and per exit code"""
        stats = {'total_runs': 0, 'by_command': {}, 'by_exit_code': {}}
        for record in self.records():
            stats['total_runs'] += 1
            stats['by_command'][record.command] = stats['by_command'].get(record.command, 0) + 1
            code = str(record.exit_code)
            stats['by_exit_code'][code] = stats['by_exit_code'].get(code, 0) + 1
        if stats['total_runs']:
            stats['success_rate'] = round(stats['by_exit_code'].get('0', 0) / stats['total_runs'] * 100, 1)
        return stats


def output_manifest(paths: Iterable[Union[str, Path]]) -> Dict[str, str]:
    return {str(p): hash_file(p) for p in paths}
