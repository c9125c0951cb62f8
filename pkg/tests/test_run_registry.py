import hashlib
import json
import logging

import pytest

from hgap_errors import ConfigError, UnknownRunId
from run_registry import RunRecord, RunRegistry, hash_file, hash_text, new_run_id, output_manifest


def _record(run_id, command='bounds', exit_code=0, **extra):
    return RunRecord(run_id=run_id, command=command, config={'command': command, 'parameters': {}, 'seed': 1},
                     tool_version='0.1.0', started_at='2026-01-01T00:00:00', wall_time=0.1,
                     exit_code=exit_code, **extra)


@pytest.fixture
def registry(tmp_path):
    return RunRegistry(tmp_path / 'runs' / 'registry.jsonl')


class TestLogging:
    def test_appends_one_line_per_run(self, registry):
        registry.log_run(_record('a'))
        registry.log_run(_record('b', command='eigen'))
        lines = registry.path.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])['run_id'] == 'a'

    def test_duplicate_run_id_is_not_written_twice(self, registry, caplog):
        registry.log_run(_record('a'))
        with caplog.at_level(logging.WARNING, logger='run_registry'):
            kept = registry.log_run(_record('a', exit_code=2))
        assert kept.exit_code == 0
        assert len(registry.path.read_text().splitlines()) == 1
        assert 'already registered' in caplog.text

    def test_records_survive_a_new_instance(self, registry):
        registry.log_run(_record('a', summary={'bounds': {'m': 2}}))
        reopened = RunRegistry(registry.path)
        record = reopened.find('a')
        assert record.summary == {'bounds': {'m': 2}}
        assert record.format_version == 1

    def test_unreadable_lines_are_skipped(self, registry, caplog):
        registry.log_run(_record('a'))
        with open(registry.path, 'a') as fh:
            fh.write('{truncated\n\n')
        with caplog.at_level(logging.WARNING, logger='run_registry'):
            records = RunRegistry(registry.path).records()
        assert [r.run_id for r in records] == ['a']
        assert 'line 2' in caplog.text

    def test_missing_file_is_empty(self, registry):
        assert registry.records() == []
        assert registry.stats()['total_runs'] == 0


class TestSelection:
    def test_resolve_keeps_order_and_drops_duplicates(self, registry, caplog):
        for run_id in ('a', 'b', 'c'):
            registry.log_run(_record(run_id))
        with caplog.at_level(logging.WARNING, logger='run_registry'):
            selected = registry.resolve(['c', 'a', 'c'])
        assert [r.run_id for r in selected] == ['c', 'a']
        assert 'Duplicate run id c' in caplog.text

    def test_resolve_unknown(self, registry):
        registry.log_run(_record('a'))
        with pytest.raises(UnknownRunId):
            registry.resolve(['a', 'zzz'])

    def test_resolve_empty(self, registry):
        with pytest.raises(ConfigError):
            registry.resolve([])

    def test_glob(self, registry):
        registry.log_run(_record('20260101T000000-bounds-1'))
        registry.log_run(_record('20260101T000001-eigen-2', command='eigen'))
        assert [r.run_id for r in registry.glob('*-bounds-*')] == ['20260101T000000-bounds-1']
        with pytest.raises(ConfigError):
            registry.glob('*-simulate-*')

    def test_stats(self, registry):
        registry.log_run(_record('a'))
        registry.log_run(_record('b', exit_code=1))
        registry.log_run(_record('c', command='eigen'))
        stats = registry.stats()
        assert stats['total_runs'] == 3
        assert stats['by_command'] == {'bounds': 2, 'eigen': 1}
        assert stats['by_exit_code'] == {'0': 2, '1': 1}
        assert stats['success_rate'] == pytest.approx(66.7)


class TestHashing:
    def test_hash_text(self):
        assert hash_text('9\n') == hashlib.sha256(b'9\n').hexdigest()

    def test_hash_file_matches_contents(self, tmp_path):
        path = tmp_path / 'out.csv'
        path.write_bytes(b'a,b\n1,2\n')
        assert hash_file(path) == hashlib.sha256(b'a,b\n1,2\n').hexdigest()
        assert output_manifest([path]) == {str(path): hash_file(path)}

    def test_run_ids_are_unique(self):
        ids = {new_run_id('bounds') for _ in range(50)}
        assert len(ids) == 50
        assert all('-bounds-' in run_id for run_id in ids)


def test_registry_path_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('HGAP_REGISTRY', str(tmp_path / 'env.jsonl'))
    assert RunRegistry().path == tmp_path / 'env.jsonl'
