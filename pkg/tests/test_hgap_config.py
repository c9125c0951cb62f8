import pytest

from hgap_config import (COMMAND_OPTIONS, DEFAULT_REGISTRY, DEFAULT_SEED, float_list, get_setting, int_list,
                         load_config_file, parse_bool, resolve_config, str_list)
from hgap_errors import ConfigError


class TestConverters:
    @pytest.mark.parametrize("text,expected", [('true', True), ('Yes', True), ('1', True), (' off ', False),
                                               ('0', False), (False, False)])
    def test_parse_bool(self, text, expected):
        assert parse_bool(text) is expected

    def test_parse_bool_rejects_other_text(self):
        with pytest.raises(ValueError):
            parse_bool('maybe')

    def test_lists(self):
        assert int_list('2, 4,8') == [2, 4, 8]
        assert int_list([2, '16']) == [2, 16]
        assert float_list('0.5,1,2.0') == [0.5, 1.0, 2.0]
        assert str_list(' a, b ,,c') == ['a', 'b', 'c']


class TestConfigFile:
    def test_reads_sections_and_keeps_key_case(self, tmp_path):
        path = tmp_path / 'run.ini'
        path.write_text('[common]\nseed = 7\n\n[simulate]\nT = 2.0\ndt = 0.01\n')
        sections = load_config_file(path)
        assert sections['common'] == {'seed': '7'}
        assert sections['simulate'] == {'T': '2.0', 'dt': '0.01'}

    def test_unknown_section(self, tmp_path):
        path = tmp_path / 'run.ini'
        path.write_text('[plot]\nm = 2\n')
        with pytest.raises(ConfigError, match='unknown config section'):
            load_config_file(path)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / 'run.ini'
        path.write_text('[bounds]\nm = 2\ncolour = red\n')
        with pytest.raises(ConfigError, match='colour'):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / 'absent.ini')


class TestResolveConfig:
    def test_defaults(self):
        config = resolve_config('eigen', {})
        assert config.parameters == {'d_max': 20, 'format': 'csv', 'out': None}
        assert config.seed == DEFAULT_SEED
        assert config.threads == 1
        assert config.registry == DEFAULT_REGISTRY

    def test_flags_beat_file_and_file_beats_defaults(self):
        config = resolve_config('bounds', {'m': '8', 'n': None}, {'bounds': {'m': '4', 'n': '3'}})
        assert config.parameters['m'] == 8
        assert config.parameters['n'] == 3
        assert config.parameters['format'] == 'json'

    def test_common_section_applies_to_every_command(self):
        config = resolve_config('radon', {'m': '4'}, {'common': {'seed': '11'}})
        assert config.seed == 11

    def test_command_section_beats_common(self):
        sections = {'common': {'seed': '11'}, 'radon': {'seed': '12'}}
        assert resolve_config('radon', {'m': '4'}, sections).seed == 12

    def test_unset_flag_does_not_override_file(self):
        config = resolve_config('bounds', {'n': '1', 'sweep': False}, {'bounds': {'sweep': 'yes'}})
        assert config.parameters['sweep'] is True

    def test_required_option(self):
        with pytest.raises(ConfigError, match='--m'):
            resolve_config('radon', {})

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="'m'"):
            resolve_config('radon', {'m': 'four'})

    def test_choices(self):
        with pytest.raises(ConfigError, match='format'):
            resolve_config('eigen', {'format': 'xml'})

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            resolve_config('plot', {})

    @pytest.mark.parametrize("seed", ['-1', str(2 ** 64)])
    def test_seed_range(self, seed):
        with pytest.raises(ConfigError, match='seed'):
            resolve_config('radon', {'m': '4', 'seed': seed})

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv('HGAP_THREADS', '3')
        assert resolve_config('radon', {'m': '4'}).threads == 3
        assert resolve_config('radon', {'m': '4', 'threads': '2'}).threads == 2

    def test_bad_threads_environment(self, monkeypatch):
        monkeypatch.setenv('HGAP_THREADS', 'many')
        with pytest.raises(ConfigError, match='HGAP_THREADS'):
            resolve_config('radon', {'m': '4'})

    def test_zero_threads(self):
        with pytest.raises(ConfigError, match='threads'):
            resolve_config('radon', {'m': '4', 'threads': '0'})

    def test_registry_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv('HGAP_REGISTRY', str(tmp_path / 'reg.jsonl'))
        assert resolve_config('radon', {'m': '4'}).registry == str(tmp_path / 'reg.jsonl')

    def test_snapshot_leaves_out_execution_settings(self):
        config = resolve_config('eigen', {'d_max': '5', 'threads': '4'})
        snapshot = config.snapshot()
        assert snapshot == {'command': 'eigen', 'parameters': {'d_max': 5, 'format': 'csv', 'out': None},
                            'seed': DEFAULT_SEED}

    def test_output_paths_are_plain_parameters(self):
        config = resolve_config('simulate', {'structure': 'h.json', 'full_paths': 'p.bin'})
        assert set(config.to_dict()) == {'command', 'parameters', 'seed', 'threads', 'registry'}
        assert config.parameters['out'] == 'data.csv'
        assert config.parameters['full_paths'] == 'p.bin'

    def test_estimate_gap_defaults(self):
        p = resolve_config('estimate-gap', {'euclidean': '2'}).parameters
        assert p['model'] == 'quadratic'
        assert p['eps_grid'] == [0.6, 0.65, 0.7, 0.8, 0.9, 1.0]
        assert p['dt_ladder'] is None
        assert resolve_config('estimate-gap', {'euclidean': '2', 'model': 'auto'}).parameters['model'] == 'auto'
        assert resolve_config('estimate-gap', {'dt_ladder': '1e-3,5e-4'}).parameters['dt_ladder'] == [1e-3, 5e-4]


def test_get_setting_prefers_environment(monkeypatch):
    monkeypatch.setenv('HGAP_TEST_SETTING', 'from-env')
    assert get_setting('HGAP_TEST_SETTING', 'hgap_test_setting', 'fallback') == 'from-env'
    monkeypatch.delenv('HGAP_TEST_SETTING')
    assert get_setting('HGAP_TEST_SETTING', 'hgap_test_setting', 'fallback') == 'fallback'


def test_every_command_has_options():
    assert set(COMMAND_OPTIONS) == {'radon', 'build', 'verify', 'eigen', 'bounds', 'simulate', 'estimate-gap',
                                    'check-lemma', 'report'}
