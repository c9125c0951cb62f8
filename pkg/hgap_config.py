# hgap_config.py - Run configuration: option table, config files, environment lookup
"""
Every subcommand option lives in one table. The argument parser and the INI config file
reader are both built from it, so a flag and its config key always match
(--m-list <-> m_list). Flags given on the command line beat config values, and config
values beat defaults.
"""

import configparser
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from hgap_errors import ConfigError

logger = logging.getLogger(__name__)

TOOL_VERSION = '0.1.0'
DEFAULT_SEED = 20240101
DEFAULT_REGISTRY = 'runs/registry.jsonl'
DEFAULT_THREADS = 1

REQUIRED = object()


def parse_bool(value: Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def int_list(value: Union[str, List[int]]) -> List[int]:
    if isinstance(value, list):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(',') if v.strip()]


def float_list(value: Union[str, List[float]]) -> List[float]:
    if isinstance(value, list):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(',') if v.strip()]


def str_list(value: Union[str, List[str]]) -> List[str]:
    if isinstance(value, list):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(',') if v.strip()]


@dataclass(frozen=True)
class Option:
    name: str
    convert: Callable[[Any], Any]
    default: Any = None
    help: str = ''
    choices: Optional[tuple] = None
    flag: bool = False

    @property
    def cli_flag(self) -> str:
        return '--' + self.name.replace('_', '-')


COMMON_OPTIONS = [
    Option('seed', int, None, 'master seed (default 20240101)'),
    Option('threads', int, None, 'worker processes; env HGAP_THREADS'),
    Option('registry', str, None, 'run registry file; env HGAP_REGISTRY'),
]

COMMAND_OPTIONS: Dict[str, List[Option]] = {
    'radon': [
        Option('m', int, REQUIRED, 'horizontal dimension'),
    ],
    'build': [
        Option('m', int, REQUIRED, 'horizontal dimension'),
        Option('n', int, REQUIRED, 'center dimension'),
        Option('out', str, None, 'write the structure JSON here'),
    ],
    'verify': [
        Option('structure', str, REQUIRED, 'structure JSON file'),
        Option('samples', int, 64, 'random vectors for the pointwise check'),
    ],
    'eigen': [
        Option('d_max', int, 20, 'largest dimension'),
        Option('format', str, 'csv', 'output format', choices=('csv', 'json')),
        Option('out', str, None, 'output file (stdout when omitted)'),
    ],
    'bounds': [
        Option('m', int, None, 'horizontal dimension'),
        Option('n', int, REQUIRED, 'center dimension'),
        Option('format', str, 'json', 'output format for a single pair', choices=('json', 'csv')),
        Option('sweep', parse_bool, False, 'emit the ratio table over --m-list', flag=True),
        Option('m_list', int_list, [2, 4, 8, 16, 32, 64], 'comma separated m values for --sweep'),
        Option('out', str, None, 'output file (stdout when omitted)'),
    ],
    'simulate': [
        Option('structure', str, REQUIRED, 'structure JSON file'),
        Option('T', float, 1.0, 'horizon'),
        Option('dt', float, 1e-3, 'step size'),
        Option('paths', int, 1000, 'number of paths'),
        Option('scheme', str, 'ito', 'stochastic integral scheme', choices=('ito', 'stratonovich')),
        Option('out', str, 'data.csv', 'terminal values CSV'),
        Option('full_paths', str, None, 'binary file with every path'),
    ],
    'estimate-gap': [
        Option('structure', str, None, 'structure JSON file'),
        Option('euclidean', int, None, 'calibration mode: Brownian motion on R^M instead of a group'),
        Option('method', str, 'both', 'estimator', choices=('exit', 'smalldev', 'both')),
        Option('paths', int, 200_000, 'number of paths'),
        Option('dt', float, 1e-4, 'step size'),
        Option('t_max', float, 6.0, 'exit simulation horizon'),
        Option('eps_grid', float_list, [0.6, 0.65, 0.7, 0.8, 0.9, 1.0], 'small-deviation radii'),
        Option('model', str, 'quadratic', 'finite-eps correction', choices=('linear', 'quadratic', 'auto')),
        Option('dt_ladder', float_list, None, 'comma separated step sizes for an exit-estimate dt ladder'),
        Option('k_sigma', float, 3.0, 'sandwich interval half-width in standard errors'),
        Option('out', str, 'report.json', 'report JSON'),
        Option('csv', str, None, 'curve dump CSV'),
    ],
    'check-lemma': [
        Option('structure', str, REQUIRED, 'structure JSON file'),
        Option('paths', int, 10_000, 'number of samples'),
        Option('dt', float, 1e-4, 'step size'),
        Option('T', float, 1.0, 'horizon'),
        Option('alpha', float, 0.01, 'KS significance level'),
        Option('out', str, None, 'diagnostics JSON (stdout when omitted)'),
    ],
    'report': [
        Option('runs', str_list, None, 'comma separated run ids'),
        Option('glob', str, None, 'run id pattern'),
        Option('out', str, 'report', 'output directory'),
        Option('docx', parse_bool, False, 'also write report.docx', flag=True),
    ],
}

def get_setting(env_var: str, secret_key: str, default: Any) -> Any:
    """Environment variable first, then Streamlit secrets, then the default"""
    value = os.getenv(env_var)
    if value:
        return value
    try:
        import streamlit as st
        value = st.secrets.get(secret_key)
        if value:
            return value
    except Exception:
        pass
    return default


@dataclass
class RunConfig:
    command: str
    parameters: Dict[str, Any]
    seed: int
    threads: int = DEFAULT_THREADS
    registry: str = DEFAULT_REGISTRY

    def snapshot(self) -> Dict:
        """Everything that determines the outputs; threads and registry are left out"""
        return {'command': self.command, 'parameters': dict(self.parameters), 'seed': self.seed}

    def to_dict(self) -> Dict:
        return asdict(self)


def load_config_file(path: Union[str, Path]) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case: T and t_max differ
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config file {path}: {e}")

    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    allowed_common = {o.name for o in COMMON_OPTIONS}
    for name, values in sections.items():
        if name == 'common':
            allowed = allowed_common
        elif name in COMMAND_OPTIONS:
            allowed = {o.name for o in COMMAND_OPTIONS[name]} | allowed_common
        else:
            raise ConfigError(f"unknown config section [{name}]")
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown} in section [{name}]")
    return sections


def _convert(option: Option, raw: Any, origin: str) -> Any:
    try:
        value = option.convert(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value {raw!r} for '{option.name}' from {origin}: {e}")
    if option.choices and value not in option.choices:
        raise ConfigError(f"'{option.name}' must be one of {option.choices}, got {value!r}")
    return value


def resolve_config(command: str, flags: Dict[str, Any],
                   file_sections: Optional[Dict[str, Dict[str, str]]] = None) -> RunConfig:
    """Merge flags (None = not given), config file values and defaults into a RunConfig"""
    if command not in COMMAND_OPTIONS:
        raise ConfigError(f"unknown command '{command}'")
    file_sections = file_sections or {}
    from_file = dict(file_sections.get('common', {}))
    from_file.update(file_sections.get(command, {}))

    values = {}
    for option in COMMON_OPTIONS + COMMAND_OPTIONS[command]:
        given = flags.get(option.name)
        if option.flag and given is False:
            given = None
        if given is not None:
            values[option.name] = _convert(option, given, 'command line')
        elif option.name in from_file:
            values[option.name] = _convert(option, from_file[option.name], 'config file')
        elif option.default is REQUIRED:
            raise ConfigError(f"'{command}' needs {option.cli_flag}")
        else:
            values[option.name] = option.default

    seed = values.pop('seed')
    threads = values.pop('threads')
    registry = values.pop('registry')
    if threads is None:
        threads = get_setting('HGAP_THREADS', 'hgap_threads', DEFAULT_THREADS)
        try:
            threads = int(threads)
        except ValueError:
            raise ConfigError(f"HGAP_THREADS must be an integer, got {threads!r}")
    config = RunConfig(
        command=command,
        parameters=values,
        seed=DEFAULT_SEED if seed is None else seed,
        threads=threads,
        registry=str(registry if registry is not None else get_setting('HGAP_REGISTRY', 'hgap_registry',
                                                                       DEFAULT_REGISTRY)),
    )
    if config.seed < 0 or config.seed >= 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {config.seed}")
    if config.threads < 1:
        raise ConfigError(f"threads must be at least 1, got {config.threads}")
    logger.debug(f"Resolved config: {config.to_dict()}")
    return config
