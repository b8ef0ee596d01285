#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Configuration Management Module
Loads run configurations (YAML or JSON), merges them over the defaults and
validates them into a RunConfig before any command runs.
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import ConfigError, GeometryError
from .geometry import Domain
from .solver import SolverConfig

logger = logging.getLogger(__name__)

# Optional YAML support
try:
    import yaml
    HAS_YAML = True
    _YAML_ERRORS: tuple = (yaml.YAMLError,)
except ImportError:
    HAS_YAML = False
    _YAML_ERRORS = ()


COMMANDS = ('solve', 'torsion', 'obstacle', 'barrier', 'diagnose', 'verify')

DEFAULT_SEED = 0xF5AC

QUADRATURE_KEYS = frozenset({'order', 'grading', 'floor', 'angular_rtol', 'angular_limit',
                             'ball_order', 'tol', 'workers', 'eps', 'far_radius'})

DEFAULT_CONFIG: Dict[str, Any] = {
    'domain': {
        'kind': 'interval',
        'params': [1.0],
        'dim': None,
    },
    'problem': {
        'p': 2.0,
        's': 0.5,
        'load': 1.0,
    },
    'grid': {
        'h': 0.00390625,
        'refine': 0,
    },
    'solver': {
        'tol': 1e-8,
        'max_iter': 50000,
        'method': 'bb',
        'armijo': 1e-4,
        'backtrack': 0.5,
        'nonmonotone_window': 10,
        'project': True,
        'compensate': True,
        'workers': 1,
    },
    'quadrature': {
        'order': 16,
        'grading': 0.15,
        'angular_rtol': 1e-10,
        'ball_order': 24,
    },
    'diagnostics': {
        'anchors': None,
        'n_anchors': 4,
        'R0': None,
        'n_levels': 3,
        'scale_factor': 2.0,
    },
    'barrier': {
        'kind': 'bump-lower',
        'R': 0.1,
        'lambda_cap': 0.5,
        'n_lambda': 2,
        'max_points': 6,
        'anchor': None,
        'xbar_depth': 0.25,
        'upper': True,
    },
    'obstacle': {
        'lower_scale': 0.5,
        'upper': None,
    },
    'verify': {
        'quick': False,
        'h2d': 0.015625,
        'tolerance_scale': 1.0,
        'criteria': None,
        'comparison_pairs': 100,
        'superposition_configs': 50,
        'lewy_instances': 20,
    },
    'output': {
        'directory': 'out',
        'use_colors': True,
        'plots': True,
    },
    'seed': DEFAULT_SEED,
}


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> None:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


class Config:
    """Run configuration: defaults overlaid with a YAML or JSON file."""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize configuration.

        Args:
            config_file: Path to configuration file (JSON or YAML)
        """
        self.config_file = config_file
        self.config = copy.deepcopy(DEFAULT_CONFIG)

        if config_file:
            self.load(config_file)

    def load(self, config_file: str) -> None:
        """
        Load configuration from file and merge it over the current values.

        Raises:
            ConfigError: If the file is missing, unreadable or not a mapping
        """
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"Config file not found: {config_file}")

        suffix = path.suffix.lower()
        try:
            with open(path, 'r', encoding='utf-8') as f:
                if suffix in ['.yaml', '.yml']:
                    if not HAS_YAML:
                        raise ConfigError("YAML support not available. Install PyYAML: pip install PyYAML")
                    loaded = yaml.safe_load(f)
                elif suffix == '.json':
                    loaded = json.load(f)
                else:
                    raise ConfigError(f"Unsupported config format: {path.suffix}")
        except (OSError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"Failed to load config {config_file}: {exc}") from exc
        except _YAML_ERRORS as exc:
            raise ConfigError(f"Failed to parse config {config_file}: {exc}") from exc

        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("Config file must contain a mapping of sections")
        _merge(self.config, loaded)
        logger.info("Configuration loaded from %s", config_file)

    def save(self, config_file: Optional[str] = None) -> None:
        """
        Save current configuration to file.

        Raises:
            ConfigError: If no path is known or the format is unsupported
        """
        file_path = config_file or self.config_file
        if not file_path:
            raise ConfigError("No config file specified")
        _dump(self.config, Path(file_path))
        logger.info("Configuration saved to %s", file_path)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value.

        Args:
            key: Configuration key (supports dot notation, e.g., 'problem.p')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        value = self.config
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value.

        Args:
            key: Configuration key (supports dot notation)
            value: Value to set
        """
        keys = key.split('.')
        config = self.config
        for k in keys[:-1]:
            config = config.setdefault(k, {})
        config[keys[-1]] = value

    def as_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)


def _dump(data: Dict[str, Any], path: Path) -> None:
    suffix = path.suffix.lower()
    if suffix in ['.yaml', '.yml']:
        if not HAS_YAML:
            raise ConfigError("YAML support not available. Install PyYAML: pip install PyYAML")
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
    elif suffix == '.json':
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2)
    else:
        raise ConfigError(f"Unsupported config format: {path.suffix}")


def create_example_config(filename: str = 'config.example.yaml') -> str:
    """
    Create an example configuration file holding the defaults.

    Returns:
        The path written (JSON when YAML is unavailable)
    """
    path = Path(filename)
    if path.suffix.lower() in ['.yaml', '.yml'] and not HAS_YAML:
        logger.warning("YAML support not available; writing JSON instead")
        path = path.with_suffix('.json')
    _dump(DEFAULT_CONFIG, path)
    return str(path)


def _number(section: Dict[str, Any], key: str, name: str) -> float:
    try:
        return float(section[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {section.get(key)!r}") from exc


def _integer(section: Dict[str, Any], key: str, name: str, minimum: int = 0) -> int:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    """
    A validated configuration for one command.

    Attributes:
        command: One of COMMANDS
        domain: The domain Ω
        p: Growth exponent
        s: Order
        h: Grid spacing after refinement
        solver: Solver settings
        load: Constant load f
        quadrature: QuadratureScheme overrides
        diagnostics: Diagnostics settings
        barrier: Barrier settings
        obstacle: Obstacle settings
        verify: Acceptance-suite settings
        out: Output directory
        seed: Seed of randomized campaigns
        use_colors: Colored console output
        plots: Write SVG plots
        raw: The merged configuration the run was built from
    """

    command: str
    domain: Domain
    p: float
    s: float
    h: float
    solver: SolverConfig
    load: float
    quadrature: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    barrier: Dict[str, Any] = field(default_factory=dict)
    obstacle: Dict[str, Any] = field(default_factory=dict)
    verify: Dict[str, Any] = field(default_factory=dict)
    out: str = 'out'
    seed: int = DEFAULT_SEED
    use_colors: bool = True
    plots: bool = True
    raw: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: Config, command: str, out: Optional[str] = None,
                    seed: Optional[int] = None, refine: Optional[int] = None) -> 'RunConfig':
        """
        Validate a configuration for a command.

        Args:
            config: Loaded configuration
            command: Command to run
            out: Output directory override
            seed: Seed override
            refine: Number of grid halvings override

        Raises:
            ConfigError: If any value is missing or out of range
        """
        if command not in COMMANDS:
            raise ConfigError(f"Unknown command '{command}'; choose from {COMMANDS}")
        data = config.as_dict()
        if seed is not None:
            data['seed'] = seed
        if refine is not None:
            data['grid']['refine'] = refine
        if out is not None:
            data['output']['directory'] = out

        dom = data['domain']
        try:
            domain = Domain.from_spec(dom.get('kind'), dom.get('params') or [], dom.get('dim'))
        except (GeometryError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"Invalid domain: {exc}") from exc

        problem = data['problem']
        p = _number(problem, 'p', 'problem.p')
        s = _number(problem, 's', 'problem.s')
        load = _number(problem, 'load', 'problem.load')
        h = _number(data['grid'], 'h', 'grid.h')
        if not h > 0.0:
            raise ConfigError(f"grid.h must be positive, got {h}")
        levels = _integer(data['grid'], 'refine', 'grid.refine')
        h = h / 2 ** levels

        options = dict(data['solver'])
        try:
            for key in ('tol', 'armijo', 'backtrack'):
                if key in options:
                    options[key] = float(options[key])
            solver = SolverConfig(p=p, s=s, **options)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"Invalid solver option: {exc}") from exc

        seed_value = data.get('seed')
        if isinstance(seed_value, bool) or not isinstance(seed_value, int) \
                or not 0 <= seed_value < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed_value!r}")

        quadrature = data['quadrature']
        if not isinstance(quadrature, dict):
            raise ConfigError("quadrature must be a mapping")
        unknown = sorted(set(quadrature) - QUADRATURE_KEYS)
        if unknown:
            raise ConfigError(f"Unknown quadrature option(s): {', '.join(unknown)}")
        for key, minimum in (('order', 2), ('ball_order', 1), ('angular_limit', 1),
                             ('workers', 1)):
            if key in quadrature:
                _integer(quadrature, key, f'quadrature.{key}', minimum=minimum)
        if 'grading' in quadrature and \
                not 0.0 < _number(quadrature, 'grading', 'quadrature.grading') < 1.0:
            raise ConfigError("quadrature.grading must lie in (0, 1)")
        for key in ('floor', 'angular_rtol', 'tol', 'eps', 'far_radius'):
            if key in quadrature and not _number(quadrature, key, f'quadrature.{key}') > 0.0:
                raise ConfigError(f"quadrature.{key} must be positive")

        diag = data['diagnostics']
        _integer(diag, 'n_levels', 'diagnostics.n_levels', minimum=3)
        _integer(diag, 'n_anchors', 'diagnostics.n_anchors', minimum=1)
        if not _number(diag, 'scale_factor', 'diagnostics.scale_factor') > 0.0:
            raise ConfigError("diagnostics.scale_factor must be positive")
        if diag.get('R0') is not None and not _number(diag, 'R0', 'diagnostics.R0') > 0.0:
            raise ConfigError("diagnostics.R0 must be positive")

        barrier = data['barrier']
        if not _number(barrier, 'R', 'barrier.R') > 0.0:
            raise ConfigError("barrier.R must be positive")
        if not 0.0 <= _number(barrier, 'lambda_cap', 'barrier.lambda_cap') < 1.0:
            raise ConfigError("barrier.lambda_cap must lie in [0, 1)")
        _integer(barrier, 'n_lambda', 'barrier.n_lambda', minimum=1)
        _integer(barrier, 'max_points', 'barrier.max_points', minimum=1)

        verify = data['verify']
        _number(verify, 'tolerance_scale', 'verify.tolerance_scale')
        if not _number(verify, 'h2d', 'verify.h2d') > 0.0:
            raise ConfigError("verify.h2d must be positive")
        criteria: Optional[List[int]] = verify.get('criteria')
        if criteria is not None and (not isinstance(criteria, list)
                                     or not all(isinstance(c, int) and 1 <= c <= 11 for c in criteria)):
            raise ConfigError("verify.criteria must be a list of criterion numbers 1-11")

        output = data['output']
        return cls(
            command=command, domain=domain, p=p, s=s, h=h, solver=solver, load=load,
            quadrature=dict(quadrature), diagnostics=dict(diag), barrier=dict(barrier),
            obstacle=dict(data['obstacle']), verify=dict(verify),
            out=str(output.get('directory') or 'out'), seed=seed_value,
            use_colors=bool(output.get('use_colors', True)), plots=bool(output.get('plots', True)),
            raw=data,
        )
