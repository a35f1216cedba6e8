"""
Run configuration for the F-SLM simulator.

Parses and validates the JSON document that drives a CLI run. Every key is
checked; unknown keys and conflicting excitation sources are rejected with a
message naming the offending field.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .defaults import (
    DEFAULT_BASELINE_SAMPLES,
    DEFAULT_DELTA,
    DEFAULT_GRID_POINTS,
    DEFAULT_MAX_CYCLES,
    DEFAULT_OFFSET_UM,
    DEFAULT_REALIZATIONS,
    DEFAULT_SMF_MFR_UM,
    DEFAULT_TARGET_SPECKLE,
    DEFAULT_TERMINATION_FRACTION,
    REFERENCE_FIBER,
)


COMMANDS = ('simulate', 'sweep', 'ablate', 'modes')
FORMATS = ('csv', 'json', 'both')
INITIAL_ANGLE_MODES = ('zero', 'random')
INPUT_MIXING_MODES = ('haar', 'group_exact')
EXCITATION_SOURCES = ('uniform_modes', 'analytic_offset', 'groups', 'groups_file')

TOP_LEVEL_KEYS = frozenset({
    'command', 'seed', 'fiber', 'excitation', 'paddles', 'realizations',
    'baseline_samples', 'delta_rad', 'output_dir', 'format',
    'termination_fraction', 'max_cycles', 'grid_points', 'initial_angles',
    'target_speckle', 'input_mixing', 'slope_range', 'raw_dump',
    'dump_model', 'plot', 'offset_scan_um',
})
FIBER_KEYS = frozenset({'core_radius_um', 'na', 'n1', 'wavelength_um'})
OFFSET_KEYS = frozenset({'offset_um', 'smf_mfr_um', 'group_range'})

MAX_SEED = 2 ** 64


class ConfigError(ValueError):
    """Raised when a run configuration cannot be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None,
                 column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


@dataclass(frozen=True)
class ExcitationSpec:
    """
    The single excitation source of a run.

    Attributes:
        source: One of EXCITATION_SOURCES
        uniform_modes: Evenly excited spatial mode counts (uniform_modes)
        offset_um: Lateral SMF offset (analytic_offset)
        smf_mfr_um: SMF mode-field radius (analytic_offset)
        group_range: Inclusive group range kept from the offset launch
        weights: Explicit per-group weights starting at group 1 (groups)
        path: CSV file with `group,weight` rows (groups_file)
    """
    source: str
    uniform_modes: Tuple[int, ...] = ()
    offset_um: float = DEFAULT_OFFSET_UM
    smf_mfr_um: float = DEFAULT_SMF_MFR_UM
    group_range: Optional[Tuple[int, int]] = None
    weights: Tuple[float, ...] = ()
    path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration.

    Attributes mirror the JSON keys; see README.md for a description of each.
    """
    command: str
    seed: int
    excitation: Optional[ExcitationSpec]
    fiber: Dict[str, float] = field(default_factory=lambda: dict(REFERENCE_FIBER))
    paddles: Tuple[int, ...] = (0,)
    realizations: int = DEFAULT_REALIZATIONS
    baseline_samples: int = DEFAULT_BASELINE_SAMPLES
    delta_rad: float = DEFAULT_DELTA
    output_dir: str = 'output'
    format: str = 'csv'
    termination_fraction: float = DEFAULT_TERMINATION_FRACTION
    max_cycles: int = DEFAULT_MAX_CYCLES
    grid_points: int = DEFAULT_GRID_POINTS
    initial_angles: str = 'zero'
    target_speckle: int = DEFAULT_TARGET_SPECKLE
    input_mixing: str = 'haar'
    slope_range: Optional[Tuple[int, int]] = None
    raw_dump: bool = False
    dump_model: bool = False
    plot: bool = False
    offset_scan_um: Tuple[float, ...] = ()
    source: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def writes_csv(self) -> bool:
        return self.format in ('csv', 'both')

    @property
    def writes_json(self) -> bool:
        return self.format in ('json', 'both')


def load_config(config_path: str) -> RunConfig:
    """
    Read and parse a run configuration file.

    Args:
        config_path: Path to the JSON configuration

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file cannot be read or fails validation
    """
    try:
        text = Path(config_path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"Could not read config {config_path}: {e}")
    return parse_config(text)


def parse_config(text: str) -> RunConfig:
    """
    Parse a JSON run configuration.

    Args:
        text: JSON document

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: On malformed JSON (with line/column) or on any
                     validation failure (naming the field and constraint)
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON: {e.msg}", line=e.lineno, column=e.colno)

    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object")

    unknown = sorted(set(data) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config key '{unknown[0]}'")

    command = data.get('command')
    if command not in COMMANDS:
        raise ConfigError(f"'command' must be one of {', '.join(COMMANDS)}; got {command!r}")

    # No entropy default: every run is reproducible from its config
    if 'seed' not in data:
        raise ConfigError("'seed' is required")
    seed = _require_int(data, 'seed', minimum=0)
    if seed >= MAX_SEED:
        raise ConfigError("'seed' must be below 2**64")

    fiber = _parse_fiber(data.get('fiber'))

    excitation = None
    if 'excitation' in data:
        excitation = _parse_excitation(data['excitation'])
    elif command != 'modes':
        raise ConfigError(f"'excitation' is required for the {command} command")

    paddles = _parse_paddles(data.get('paddles', 0))
    if command == 'simulate':
        if len(paddles) != 1:
            raise ConfigError("'paddles' must be a single integer for simulate")
        if excitation and len(excitation.uniform_modes) > 1:
            raise ConfigError("'uniform_modes' must be a single integer for simulate")
    if command == 'ablate' and excitation and len(excitation.uniform_modes) > 1:
        raise ConfigError("'uniform_modes' must be a single integer for ablate")

    fmt = data.get('format', 'csv')
    if fmt not in FORMATS:
        raise ConfigError(f"'format' must be one of {', '.join(FORMATS)}; got {fmt!r}")

    initial_angles = data.get('initial_angles', 'zero')
    if initial_angles not in INITIAL_ANGLE_MODES:
        raise ConfigError(f"'initial_angles' must be 'zero' or 'random'; got {initial_angles!r}")

    input_mixing = data.get('input_mixing', 'haar')
    if input_mixing not in INPUT_MIXING_MODES:
        raise ConfigError(f"'input_mixing' must be 'haar' or 'group_exact'; got {input_mixing!r}")

    output_dir = data.get('output_dir', 'output')
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("'output_dir' must be a non-empty string")

    return RunConfig(
        command=command,
        seed=seed,
        excitation=excitation,
        fiber=fiber,
        paddles=paddles,
        realizations=_require_int(data, 'realizations', minimum=1, default=DEFAULT_REALIZATIONS),
        baseline_samples=_require_int(data, 'baseline_samples', minimum=1,
                                      default=DEFAULT_BASELINE_SAMPLES),
        delta_rad=_require_float(data, 'delta_rad', default=DEFAULT_DELTA),
        output_dir=output_dir,
        format=fmt,
        termination_fraction=_require_float(data, 'termination_fraction', positive=True,
                                            default=DEFAULT_TERMINATION_FRACTION),
        max_cycles=_require_int(data, 'max_cycles', minimum=1, default=DEFAULT_MAX_CYCLES),
        grid_points=_require_int(data, 'grid_points', minimum=1, default=DEFAULT_GRID_POINTS),
        initial_angles=initial_angles,
        target_speckle=_require_int(data, 'target_speckle', minimum=1,
                                    default=DEFAULT_TARGET_SPECKLE),
        input_mixing=input_mixing,
        slope_range=_parse_range(data.get('slope_range'), 'slope_range'),
        raw_dump=_require_bool(data, 'raw_dump'),
        dump_model=_require_bool(data, 'dump_model'),
        plot=_require_bool(data, 'plot'),
        offset_scan_um=_parse_offsets(data.get('offset_scan_um', [])),
        source=data,
    )


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require_int(data: Dict[str, Any], key: str, minimum: int = 0,
                 default: Optional[int] = None) -> int:
    value = data.get(key, default)
    if not _is_int(value):
        raise ConfigError(f"'{key}' must be an integer; got {value!r}")
    if value < minimum:
        raise ConfigError(f"'{key}' must be >= {minimum}; got {value}")
    return value


def _require_float(data: Dict[str, Any], key: str, positive: bool = False,
                   default: Optional[float] = None) -> float:
    value = data.get(key, default)
    if not _is_number(value) or not math.isfinite(value):
        raise ConfigError(f"'{key}' must be a finite number; got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"'{key}' must be positive; got {value}")
    return float(value)


def _require_bool(data: Dict[str, Any], key: str) -> bool:
    value = data.get(key, False)
    if not isinstance(value, bool):
        raise ConfigError(f"'{key}' must be true or false; got {value!r}")
    return value


def _parse_fiber(block: Any) -> Dict[str, float]:
    if block is None:
        return dict(REFERENCE_FIBER)
    if not isinstance(block, dict):
        raise ConfigError("'fiber' must be an object")

    unknown = sorted(set(block) - FIBER_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config key 'fiber.{unknown[0]}'")
    missing = sorted(FIBER_KEYS - set(block))
    if missing:
        raise ConfigError(f"'fiber.{missing[0]}' is required")

    fiber = {}
    for key in sorted(FIBER_KEYS):
        value = block[key]
        if not _is_number(value) or not math.isfinite(value) or value <= 0:
            raise ConfigError(f"'fiber.{key}' must be a positive number; got {value!r}")
        fiber[key] = float(value)

    if fiber['na'] >= fiber['n1']:
        raise ConfigError("'fiber.na' must be smaller than 'fiber.n1'")
    return fiber


def _parse_excitation(block: Any) -> ExcitationSpec:
    if not isinstance(block, dict):
        raise ConfigError("'excitation' must be an object")

    unknown = sorted(set(block) - set(EXCITATION_SOURCES))
    if unknown:
        raise ConfigError(f"Unknown config key 'excitation.{unknown[0]}'")

    present = [key for key in EXCITATION_SOURCES if key in block]
    if not present:
        raise ConfigError(
            f"'excitation' must specify one of {', '.join(EXCITATION_SOURCES)}")
    if len(present) > 1:
        raise ConfigError(
            f"'excitation' specifies conflicting sources: {' and '.join(sorted(present))}")

    source = present[0]
    value = block[source]

    if source == 'uniform_modes':
        counts = value if isinstance(value, list) else [value]
        if not counts or not all(_is_int(n) and n >= 1 for n in counts):
            raise ConfigError("'excitation.uniform_modes' must be a positive integer or a list of them")
        return ExcitationSpec(source=source, uniform_modes=tuple(counts))

    if source == 'analytic_offset':
        if not isinstance(value, dict):
            raise ConfigError("'excitation.analytic_offset' must be an object")
        unknown = sorted(set(value) - OFFSET_KEYS)
        if unknown:
            raise ConfigError(f"Unknown config key 'excitation.analytic_offset.{unknown[0]}'")
        offset = value.get('offset_um', DEFAULT_OFFSET_UM)
        mfr = value.get('smf_mfr_um', DEFAULT_SMF_MFR_UM)
        if not _is_number(offset) or offset < 0:
            raise ConfigError(f"'excitation.analytic_offset.offset_um' must be >= 0; got {offset!r}")
        if not _is_number(mfr) or mfr <= 0:
            raise ConfigError(f"'excitation.analytic_offset.smf_mfr_um' must be positive; got {mfr!r}")
        return ExcitationSpec(
            source=source,
            offset_um=float(offset),
            smf_mfr_um=float(mfr),
            group_range=_parse_range(value.get('group_range'),
                                     'excitation.analytic_offset.group_range'),
        )

    if source == 'groups':
        if not isinstance(value, list) or not value:
            raise ConfigError("'excitation.groups' must be a non-empty list of weights")
        if not all(_is_number(w) and 0 <= w <= 1 for w in value):
            raise ConfigError("'excitation.groups' weights must lie in [0, 1]")
        if sum(value) > 1 + 1e-12:
            raise ConfigError("'excitation.groups' weights must sum to at most 1")
        if not any(w > 0 for w in value):
            raise ConfigError("'excitation.groups' must contain a nonzero weight")
        return ExcitationSpec(source=source, weights=tuple(float(w) for w in value))

    if not isinstance(value, str) or not value:
        raise ConfigError("'excitation.groups_file' must be a path")
    return ExcitationSpec(source=source, path=value)


def _parse_paddles(value: Any) -> Tuple[int, ...]:
    counts: List[Any] = value if isinstance(value, list) else [value]
    if not counts:
        raise ConfigError("'paddles' must not be empty")
    if not all(_is_int(k) and k >= 0 for k in counts):
        raise ConfigError(f"'paddles' must be non-negative integers; got {value!r}")
    return tuple(counts)


def _parse_range(value: Any, key: str) -> Optional[Tuple[int, int]]:
    if value is None:
        return None
    if (not isinstance(value, list) or len(value) != 2
            or not all(_is_int(v) for v in value) or value[0] > value[1]):
        raise ConfigError(f"'{key}' must be a pair [low, high] with low <= high")
    return (value[0], value[1])


def _parse_offsets(value: Any) -> Tuple[float, ...]:
    if not isinstance(value, list) or not all(_is_number(v) and v >= 0 for v in value):
        raise ConfigError("'offset_scan_um' must be a list of non-negative offsets")
    return tuple(float(v) for v in value)
