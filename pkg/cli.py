"""
Command-line front end for the F-SLM simulator.

Reads a JSON run configuration, runs one of the simulate, sweep, ablate or
modes commands and writes the results to the output directory. Every file is
written atomically and listed in manifest.json.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from ensemble import (
    CellStats,
    EnsembleConfig,
    EnsembleStats,
    ModeSpec,
    compare_ablation,
    lcslm_comparator,
    linear_regime_fit,
    run_ensemble,
    sweep_modes_paddles,
)
from fiber import (
    ExcitationProfile,
    FiberSpec,
    ModeGroupStructure,
    launch_coupling,
    mode_group_structure,
    mode_table,
    offset_launch_weights,
    offset_loss_scan,
)
from file_operations import (
    atomic_write_text,
    config_hash,
    format_duration,
    to_json_text,
    write_csv_text,
)
from model import build_model
from optimize import OptimizerOptions
from randmat import StreamTree
from realization_dump import dump_model
from settings import TOOL_NAME, TOOL_VERSION, ConfigError, RunConfig, load_config
from settings.defaults import (
    ABLATION_FILE,
    DEFAULT_OFFSET_UM,
    DEFAULT_SMF_MFR_UM,
    LCSLM_FILE,
    MANIFEST_FILE,
    MODEL_DUMP_FILE,
    MODES_FILE,
    OFFSET_SCAN_FILE,
    PLOT_FILE,
    RAW_FILE,
    SLOPES_FILE,
    STATS_FILE,
    STATS_JSON_FILE,
)


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

STATS_HEADER = ('n_modes', 'k_paddles', 'mean_enh', 'std_enh', 'stderr', 'realizations', 'ablated')
SLOPES_HEADER = ('n_modes', 'k_min', 'k_max', 'slope')
ABLATION_HEADER = ('k_paddles', 'mean_full', 'std_full', 'mean_ablated', 'std_ablated', 'ratio')
LCSLM_HEADER = ('count', 'enhancement')
MODES_HEADER = ('group', 'modes', 'beta_rad_per_m', 'weight')
OFFSET_SCAN_HEADER = ('offset_um', 'coupled_fraction', 'loss_db')


class SimulatorCLI:
    """
    Runs one configured command and records what it wrote.

    Each command method fills the output directory through _write_text so
    that the manifest lists every file produced by the run.
    """

    def __init__(self, config: RunConfig, workers: int = 1,
                 output_dir: Optional[str] = None):
        self.config = config
        self.workers = max(1, workers)
        self.output_dir = Path(output_dir or config.output_dir)
        self.written: List[str] = []
        try:
            self.fiber = FiberSpec.from_config(config.fiber)
        except ValueError as e:
            raise ConfigError(f"'fiber': {e}")
        self._structure: Optional[ModeGroupStructure] = None

    @property
    def structure(self) -> ModeGroupStructure:
        if self._structure is None:
            self._structure = mode_group_structure(self.fiber)
        return self._structure

    def run(self) -> Path:
        """
        Execute the configured command.

        Returns:
            Path of the written manifest

        Raises:
            ConfigError: If the configuration cannot be turned into a run
        """
        started = time.perf_counter()
        command = self.config.command
        logger.info("%s %s: running %s (seed %d, %d worker%s)", TOOL_NAME, TOOL_VERSION,
                    command, self.config.seed, self.workers, '' if self.workers == 1 else 's')

        if command == 'simulate':
            self._run_simulate()
        elif command == 'sweep':
            self._run_sweep()
        elif command == 'ablate':
            self._run_ablate()
        else:
            self._run_modes()

        wall_time = time.perf_counter() - started
        manifest = self._write_manifest(wall_time)
        logger.info("Finished %s in %s; outputs in %s", command,
                    format_duration(wall_time), self.output_dir)
        return manifest

    # ---- commands --------------------------------------------------------

    def _run_simulate(self):
        spec = self._mode_specs()[0]
        config = self._ensemble_config(spec, self.config.paddles)
        stats = run_ensemble(config, self.workers)
        self._write_stats(stats)
        self._write_extras(spec, stats, comparator_counts=None)

    def _run_sweep(self):
        specs = self._mode_specs()
        paddles = self.config.paddles
        if self.config.excitation.source == 'uniform_modes':
            base = self._ensemble_config(specs[0], paddles)
            stats = sweep_modes_paddles([s.n_modes for s in specs], paddles, base,
                                        self.workers, self.config.slope_range)
        else:
            stats = run_ensemble(self._ensemble_config(specs[0], paddles), self.workers)
            fit = linear_regime_fit(stats, specs[0].n_modes, self.config.slope_range)
            if fit is not None:
                stats.slopes[specs[0].n_modes] = fit

        for n_modes in sorted({s.n_modes for s in specs}):
            if n_modes not in stats.slopes:
                logger.warning("N=%d: fewer than two cells qualify for the slope fit", n_modes)

        self._write_stats(stats)
        self._write_text(SLOPES_FILE, write_csv_text(
            SLOPES_HEADER,
            [(fit.n_modes, fit.k_min, fit.k_max, fit.slope)
             for _, fit in sorted(stats.slopes.items())]))

        # Two macropixels per paddle cover the same control budget
        counts = range(0, 2 * max(paddles) + 1)
        self._write_text(LCSLM_FILE, write_csv_text(LCSLM_HEADER, lcslm_comparator(counts)))
        self._write_extras(specs[0], stats, comparator_counts=counts)

    def _run_ablate(self):
        spec = self._mode_specs()[0]
        config = self._ensemble_config(spec, self.config.paddles)
        pairs = compare_ablation(config, self.workers)

        stats = EnsembleStats()
        rows = []
        for full, ablated in pairs:
            for cell in (full, ablated):
                stats.cells[(cell.n_modes, cell.k_paddles, cell.ablated)] = cell
            ratio = full.mean / ablated.mean if ablated.mean > 0 else float('nan')
            rows.append((full.k_paddles, full.mean, full.std, ablated.mean, ablated.std, ratio))
            logger.info("K=%d: full %.3f, ablated %.3f (ratio %.2f)",
                        full.k_paddles, full.mean, ablated.mean, ratio)

        self._write_stats(stats)
        self._write_text(ABLATION_FILE, write_csv_text(ABLATION_HEADER, rows))
        self._write_extras(spec, stats, comparator_counts=None)

    def _run_modes(self):
        structure = self.structure
        profile = self._modes_profile()
        guided, loss_db = launch_coupling(profile)
        logger.info("V=%.4f, %d guided groups (%d spatial modes), s=%.4f um",
                    structure.normalized_frequency, structure.group_count,
                    structure.total_modes, structure.mode_scale)
        logger.info("Launch (%s): guided fraction %.4f, loss %.2f dB",
                    profile.source.value, guided, loss_db)

        self._write_text(MODES_FILE, write_csv_text(MODES_HEADER, mode_table(structure, profile)))

        if self.config.offset_scan_um:
            mfr = DEFAULT_SMF_MFR_UM
            excitation = self.config.excitation
            if excitation is not None and excitation.source == 'analytic_offset':
                mfr = excitation.smf_mfr_um
            rows = offset_loss_scan(self.fiber, mfr, self.config.offset_scan_um)
            self._write_text(OFFSET_SCAN_FILE, write_csv_text(OFFSET_SCAN_HEADER, rows))

    # ---- configuration -> domain objects ---------------------------------

    def _mode_specs(self) -> List[ModeSpec]:
        excitation = self.config.excitation
        if excitation.source == 'uniform_modes':
            try:
                return [ModeSpec.evenly_excited(n) for n in excitation.uniform_modes]
            except ValueError as e:
                raise ConfigError(f"'excitation.uniform_modes': {e}")
        return [ModeSpec.from_fiber(self.structure, self._fiber_profile())]

    def _fiber_profile(self) -> ExcitationProfile:
        """Per-group excitation over the fiber's guided groups."""
        excitation = self.config.excitation
        total = self.structure.group_count
        try:
            if excitation.source == 'analytic_offset':
                profile = offset_launch_weights(self.fiber, excitation.smf_mfr_um,
                                                excitation.offset_um)
                if excitation.group_range is not None:
                    profile = profile.restricted(*excitation.group_range)
            elif excitation.source == 'groups':
                profile = ExcitationProfile.from_weights(excitation.weights, total)
            else:
                profile = ExcitationProfile.from_csv(excitation.path, total)
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"'excitation.{excitation.source}': {e}")

        if not profile.excited_groups:
            raise ConfigError(f"'excitation.{excitation.source}' excites no guided group")
        return profile

    def _modes_profile(self) -> ExcitationProfile:
        excitation = self.config.excitation
        if excitation is None:
            return offset_launch_weights(self.fiber, DEFAULT_SMF_MFR_UM, DEFAULT_OFFSET_UM)
        if excitation.source == 'uniform_modes':
            spec = self._mode_specs()[0]
            groups = len(spec.group_sizes)
            if groups > self.structure.group_count:
                raise ConfigError(
                    f"'excitation.uniform_modes': N={spec.n_modes} needs {groups} groups; "
                    f"the fiber guides {self.structure.group_count}")
            return ExcitationProfile.uniform_first_groups(groups, self.structure.group_count)
        return self._fiber_profile()

    def _ensemble_config(self, spec: ModeSpec, paddles: Sequence[int]) -> EnsembleConfig:
        config = self.config
        try:
            optimizer = OptimizerOptions(
                termination_fraction=config.termination_fraction,
                max_cycles=config.max_cycles,
                grid_points=config.grid_points,
            )
            return EnsembleConfig(
                mode_spec=spec,
                paddle_counts=tuple(paddles),
                seed=config.seed,
                realizations=config.realizations,
                baseline_samples=config.baseline_samples,
                delta=config.delta_rad,
                optimizer=optimizer,
                initial_angles=config.initial_angles,
                target_m=config.target_speckle,
                input_mixing=config.input_mixing,
                keep_raw=config.raw_dump,
            )
        except ValueError as e:
            raise ConfigError(str(e))

    # ---- outputs ---------------------------------------------------------

    def _write_text(self, name: str, text: str):
        atomic_write_text(self.output_dir / name, text)
        self.written.append(name)
        logger.debug("Wrote %s", self.output_dir / name)

    def _write_stats(self, stats: EnsembleStats):
        cells = stats.sorted_cells()
        for cell in cells:
            if cell.monotone_violations:
                logger.warning("N=%d K=%d: %d realizations with a decreasing trajectory",
                               cell.n_modes, cell.k_paddles, cell.monotone_violations)

        if self.config.writes_csv:
            self._write_text(STATS_FILE, write_csv_text(STATS_HEADER, [_stats_row(c) for c in cells]))
        if self.config.writes_json:
            self._write_text(STATS_JSON_FILE, to_json_text(_stats_document(stats)))
        if self.config.raw_dump:
            lines = [json.dumps(record.as_dict(), sort_keys=True)
                     for cell in cells for record in cell.records]
            self._write_text(RAW_FILE, ''.join(line + '\n' for line in lines))

    def _write_extras(self, spec: ModeSpec, stats: EnsembleStats,
                      comparator_counts: Optional[Sequence[int]]):
        if self.config.dump_model:
            self._dump_first_realization(spec)
        if self.config.plot:
            from plotting import plot_enhancement
            plot_enhancement(stats, self.output_dir / PLOT_FILE, comparator_counts)
            self.written.append(PLOT_FILE)

    def _dump_first_realization(self, spec: ModeSpec):
        config = self.config
        n_paddles = config.paddles[0]
        model = build_model(spec.group_sizes, n_paddles, spec.excitation,
                            delta=config.delta_rad,
                            streams=StreamTree(config.seed).child(0),
                            input_mixing=config.input_mixing)
        metadata = {
            'tool': TOOL_NAME,
            'version': TOOL_VERSION,
            'config_hash': config_hash(config.source),
            'seed_path': [config.seed, 0],
            'n_modes': spec.n_modes,
            'k_paddles': n_paddles,
        }
        dump_model(model, self.output_dir / MODEL_DUMP_FILE, metadata)
        self.written.append(MODEL_DUMP_FILE)

    def _write_manifest(self, wall_time: float) -> Path:
        manifest = {
            'tool': TOOL_NAME,
            'version': TOOL_VERSION,
            'command': self.config.command,
            'config_hash': config_hash(self.config.source),
            'files': sorted(self.written),
            'wall_time_s': round(wall_time, 3),
        }
        path = self.output_dir / MANIFEST_FILE
        atomic_write_text(path, to_json_text(manifest))
        return path


def _stats_row(cell: CellStats) -> Tuple:
    return (cell.n_modes, cell.k_paddles, cell.mean, cell.std, cell.stderr,
            cell.count, cell.ablated)


def _stats_document(stats: EnsembleStats) -> dict:
    return {
        'cells': [
            {
                'n_modes': c.n_modes,
                'k_paddles': c.k_paddles,
                'mean_enh': c.mean,
                'std_enh': c.std,
                'stderr': c.stderr,
                'realizations': c.count,
                'excluded': c.excluded,
                'monotone_violations': c.monotone_violations,
                'ablated': c.ablated,
            }
            for c in stats.sorted_cells()
        ],
        'slopes': [
            {'n_modes': f.n_modes, 'k_min': f.k_min, 'k_max': f.k_max, 'slope': f.slope}
            for _, f in sorted(stats.slopes.items())
        ],
    }


def available_cpus() -> int:
    """CPUs this process may run on (affinity mask where the platform has one)."""
    if hasattr(os, 'sched_getaffinity'):
        return len(os.sched_getaffinity(0)) or 1
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description='Simulate fiber-paddle spatial light modulation in a multimode fiber.',
    )
    parser.add_argument('--config', required=True, help='JSON run configuration')
    parser.add_argument('--workers', type=int, default=available_cpus(),
                        help='worker processes (default: available CPUs)')
    parser.add_argument('--output', help='output directory (overrides output_dir)')
    parser.add_argument('--quiet', action='store_true', help='only log warnings and errors')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit status: 0 success, 2 configuration error, 3 runtime error
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    if args.workers < 1:
        print(f"error: --workers must be >= 1; got {args.workers}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        config = load_config(args.config)
        SimulatorCLI(config, args.workers, args.output).run()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logger.debug("Run failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    return EXIT_OK
