"""
Enhancement-versus-paddles figure.

Draws one curve per mode count with a ±1 standard deviation band, ablated
cells dashed, and optionally the LC-SLM reference line. Rendering uses the
non-interactive Agg backend; the PNG is written atomically.
"""

import io
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ensemble import EnsembleStats, lcslm_comparator
from file_operations import atomic_write_bytes


logger = logging.getLogger(__name__)


def plot_enhancement(stats: EnsembleStats, file_path: Union[str, Path],
                     comparator_counts: Optional[Iterable[int]] = None):
    """
    Save a plot of mean enhancement against paddle count.

    Args:
        stats: Ensemble statistics
        file_path: Target PNG path
        comparator_counts: Macropixel counts for the LC-SLM line (omitted if None)
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        keys = sorted({(cell.n_modes, cell.ablated) for cell in stats.cells.values()})
        for n_modes, ablated in keys:
            series = [c for c in stats.series(n_modes, ablated) if c.count > 0]
            if not series:
                continue
            k = np.array([c.k_paddles for c in series])
            mean = np.array([c.mean for c in series])
            std = np.array([c.std for c in series])
            label = f"N={n_modes}" + (" (no spatial coupling)" if ablated else "")
            line, = ax.plot(k, mean, marker='o', linestyle='--' if ablated else '-', label=label)
            ax.fill_between(k, mean - std, mean + std, color=line.get_color(), alpha=0.2)

        if comparator_counts is not None:
            rows = lcslm_comparator(comparator_counts)
            ax.plot([r[0] for r in rows], [r[1] for r in rows], color='gray',
                    linestyle=':', label='LC-SLM, phase only')

        ax.set_xlabel('Paddles K')
        ax.set_ylabel('Enhancement')
        ax.grid(True, alpha=0.3)
        ax.legend(loc='upper left', fontsize='small')

        buffer = io.BytesIO()
        fig.savefig(buffer, format='png', dpi=150, bbox_inches='tight',
                    metadata={'Software': None})
    finally:
        plt.close(fig)

    atomic_write_bytes(file_path, buffer.getvalue())
    logger.info("Wrote %s", file_path)
