"""
Binary dumps of single realizations for reproducibility audits.

A dump holds every matrix of an FslmModel together with JSON metadata (seed
path, config hash, tool version) in one compressed .npz archive.
"""

import io
import json
import threading
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from file_operations import atomic_write_bytes
from model import FslmModel, Section, _frozen


_write_lock = threading.Lock()


def dump_model(model: FslmModel, file_path: Union[str, Path], metadata: Dict[str, Any]):
    """
    Save a realization.

    Args:
        model: Realization to save
        file_path: Target .npz path
        metadata: JSON-compatible audit data

    Raises:
        OSError: If the dump cannot be written
    """
    dim = model.n_channels
    coupling_in = np.array([s.coupling_in for s in model.sections]).reshape(-1, dim, dim)
    coupling_out = np.array([s.coupling_out for s in model.sections]).reshape(-1, dim, dim)

    buffer = io.BytesIO()
    np.savez_compressed(
        buffer,
        group_sizes=np.array(model.group_sizes, dtype=np.int64),
        coupling_in=coupling_in,
        coupling_out=coupling_out,
        input_coupling=model.input_coupling,
        output_basis=model.output_basis,
        input_field=model.input_field,
        delta=np.array(model.delta),
        ablated=np.array(model.ablated),
        metadata=np.array(json.dumps(metadata, sort_keys=True)),
    )
    with _write_lock:
        atomic_write_bytes(file_path, buffer.getvalue())


def load_model(file_path: Union[str, Path]) -> Tuple[FslmModel, Dict[str, Any]]:
    """
    Load a realization saved by dump_model.

    Args:
        file_path: Path to the .npz archive

    Returns:
        Tuple of (model, metadata)
    """
    with np.load(file_path, allow_pickle=False) as archive:
        sections = tuple(Section(_frozen(first), _frozen(second))
                         for first, second in zip(archive['coupling_in'], archive['coupling_out']))
        model = FslmModel(
            group_sizes=tuple(int(n) for n in archive['group_sizes']),
            sections=sections,
            input_coupling=_frozen(archive['input_coupling']),
            output_basis=_frozen(archive['output_basis']),
            input_field=_frozen(archive['input_field']),
            delta=float(archive['delta']),
            ablated=bool(archive['ablated']),
        )
        metadata = json.loads(str(archive['metadata']))
    return model, metadata
