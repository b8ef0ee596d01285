#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Utility Functions Module
File output for runs: CSV tables, JSON documents with a meta block, SVG
plots of oscillation traces and barrier sweeps, and the configuration hash.

Outputs carry no timestamps, so identical inputs give identical files.
"""

import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .report import to_plain

logger = logging.getLogger(__name__)

# Optional plotting support
try:
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    HAS_MATPLOTLIB = True
except ImportError:
    HAS_MATPLOTLIB = False


def config_hash(config: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON of a configuration."""
    canonical = json.dumps(to_plain(config), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode()).hexdigest()


def meta_block(version: str, config: Dict[str, Any], seed: int) -> Dict[str, Any]:
    return {'version': version, 'config_hash': config_hash(config), 'seed': seed}


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return '%.17g' % float(value)
    return '' if value is None else str(value)


def write_csv(filename: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
              meta: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a comma-separated table with a header row and %.17g numerics.

    Args:
        filename: Output path
        header: Column names
        rows: Table rows
        meta: Optional meta block, written as leading '# key=value' lines

    Returns:
        The path written
    """
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        if meta:
            for key, value in meta.items():
                f.write(f"# {key}={value}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    logger.info("Wrote %s", path)
    return path


def write_field_csv(filename: str, field, meta: Optional[Dict[str, Any]] = None) -> Path:
    """Write a Field as rows (x..., u) over every grid node."""
    names = ['x', 'y'][:field.grid.dim]
    rows = (list(node) + [value] for node, value in zip(field.grid.nodes, field.values))
    return write_csv(filename, names + ['u'], rows, meta)


def write_json(filename: str, data: Dict[str, Any], meta: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a JSON document with indent 2; the meta block is appended last.

    Returns:
        The path written
    """
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = dict(to_plain(data))
    if meta is not None:
        document['meta'] = to_plain(meta)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, ensure_ascii=False)
        f.write('\n')
    logger.info("Wrote %s", path)
    return path


def _svg_figure():
    plt.rcParams['svg.hashsalt'] = 'fracreg'
    return plt.subplots(figsize=(5.0, 4.0))


def _save_svg(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path


def plot_oscillation(filename: str, trace: Dict[str, Any], title: str = '') -> Optional[Path]:
    """
    Log-log plot of the dyadic oscillations of one anchor with the fitted
    line C·r^α.

    Returns:
        The path written, or None when matplotlib is missing or no level
        has a positive oscillation
    """
    if not HAS_MATPLOTLIB:
        logger.warning("matplotlib not installed; skipping %s", filename)
        return None
    radii = [r for r, o in zip(trace.get('radii', []), trace.get('osc', []))
             if o is not None and math.isfinite(o) and o > 0.0]
    osc = [o for o in trace.get('osc', []) if o is not None and math.isfinite(o) and o > 0.0]
    if not osc:
        return None
    fig, ax = _svg_figure()
    ax.loglog(radii, osc, 'o', label='osc')
    if trace.get('alpha') is not None:
        r = np.array(radii)
        ax.loglog(r, trace['C'] * r ** trace['alpha'], '-',
                  label=f"fit α = {trace['alpha']:.3f}")
    ax.set_xlabel('r')
    ax.set_ylabel('osc u/d^s')
    if title:
        ax.set_title(title)
    ax.legend()
    return _save_svg(fig, Path(filename))


def plot_sweep(filename: str, rows: List[Dict[str, Any]],
               rows_refined: Optional[List[Dict[str, Any]]] = None) -> Optional[Path]:
    """Plot K(λ) of a barrier sweep, with the refined sweep when given."""
    if not HAS_MATPLOTLIB:
        logger.warning("matplotlib not installed; skipping %s", filename)
        return None
    fig, ax = _svg_figure()
    ax.plot([r['lambda'] for r in rows], [r['K'] for r in rows], 'o-', label='h')
    if rows_refined:
        ax.plot([r['lambda'] for r in rows_refined], [r['K'] for r in rows_refined], 's--',
                label='h/2')
    ax.set_xlabel('λ')
    ax.set_ylabel('K(λ)')
    ax.legend()
    return _save_svg(fig, Path(filename))
