"""JSON/CSV serialization for bases, signatures, certificates and reports.

Floats are rounded to 12 significant digits before serialization so that
reports are byte-identical across runs and thread counts (library results
are stable well past that precision).
"""

from __future__ import annotations

import json

import numpy as np

REPORT_SCHEMA = "walkdist.report/1"
BASIS_SCHEMA = "walkdist.basis/1"
SIGNATURE_SCHEMA = "walkdist.signature/1"
FLOAT_DIGITS = 12


def round_float(x: float) -> float:
    return float(f"{float(x):.{FLOAT_DIGITS}g}")


def jround(obj):
    """Recursively round floats and convert numpy scalars/arrays."""
    if isinstance(obj, dict):
        return {k: jround(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jround(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jround(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return round_float(float(obj))
    if isinstance(obj, complex) or isinstance(obj, np.complexfloating):
        return [round_float(obj.real), round_float(obj.imag)]
    if isinstance(obj, float):
        return round_float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_json(doc) -> str:
    return json.dumps(jround(doc), separators=(",", ":")) + "\n"


def basis_to_json(basis) -> dict:
    """CellularBasis as a portable document: supports as sorted coordinate
    lists, the structure tensor as sparse (t,r,s,value) quadruples, cells as
    sorted vertex lists."""
    supports = []
    for r in range(basis.size):
        coords = np.argwhere(basis.color == r)
        supports.append(coords.tolist())
    return {
        "schema": BASIS_SCHEMA,
        "points": basis.point_count,
        "relation_count": basis.size,
        "relations": [
            {"id": r, "support": supports[r]} for r in range(basis.size)
        ],
        "structure": basis.structure.tolist(),
        "cells": [cell.tolist() for cell in basis.cells],
        "diag_ids": list(basis.diag_ids),
        "adjoint": basis.adjoint.tolist(),
        "traces": basis.traces.tolist(),
        "sizes": basis.sizes.tolist(),
    }


def basis_summary(basis) -> dict:
    return {
        "points": basis.point_count,
        "relation_count": basis.size,
        "cell_sizes": sorted(len(c) for c in basis.cells),
        "diag_ids": list(basis.diag_ids),
    }


def signature_to_json(sig) -> dict:
    doc = {
        "schema": SIGNATURE_SCHEMA,
        "time": sig.time,
        "tol": sig.tol,
        "source_dim": sig.source_dim,
        "values": [[v.real, v.imag, m] for v, m in sig.values],
    }
    if sig.relation_decomposition is not None:
        doc["relation_decomposition"] = [
            [row.relation, row.x.real, row.x.imag, row.m, row.residual]
            for row in sig.relation_decomposition
        ]
    return doc


def bijection_to_json(cert) -> dict:
    return {
        "relation_count": cert.source.size,
        "map": cert.map.tolist(),
        "traces_preserved": bool(np.array_equal(cert.source.traces,
                                                cert.target.traces[cert.map])),
        "cell_sizes": sorted(len(c) for c in cert.source.cells),
    }


def _finite_or_none(x):
    return x if x is not None and np.isfinite(x) else None


def verdict_to_json(verdict) -> dict:
    return {
        "distinguished": verdict.distinguished,
        "witness_time": verdict.witness_time,
        "max_deviation": _finite_or_none(verdict.max_deviation),
        "per_time": [[t, _finite_or_none(d)] for t, d in verdict.per_time],
        "reason": verdict.reason,
    }
