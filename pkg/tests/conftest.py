import sys
from pathlib import Path

import pytest

import fraclap

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
ELL = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]


def build_mesh(kind, n):
    if kind == "circle":
        return fraclap.mesh_circle(n)
    if kind == "square":
        return fraclap.mesh_polygon(SQUARE, n)
    if kind == "ell":
        return fraclap.mesh_polygon(ELL, n)
    raise ValueError(kind)


@pytest.fixture(scope="session")
def fleet():
    """Session-wide cache of assembled matrices keyed by (kind, N, s)."""
    cache = {}

    def get(kind, n, s):
        key = (kind, n, s)
        if key not in cache:
            mesh = build_mesh(kind, n)
            cache[key] = (mesh, fraclap.assemble(mesh, fraclap.FracParams(s)))
        return cache[key]

    return get
