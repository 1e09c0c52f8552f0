import json

import numpy as np
import pytest

from app.models.convex_roof import ConvexRoofSearch
from app.models.linalg import plus_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def plus():
    return plus_state()


@pytest.fixture
def small_search():
    # Budget small enough for the unit suite; bounds only need to be valid
    return ConvexRoofSearch(restarts=4, max_evaluations=300, seed=7)


@pytest.fixture
def write_state(tmp_path):
    """Write a matrix in the [re, im] pair format and return the file path"""
    def _write(matrix, name="state.json", dim=None):
        m = np.asarray(matrix, dtype=complex)
        document = {
            "dim": m.shape[0] if dim is None else dim,
            "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in m],
        }
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return str(path)
    return _write

