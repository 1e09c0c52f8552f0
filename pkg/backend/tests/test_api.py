import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.api.routes import get_processor
from app.main import app
from app.models import sdp
from app.models.convex_roof import ConvexRoofSearch
from app.utils.processor import CoherenceProcessor

client = TestClient(app)


def _state(matrix):
    m = np.asarray(matrix, dtype=complex)
    return {"dim": m.shape[0], "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in m]}


def _stalled_solve(problem, options=None):
    return sdp.InteriorPointSolver(problem, sdp.SolverOptions(max_iter=0)).run()


@pytest.fixture
def shared_processor():
    processor = CoherenceProcessor(search=ConvexRoofSearch(restarts=2, max_evaluations=200, seed=3))
    app.dependency_overrides[get_processor] = lambda: processor
    yield processor
    app.dependency_overrides.clear()


def test_root():
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "running"


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_system_info():
    response = client.get("/api/system-info")
    assert response.status_code == 200
    data = response.json()
    assert data["solver"]["tol"] == pytest.approx(1e-8)
    assert data["max_dim"] >= 2


class TestCompute:
    """POST /api/compute"""

    def test_plus_state(self):
        response = client.post("/api/compute", json={"state": _state(np.full((2, 2), 0.5)), "measures": ["cr", "cmax"]})
        assert response.status_code == 200
        data = response.json()
        assert data["c_r"] == pytest.approx(1.0)
        assert data["c_max"] == pytest.approx(1.0, abs=1e-7)
        assert data["c_min"] is None
        assert data["flagged"] is False

    def test_non_hermitian_state(self):
        response = client.post("/api/compute", json={"state": _state([[0.5, 0.3], [0.1, 0.5]])})
        assert response.status_code == 422
        assert "(0, 1)" in response.json()["detail"]

    def test_malformed_state(self):
        response = client.post("/api/compute", json={"state": {"dim": 2, "matrix": [[[0.5, 0.0]]]}})
        assert response.status_code == 422

    def test_unknown_measure(self):
        response = client.post("/api/compute", json={"state": _state(np.eye(2) / 2), "measures": ["negativity"]})
        assert response.status_code == 422

    def test_heuristics_need_permission(self):
        state = _state(np.full((3, 3), 0.3) + np.eye(3) * 0.1 / 3)
        response = client.post("/api/compute", json={"state": state, "measures": ["cf"]})
        assert response.status_code == 422

    def test_dimension_limit(self):
        response = client.post("/api/compute", json={"state": _state(np.eye(32) / 32)})
        assert response.status_code == 422

    def test_solver_failure(self, monkeypatch):
        monkeypatch.setattr(sdp, "solve", _stalled_solve)
        response = client.post("/api/compute", json={"state": _state(np.full((2, 2), 0.5)), "measures": ["cmin"]})
        assert response.status_code == 500
        assert "MaxIterations" in response.json()["detail"]

    def test_heuristics_use_shared_processor(self, shared_processor):
        state = _state(np.full((3, 3), 0.3) + np.eye(3) * 0.1 / 3)
        response = client.post("/api/compute", json={"state": state, "measures": ["cf", "c0"], "allow_heuristic": True})
        assert response.status_code == 200
        data = response.json()
        assert data["c_f"]["exact"] is False
        assert data["c_f"]["value"] <= data["c_0"]["value"] + 1e-12


class TestSweep:
    """POST /api/sweep"""

    def test_plus_mix(self):
        response = client.post("/api/sweep", json={"family": "plus-mix", "nu_steps": 2})
        assert response.status_code == 200
        data = response.json()
        assert data["columns"] == ["nu", "c_max", "c_r", "c_min", "c_g", "route_disagreement"]
        assert data["rows"][1]["c_min"] == pytest.approx(1.0, abs=1e-7)

    def test_bloch_grid(self):
        response = client.post("/api/sweep", json={"family": "bloch-grid", "beta_steps": 2, "gamma_steps": 2})
        assert response.status_code == 200
        assert len(response.json()["rows"]) == 4

    def test_custom_file_rejected(self):
        response = client.post("/api/sweep", json={"family": "custom-file", "state_path": "rho.json"})
        assert response.status_code == 400

    def test_invalid_steps(self):
        response = client.post("/api/sweep", json={"family": "plus-mix", "nu_steps": 1})
        assert response.status_code == 422
