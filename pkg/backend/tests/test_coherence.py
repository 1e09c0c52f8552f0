import numpy as np
import pytest
from scipy.optimize import minimize

from app.exceptions import DimensionMismatchError, ValidationError
from app.models.coherence import (
    build_cq_state,
    c_0,
    c_f,
    c_g,
    c_max,
    c_max_routes,
    c_min,
    c_min_routes,
    c_r,
    c_r_conditional,
    coherence_rank,
    compute_report,
    cq_state_via_isometry,
    dephase,
    dephasing_isometry,
    p_guess,
    p_secr,
    parse_measures,
    qubit_coherence_of_formation,
)
from app.models.entropies import ClassicalQuantumState, guessing_probability_binary, h_max_cond, h_min_cond
from app.models.linalg import (
    DensityMatrix,
    maximally_coherent_state,
    mixture,
    random_density_matrix,
    random_isometry,
    random_pure_state,
)


def _qubit(rho01, rho00=0.5):
    return DensityMatrix(np.array([[rho00, rho01], [np.conj(rho01), 1.0 - rho00]], dtype=complex))


def _random_incoherent(dim, rng):
    return DensityMatrix.from_diagonal(rng.dirichlet(np.ones(dim)))


def _qubit_decompositions(rho, theta, phi):
    # Two-element decompositions from G = R(theta) diag(1, e^{i phi}) applied to a square-root factor of rho
    values, vectors = np.linalg.eigh(rho.matrix)
    factor = vectors * np.sqrt(np.clip(values, 0.0, None))
    g0 = np.stack([np.cos(theta), np.sin(theta) * np.exp(1j * phi)], axis=-1)
    g1 = np.stack([-np.sin(theta), np.cos(theta) * np.exp(1j * phi)], axis=-1)
    return g0 @ factor.T, g1 @ factor.T


def _formation_objective(*vectors):
    total = 0.0
    for v in vectors:
        weight = np.sum(np.abs(v) ** 2, axis=-1)
        probs = np.abs(v) ** 2 / np.where(weight > 0, weight, 1.0)[..., None]
        logs = np.log2(np.where(probs > 0, probs, 1.0))
        total = total - weight * np.sum(probs * logs, axis=-1)
    return total


def _formation_brute_force(rho):
    theta, phi = np.meshgrid(np.linspace(0, np.pi, 201), np.linspace(0, 2 * np.pi, 201), indexing="ij")
    grid = _formation_objective(*_qubit_decompositions(rho, theta, phi))
    start = np.unravel_index(np.argmin(grid), grid.shape)

    def objective(params):
        return float(_formation_objective(*_qubit_decompositions(rho, params[0], params[1])))

    result = minimize(objective, [theta[start], phi[start]], method="Nelder-Mead",
                      options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
    return min(result.fun, float(grid.min()))


def _geometric_grid(rho):
    # 1 - max_t F(rho, diag(t, 1 - t)) with the qubit fidelity Tr(rho sigma) + 2 sqrt(det rho det sigma)
    t = np.linspace(0.0, 1.0, 100001)
    a, c = rho.matrix[0, 0].real, rho.matrix[1, 1].real
    det = max(0.0, float(np.linalg.det(rho.matrix).real))
    fid = a * t + c * (1.0 - t) + 2.0 * np.sqrt(det * t * (1.0 - t))
    return 1.0 - fid.max()


class TestDephasing:
    def test_dephase_keeps_diagonal(self, rng):
        rho = random_density_matrix(3, rng)
        np.testing.assert_allclose(dephase(rho).matrix, np.diag(np.diag(rho.matrix)), atol=1e-15)

    def test_isometry(self):
        v = dephasing_isometry(3)
        np.testing.assert_allclose(v.conj().T @ v, np.eye(3), atol=1e-15)
        assert v[4, 1] == 1.0

    def test_isometry_rejects_trivial_dimension(self):
        with pytest.raises(ValidationError):
            dephasing_isometry(1)

    def test_cq_state_routes_agree(self, rng):
        rho = random_density_matrix(3, rng)
        direct, literal = build_cq_state(rho), cq_state_via_isometry(rho)
        np.testing.assert_allclose(direct.probs, np.diag(rho.matrix).real, atol=1e-12)
        np.testing.assert_allclose(literal.probs, direct.probs, atol=1e-10)
        for a, b in zip(direct.conditional_states, literal.conditional_states):
            np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-9)


class TestRelativeEntropyOfCoherence:
    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_maximally_coherent(self, dim):
        assert c_r(maximally_coherent_state(dim)) == pytest.approx(np.log2(dim), abs=1e-10)

    def test_incoherent(self, rng):
        assert c_r(_random_incoherent(3, rng)) == 0.0

    def test_conditional_route(self, rng):
        for dim in (2, 3, 4):
            rho = random_density_matrix(dim, rng)
            assert c_r_conditional(rho) == pytest.approx(c_r(rho), abs=1e-9)


class TestMinMaxCoherence:
    """C_min, C_g and C_max along both routes"""

    def test_plus_state(self, plus):
        assert c_min(plus) == pytest.approx(1.0, abs=1e-7)
        assert c_g(plus) == pytest.approx(0.5, abs=1e-7)
        assert c_max(plus) == pytest.approx(1.0, abs=1e-7)

    def test_maximally_coherent_qutrit(self):
        rho = maximally_coherent_state(3)
        for route in ("direct", "conditional"):
            assert c_min(rho, route=route) == pytest.approx(np.log2(3), abs=1e-6)
            assert c_max(rho, route=route) == pytest.approx(np.log2(3), abs=1e-6)

    def test_incoherent_states(self, rng):
        for _ in range(5):
            rho = _random_incoherent(3, rng)
            assert c_min(rho) == 0.0
            assert c_max(rho) == 0.0
            assert h_min_cond(build_cq_state(rho)) == pytest.approx(0.0, abs=1e-7)

    def test_coherent_states_are_positive(self, rng):
        for _ in range(5):
            rho = random_density_matrix(3, rng)
            assert rho.off_diagonal_mass() > 1e-3
            assert c_min(rho) > 1e-6

    @pytest.mark.parametrize("dim", [2, 3])
    def test_routes_agree(self, dim, rng):
        for _ in range(3):
            rho = random_density_matrix(dim, rng)
            assert c_min_routes(rho).disagreement <= 1e-6
            assert c_max_routes(rho).disagreement <= 1e-6

    @pytest.mark.slow
    def test_routes_agree_many(self, rng):
        for _ in range(200):
            dim = int(rng.integers(2, 5))
            rank = int(rng.integers(1, dim + 1))
            rho = random_density_matrix(dim, rng, rank=rank)
            assert c_min_routes(rho).disagreement <= 1e-6
            assert c_max_routes(rho).disagreement <= 1e-6

    def test_c_min_matches_trace_norm_guessing(self, rng):
        for _ in range(10):
            rho = random_density_matrix(2, rng)
            expected = -np.log2(guessing_probability_binary(build_cq_state(rho)))
            assert c_min(rho) == pytest.approx(expected, abs=1e-7)

    @pytest.mark.slow
    def test_qubit_oracles_many(self, rng):
        for _ in range(200):
            rho = random_density_matrix(2, rng)
            expected = -np.log2(guessing_probability_binary(build_cq_state(rho)))
            assert c_min(rho) == pytest.approx(expected, abs=1e-7)
            assert c_g(rho) == pytest.approx(_geometric_grid(rho), abs=1e-4)

    def test_c_g_matches_grid(self, rng):
        for _ in range(10):
            rho = random_density_matrix(2, rng)
            assert c_g(rho) == pytest.approx(_geometric_grid(rho), abs=1e-4)

    def test_ordering(self, rng):
        for _ in range(5):
            rho = random_density_matrix(3, rng)
            assert c_g(rho) <= c_min(rho) + 1e-7
            assert c_min(rho) <= c_r(rho) + 1e-7
            assert c_r(rho) <= c_max(rho) + 1e-7

    def test_convexity(self, rng):
        for _ in range(3):
            rho1, rho2 = random_density_matrix(3, rng), random_density_matrix(3, rng)
            p = float(rng.uniform())
            mixed = mixture([p, 1 - p], [rho1, rho2])
            assert c_min(mixed) <= p * c_min(rho1) + (1 - p) * c_min(rho2) + 1e-7

    @pytest.mark.slow
    def test_convexity_many(self, rng):
        for _ in range(200):
            rho1, rho2 = random_density_matrix(3, rng), random_density_matrix(3, rng)
            p = float(rng.uniform())
            mixed = mixture([p, 1 - p], [rho1, rho2])
            assert c_min(mixed) <= p * c_min(rho1) + (1 - p) * c_min(rho2) + 1e-7

    def test_dephasing_removes_coherence(self, rng):
        rho = random_density_matrix(3, rng)
        report = compute_report(dephase(rho), ["cr", "cmin", "cmax", "cg"])
        assert report.c_r == report.c_min == report.c_max == report.c_g == 0.0

    def test_independent_of_purification(self, rng):
        for _ in range(3):
            rho = random_density_matrix(2, rng)
            w = random_isometry(3, 2, rng)
            base, lifted = build_cq_state(rho), build_cq_state(rho, environment_isometry=w)
            assert h_min_cond(lifted) == pytest.approx(h_min_cond(base), abs=1e-6)
            assert h_max_cond(lifted) == pytest.approx(h_max_cond(base), abs=1e-6)

    def test_unknown_route(self, plus):
        with pytest.raises(ValueError):
            c_min(plus, route="shortcut")


class TestConvexRoofMeasures:
    """C_f and C_0"""

    def test_pure_state_formation(self, rng):
        psi = random_pure_state(3, rng)
        value = c_f(DensityMatrix.from_pure(psi))
        probs = np.abs(psi) ** 2
        assert value.exact
        assert value.value == pytest.approx(-np.sum(probs * np.log2(probs)), abs=1e-9)

    def test_maximally_coherent_c0(self):
        value = c_0(maximally_coherent_state(3))
        assert value.exact
        assert value.value == pytest.approx(np.log2(3), abs=1e-12)

    def test_incoherent(self, rng):
        rho = _random_incoherent(3, rng)
        assert c_f(rho).value == 0.0 and c_f(rho).exact
        assert c_0(rho).value == 0.0 and c_0(rho).exact

    def test_qubit_formation_closed_form(self):
        assert c_f(_qubit(0.5)).value == pytest.approx(1.0, abs=1e-12)
        assert c_f(_qubit(0.3)).value == pytest.approx(qubit_coherence_of_formation(_qubit(0.3)), abs=1e-15)

    def test_qubit_formation_matches_brute_force(self, rng):
        for _ in range(10):
            rho = random_density_matrix(2, rng)
            assert c_f(rho).value == pytest.approx(_formation_brute_force(rho), abs=1e-5)

    @pytest.mark.slow
    def test_qubit_formation_matches_brute_force_many(self, rng):
        for _ in range(100):
            rho = random_density_matrix(2, rng)
            assert c_f(rho).value == pytest.approx(_formation_brute_force(rho), abs=1e-5)

    def test_qubit_c0_dichotomy(self, rng):
        rho = random_density_matrix(2, rng)
        assert c_0(rho).value == 1.0
        assert c_0(_qubit(0.1)).value == 1.0
        assert c_0(_random_incoherent(2, rng)).value == 0.0
        # No two-element decomposition of a coherent qubit consists of incoherent states
        theta, phi = np.meshgrid(np.linspace(0, np.pi, 61), np.linspace(0, 2 * np.pi, 61), indexing="ij")
        for v in _qubit_decompositions(rho, theta, phi):
            weight = np.sum(np.abs(v) ** 2, axis=-1)
            amplitudes = np.abs(v) / np.sqrt(weight)[..., None]
            assert np.all(np.sum(amplitudes > 1e-8, axis=-1) == 2)

    @pytest.mark.slow
    def test_qubit_c0_dichotomy_many(self, rng):
        theta, phi = np.meshgrid(np.linspace(0, np.pi, 61), np.linspace(0, 2 * np.pi, 61), indexing="ij")
        for _ in range(100):
            rho = random_density_matrix(2, rng)
            assert c_0(rho).value == 1.0
            assert c_0(dephase(rho)).value == 0.0
            for v in _qubit_decompositions(rho, theta, phi):
                weight = np.sum(np.abs(v) ** 2, axis=-1)
                amplitudes = np.abs(v) / np.sqrt(weight)[..., None]
                assert np.all(np.sum(amplitudes > 1e-8, axis=-1) == 2)

    def test_c0_of_overlapping_pairs(self, small_search):
        pair_01 = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        pair_12 = np.array([0.0, 1.0, 1.0]) / np.sqrt(2)
        rho = DensityMatrix(0.5 * np.outer(pair_01, pair_01) + 0.5 * np.outer(pair_12, pair_12))
        value = c_0(rho, small_search)
        assert not value.exact
        assert value.value == pytest.approx(1.0)
        formation = c_f(rho, small_search).value
        assert c_r(rho) <= formation + 1e-7
        assert formation <= value.value + 1e-12
        assert c_max(rho) <= value.value + 1e-6

    def test_qubit_formula_rejects_qutrit(self):
        with pytest.raises(DimensionMismatchError):
            qubit_coherence_of_formation(maximally_coherent_state(3))

    def test_coherence_rank(self):
        assert coherence_rank([1, 0, 0]) == 1
        assert coherence_rank([1, 1, 0]) == 2
        assert coherence_rank([1, 1e-10, 1]) == 2

    def test_bound_chain(self, rng, small_search):
        for _ in range(2):
            rho = random_density_matrix(3, rng)
            cf, c0 = c_f(rho, small_search), c_0(rho, small_search)
            assert not cf.exact
            assert c_g(rho) <= c_min(rho) + 1e-7
            assert c_r(rho) <= cf.value + 1e-7
            assert cf.value <= c0.value + 1e-7
            assert c_max(rho) <= c0.value + 1e-7
            assert c0.value <= np.log2(3) + 1e-12


    @pytest.mark.slow
    def test_bound_chain_many(self, rng, small_search):
        for _ in range(500):
            dim = int(rng.integers(2, 5))
            rho = random_density_matrix(dim, rng, rank=int(rng.integers(1, dim + 1)))
            report = compute_report(rho, allow_heuristic=True, search=small_search)
            assert report.c_g <= report.c_min + 1e-6
            assert report.c_min <= report.c_r + 1e-6
            assert report.c_r <= report.c_max + 1e-6
            assert report.c_max <= report.c_0.value + 1e-6
            assert report.c_r <= report.c_f.value + 1e-6
            assert report.c_f.value <= report.c_0.value + 1e-6


class TestOperationalQuantities:
    def test_p_guess_examples(self, rng):
        trivial = DensityMatrix(np.ones((1, 1)))
        assert p_guess(ClassicalQuantumState([1.0, 0.0], (trivial, trivial))) == pytest.approx(1.0, abs=1e-7)
        rho_e = random_density_matrix(2, rng)
        assert p_guess(ClassicalQuantumState([0.5, 0.5], (rho_e, rho_e))) == pytest.approx(0.5, abs=1e-7)
        assert p_guess(build_cq_state(DensityMatrix.maximally_mixed(2))) == pytest.approx(1.0, abs=1e-7)

    def test_p_secr_examples(self, rng):
        trivial = DensityMatrix(np.ones((1, 1)))
        assert np.log2(p_secr(ClassicalQuantumState([0.5, 0.5], (trivial, trivial)))) == pytest.approx(1.0, abs=1e-7)
        assert np.log2(p_secr(ClassicalQuantumState([1.0, 0.0], (trivial, trivial)))) == pytest.approx(0.0, abs=1e-7)
        rho = random_density_matrix(2, rng)
        assert np.log2(p_secr(build_cq_state(rho))) == pytest.approx(c_max(rho), abs=1e-6)


class TestComputeReport:
    def test_plus_state_report(self, plus):
        report = compute_report(plus)
        assert report.c_r == pytest.approx(1.0)
        assert report.c_min == pytest.approx(1.0, abs=1e-7)
        assert report.c_g == pytest.approx(0.5, abs=1e-7)
        assert report.c_max == pytest.approx(1.0, abs=1e-7)
        assert report.c_f.value == pytest.approx(1.0) and report.c_f.exact
        assert report.c_0.value == 1.0
        assert not report.flagged
        data = report.to_dict()
        assert data["routes"]["c_min"]["conditional"] == pytest.approx(1.0, abs=1e-6)
        assert data["solver_diagnostics"]["c_max"]["direct"]["status"] == "Optimal"

    def test_measure_selection(self, plus):
        report = compute_report(plus, ["cg"])
        assert report.c_g == pytest.approx(0.5, abs=1e-7)
        assert report.c_min is None and report.c_r is None

    def test_unknown_measure(self):
        with pytest.raises(ValidationError):
            parse_measures(["cr", "negativity"])

    def test_heuristics_need_permission(self, rng, small_search):
        rho = random_density_matrix(3, rng)
        with pytest.raises(ValidationError):
            compute_report(rho, ["cf"])
        report = compute_report(rho, ["cf", "c0"], allow_heuristic=True, search=small_search)
        assert not report.c_f.exact
        assert report.c_f.value <= report.c_0.value + 1e-7
        assert report.solver_diagnostics["convex_roof"]["restarts"] == small_search.restarts

    def test_heuristics_not_needed_for_incoherent_states(self, rng):
        report = compute_report(_random_incoherent(3, rng), ["cf", "c0"])
        assert report.c_f.value == 0.0 and report.c_f.exact
