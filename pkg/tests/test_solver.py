"""Tests for the temporal factorization and the block-triangular fast solver."""

import numpy as np
import pytest
import scipy.linalg

from bihwave.analysis import manufactured_case
from bihwave.errors import FactorizationError
from bihwave.solver import (
    factorize_temporal,
    flops_model,
    solve,
    solve_dense_oracle,
    solve_system,
)
from bihwave.system import DiscretizationConfig, apply_operator, build_system


def system_for(d=1, p=2, n_space=8, n_time=4, mode="iga_penalty", **kwargs):
    case = manufactured_case("line1d" if d == 1 else "square2d")
    return build_system(
        DiscretizationConfig(
            d=d,
            p_space=p,
            p_time=kwargs.pop("p_time", p),
            n_elements_space=n_space,
            n_elements_time=n_time,
            mode=mode,
            forcing=case.forcing,
            **kwargs,
        )
    )


class TestFactorization:
    def test_scalar_pencil(self):
        K = np.array([[2.0]])
        W = np.array([[3.0]])
        fact = factorize_temporal(K, W)
        assert fact.B_t[0, 0] == pytest.approx(1.5)

    def test_reconstruction_residuals_random_pencil(self):
        rng = np.random.default_rng(0)
        K = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        W = rng.standard_normal((4, 4))
        fact = factorize_temporal(K, W)
        res_K = np.linalg.norm(fact.C_t @ K @ fact.D_t - fact.E_t)
        res_W = np.linalg.norm(fact.C_t @ W @ fact.D_t - fact.F_t)
        assert res_K <= 1e-11 * np.linalg.norm(K)
        assert res_W <= 1e-11 * max(np.linalg.norm(W), 1.0)

    def test_unitarity(self):
        system = system_for(n_time=8)
        fact = factorize_temporal(system.temporal.K_t, system.temporal.stabilized_mass)
        n = fact.n_t
        for X in (fact.C_t, fact.D_t):
            assert np.linalg.norm(X.conj().T @ X - np.eye(n)) <= 1e-11

    def test_triangular_factors(self):
        system = system_for(n_time=6)
        fact = factorize_temporal(system.temporal.K_t, system.temporal.stabilized_mass)
        assert np.all(np.tril(fact.B_t, -1) == 0.0)
        assert np.linalg.norm(np.tril(fact.E_t, -1)) == 0.0
        assert np.linalg.norm(np.tril(fact.F_t, -1)) == 0.0

    def test_eigenvalues_match_generalized_pencil(self):
        system = system_for(n_time=6)
        K = system.temporal.K_t
        W = system.temporal.stabilized_mass
        fact = factorize_temporal(K, W)
        mine = np.diag(fact.B_t)
        reference = list(scipy.linalg.eigvals(W, K))
        tol = 1e-9 * max(abs(v) for v in reference)
        # diag(B_t) equals the pencil spectrum up to reordering
        for value in mine:
            distances = [abs(value - r) for r in reference]
            nearest = int(np.argmin(distances))
            assert distances[nearest] <= tol
            reference.pop(nearest)

    def test_singular_stiffness_rejected(self):
        K = np.zeros((3, 3))
        W = np.eye(3)
        with pytest.raises(FactorizationError, match="singular"):
            factorize_temporal(K, W)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="square"):
            factorize_temporal(np.eye(3), np.eye(4))


class TestSolve:
    def test_single_block_equals_spatial_solve(self):
        system = system_for(p_time=1, n_time=1, mode="none")
        assert system.n_t == 1
        report = solve(system)
        w = system.temporal.stabilized_mass[0, 0]
        k = system.temporal.K_t[0, 0]
        A = w * system.spatial.K_x.toarray() - k * system.spatial.M_x.toarray()
        expected = np.linalg.solve(A, system.rhs)
        np.testing.assert_allclose(report.solution, expected, atol=1e-12)

    def test_matches_dense_oracle_small(self):
        system = system_for()
        assert system.n_dof == 30
        report = solve(system)
        reference = solve_dense_oracle(system)
        err = np.linalg.norm(report.solution - reference, np.inf)
        assert err <= 1e-8 * np.linalg.norm(reference, np.inf)

    def test_residual_2d_example_mesh(self):
        system = system_for(d=2, p=2, n_space=8, n_time=8)
        report = solve(system)
        assert report.relative_residual <= 1e-10

    def test_imaginary_discard_small(self):
        for mode in ("none", "iga_penalty", "fem_projection"):
            system = system_for(mode=mode, n_space=6, n_time=5)
            report = solve(system)
            assert report.imag_discard_norm <= 1e-8

    def test_random_cross_checks(self):
        rng = np.random.default_rng(42)
        for trial in range(10):
            d = int(rng.integers(1, 3))
            p = int(rng.integers(2, 4))
            mode = ("none", "iga_penalty", "fem_projection")[trial % 3]
            n_space = int(rng.integers(4, 8)) if d == 1 else int(rng.integers(3, 5))
            n_time = int(rng.integers(2, 6))
            system = system_for(d=d, p=p, n_space=n_space, n_time=n_time, mode=mode)
            report = solve(system)
            reference = solve_dense_oracle(system)
            scale = np.linalg.norm(reference, np.inf)
            assert np.linalg.norm(report.solution - reference, np.inf) <= 1e-8 * scale
            assert report.relative_residual <= 1e-9

    def test_factorization_reuse(self):
        system = system_for()
        fact = factorize_temporal(system.temporal.K_t, system.temporal.stabilized_mass)
        r1 = solve(system, fact)
        r2 = solve(system)
        np.testing.assert_allclose(r1.solution, r2.solution, atol=1e-14)

    def test_wrong_factorization_size(self):
        system = system_for()
        other = system_for(n_time=6)
        fact = factorize_temporal(other.temporal.K_t, other.temporal.stabilized_mass)
        with pytest.raises(ValueError, match="does not match"):
            solve(system, fact)


class TestDenseOracle:
    def test_own_residual(self):
        system = system_for(n_space=6, n_time=4)
        x = solve_dense_oracle(system)
        res = np.linalg.norm(apply_operator(system, x) - system.rhs)
        assert res <= 1e-12 * np.linalg.norm(system.rhs)

    def test_trivial_single_dof(self):
        system = system_for(p=2, n_space=2, n_time=1, p_time=1,
                            regularity_space=0, mode="none")
        assert system.n_dof == 1
        x = solve_dense_oracle(system)
        A = (
            system.temporal.stabilized_mass[0, 0] * system.spatial.K_x.toarray()
            - system.temporal.K_t[0, 0] * system.spatial.M_x.toarray()
        )
        assert x[0] == pytest.approx(system.rhs[0] / A[0, 0])

    def test_size_cap(self):
        system = system_for()
        with pytest.raises(ValueError, match="cap"):
            solve_dense_oracle(system, max_dof=3)


class TestSolveSystem:
    def test_dense_fallback_on_singular_pencil(self, monkeypatch):
        system = system_for(n_space=6, n_time=4)

        def always_fail(*args, **kwargs):
            raise FactorizationError("forced")

        monkeypatch.setattr("bihwave.solver.factorize_temporal", always_fail)
        report = solve_system(system)
        assert report.method == "dense-fallback"
        assert report.relative_residual <= 1e-9

    def test_crosscheck_records_difference(self):
        system = system_for(n_space=6, n_time=4)
        report = solve_system(system, crosscheck_dense=True)
        assert report.crosscheck_dense_diff is not None
        assert report.crosscheck_dense_diff <= 1e-8

    def test_summary_text(self):
        system = system_for(n_space=6, n_time=4)
        report = solve_system(system)
        text = report.summary()
        assert "relative_residual" in text
        assert "flops_estimate" in text


class TestFlopsModel:
    def test_uniform_refinement_growth_bounded(self):
        for d in (1, 2):
            base = flops_model(400, 20, 3, d)
            refined = flops_model(400 * 2**d, 40, 3, d)
            assert refined / base <= 16.0 + 1e-12

    def test_single_step_dominated_by_spatial_solve(self):
        n_s, p = 10_000, 3
        total = flops_model(n_s, 1, p, 2)
        spatial_solve = n_s**1.5 + n_s * (2 * p + 1) ** 2
        assert spatial_solve > 0.5 * total

    def test_monotone(self):
        base = flops_model(100, 10, 2, 1)
        assert flops_model(200, 10, 2, 1) >= base
        assert flops_model(100, 20, 2, 1) >= base
        assert flops_model(100, 10, 3, 1) >= base
        assert flops_model(100, 10, 2, 2) >= base

    def test_positive_arguments_required(self):
        with pytest.raises(ValueError, match="positive"):
            flops_model(0, 1, 1, 1)
