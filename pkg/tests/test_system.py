"""Tests for the constant tables, Kronecker operator, and CFL diagnostic."""

import os
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from bihwave.analysis import manufactured_case
from bihwave.system import (
    DiscretizationConfig,
    apply_operator,
    assemble_dense,
    build_system,
    cfl_check,
    delta_lookup,
    dense_size_cap,
    max_generalized_eigenvalue,
    rho_lookup,
)

from conftest import brute_force_operator_1d


class TestConstantTables:
    def test_rho_exact_rationals(self):
        expected = {
            1: Fraction(12),
            2: Fraction(10),
            3: Fraction(168, 17),
            4: Fraction(306, 31),
            5: Fraction(2349, 238),
            6: Fraction(7797, 790),
        }
        for p, value in expected.items():
            assert rho_lookup(p) == value
            assert isinstance(rho_lookup(p), Fraction)

    def test_delta_exact_rationals(self):
        expected = {
            1: Fraction(1, 12),
            2: Fraction(1, 120),
            3: Fraction(17, 20160),
            4: Fraction(5, 58529),
            5: Fraction(2, 231067),
            6: Fraction(1, 1140271),
        }
        for p, value in expected.items():
            assert delta_lookup(p) == value
            assert isinstance(delta_lookup(p), Fraction)

    def test_float_conversions(self):
        assert float(rho_lookup(3)) == pytest.approx(168.0 / 17.0)
        assert float(delta_lookup(4)) == pytest.approx(5.0 / 58529.0)
        assert float(delta_lookup(2)) == pytest.approx(1.0 / 120.0)

    def test_out_of_range(self):
        for bad in (0, 7, -1):
            with pytest.raises(ValueError, match="tabulated"):
                rho_lookup(bad)
            with pytest.raises(ValueError, match="tabulated"):
                delta_lookup(bad)


def small_system(**kwargs):
    case = manufactured_case("line1d")
    defaults = dict(
        d=1,
        p_space=2,
        p_time=2,
        n_elements_space=8,
        n_elements_time=4,
        mode="iga_penalty",
        forcing=case.forcing,
    )
    defaults.update(kwargs)
    return build_system(DiscretizationConfig(**defaults))


class TestBuildSystem:
    def test_dimension_counts(self):
        system = small_system()
        assert system.n_s == 6
        assert system.n_t == 5
        assert system.n_dof == 30

    def test_delta_default(self):
        system = small_system(p_time=3, n_elements_time=5)
        assert system.config.delta == pytest.approx(1e-3)
        explicit = small_system(delta=0.5)
        assert explicit.config.delta == 0.5

    def test_mode_none_unstabilized(self):
        system = small_system(mode="none")
        np.testing.assert_array_equal(system.temporal.P_t, 0.0)

    def test_mode_aliases(self):
        assert small_system(mode="iga").config.mode == "iga_penalty"
        assert small_system(mode="fem").config.mode == "fem_projection"
        with pytest.raises(ValueError, match="mode"):
            small_system(mode="magic")

    def test_rhs_zero_without_forcing(self):
        system = small_system(forcing=None)
        np.testing.assert_array_equal(system.rhs, 0.0)


class TestApplyOperator:
    def test_zero_vector(self):
        system = small_system()
        np.testing.assert_array_equal(apply_operator(system, np.zeros(30)), 0.0)

    def test_length_mismatch(self):
        system = small_system()
        with pytest.raises(ValueError, match="length"):
            apply_operator(system, np.zeros(29))

    def test_single_temporal_mode(self):
        # n_t = 1: the operator collapses to a scalar combination of K_x, M_x
        case = manufactured_case("line1d")
        system = build_system(
            DiscretizationConfig(
                d=1,
                p_space=2,
                p_time=1,
                n_elements_space=8,
                n_elements_time=1,
                mode="none",
                forcing=case.forcing,
            )
        )
        assert system.n_t == 1
        w = system.temporal.stabilized_mass[0, 0]
        k = system.temporal.K_t[0, 0]
        rng = np.random.default_rng(0)
        x = rng.standard_normal(system.n_s)
        expected = w * (system.spatial.K_x @ x) - k * (system.spatial.M_x @ x)
        np.testing.assert_allclose(apply_operator(system, x), expected, atol=1e-14)

    @pytest.mark.parametrize("mode", ["none", "iga_penalty", "fem_projection"])
    @pytest.mark.parametrize("d", [1, 2])
    def test_matches_dense_expansion(self, mode, d):
        case = manufactured_case("line1d" if d == 1 else "square2d")
        system = build_system(
            DiscretizationConfig(
                d=d,
                p_space=2,
                p_time=2,
                n_elements_space=6 if d == 1 else 4,
                n_elements_time=4,
                mode=mode,
                forcing=case.forcing,
            )
        )
        assert system.n_dof <= 600
        A = assemble_dense(system)
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.standard_normal(system.n_dof)
            ref = A @ x
            out = apply_operator(system, x)
            np.testing.assert_allclose(
                out, ref, atol=1e-12 * np.linalg.norm(ref, np.inf)
            )

    def test_complex_vectors_supported(self):
        system = small_system()
        rng = np.random.default_rng(2)
        z = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        out = apply_operator(system, z)
        ref = apply_operator(system, z.real) + 1j * apply_operator(system, z.imag)
        np.testing.assert_allclose(out, ref, atol=1e-13)


class TestDenseExpansion:
    def test_single_dof(self):
        case = manufactured_case("line1d")
        system = build_system(
            DiscretizationConfig(
                d=1,
                p_space=2,
                p_time=1,
                n_elements_space=2,
                n_elements_time=1,
                regularity_space=0,
                mode="none",
                forcing=case.forcing,
            )
        )
        assert system.n_s == 1 and system.n_t == 1
        A = assemble_dense(system)
        expected = (
            system.temporal.stabilized_mass[0, 0] * system.spatial.K_x.toarray()
            - system.temporal.K_t[0, 0] * system.spatial.M_x.toarray()
        )
        np.testing.assert_allclose(A, expected, atol=1e-15)

    def test_operator_not_symmetric(self):
        # mixed trial/test temporal spaces make K_t, hence A, unsymmetric
        system = small_system()
        A = assemble_dense(system)
        assert np.linalg.norm(A - A.T) > 1e-3 * np.linalg.norm(A)

    def test_sparsity_matches_support_overlap(self):
        system = small_system(mode="none")
        A = assemble_dense(system)
        spatial = system.spatial_spaces[0]
        trial, test = system.temporal_trial, system.temporal_test

        def overlaps(space_a, i, space_b, j):
            lo_i, hi_i = space_a.knot_vector.support(space_a.active_indices[i])
            lo_j, hi_j = space_b.knot_vector.support(space_b.active_indices[j])
            return min(hi_i, hi_j) - max(lo_i, lo_j) > 1e-14

        n_s, n_t = system.n_s, system.n_t
        predicted = np.zeros_like(A, dtype=bool)
        for it in range(n_t):
            for isp in range(n_s):
                for jt in range(n_t):
                    for jsp in range(n_s):
                        predicted[isp + n_s * it, jsp + n_s * jt] = overlaps(
                            spatial, isp, spatial, jsp
                        ) and overlaps(test, it, trial, jt)
        structural = np.abs(A) > 0
        # every structural nonzero sits inside the predicted support pattern,
        # and the pattern is essentially filled (quadrature exact, no chance
        # cancellation on this mesh)
        assert not np.any(structural & ~predicted)
        assert np.count_nonzero(structural) == np.count_nonzero(predicted)

    def test_size_cap(self, monkeypatch):
        system = small_system()
        with pytest.raises(ValueError, match="cap"):
            assemble_dense(system, max_dof=10)
        monkeypatch.setenv("BIHW_MAX_DENSE", "10")
        assert dense_size_cap() == 10
        with pytest.raises(ValueError, match="cap"):
            assemble_dense(system)
        monkeypatch.delenv("BIHW_MAX_DENSE")
        assert dense_size_cap() == 20000

    def test_entrywise_brute_force_oracle(self):
        # full space-time quadrature of the bilinear form, no Kronecker
        # factorization: pins down signs, index roles, and ordering
        case = manufactured_case("line1d")
        for mode in ("none", "iga_penalty"):
            system = build_system(
                DiscretizationConfig(
                    d=1,
                    p_space=2,
                    p_time=2,
                    n_elements_space=5,
                    n_elements_time=3,
                    mode=mode,
                    delta=1e-2,
                    forcing=case.forcing,
                )
            )
            A = assemble_dense(system)
            oracle = brute_force_operator_1d(
                system.spatial_spaces[0],
                system.temporal_trial,
                system.temporal_test,
                delta=system.config.delta,
                mode=mode,
            )
            np.testing.assert_allclose(
                A, oracle, atol=1e-12 * np.max(np.abs(oracle))
            )


class TestCfl:
    def test_single_spatial_dof(self):
        case = manufactured_case("line1d")
        system = build_system(
            DiscretizationConfig(
                d=1,
                p_space=2,
                p_time=2,
                n_elements_space=3,
                n_elements_time=2,
                regularity_space=0,
                mode="none",
                forcing=case.forcing,
            )
        )
        # reduce to one dof by slicing: use a 2-dof system and compare against
        # the dense pencil instead
        K = system.spatial.K_x.toarray()
        M = system.spatial.M_x.toarray()
        expected = scipy.linalg.eigh(K, M, eigvals_only=True)[-1]
        report = cfl_check(system.spatial, 2, h_t=0.5)
        assert report.lambda_max == pytest.approx(expected, rel=1e-10)

    def test_eigenvalue_h4_scaling(self):
        # h^-4 growth of the bi-Laplacian pencil; coarser pairs than 16->32
        # are still pre-asymptotic (ratio ~20.8 for 8->16)
        lams = []
        for n in (16, 32):
            space_sys = small_system(n_elements_space=n, mode="none")
            report = cfl_check(space_sys.spatial, 2, h_t=0.1)
            lams.append(report.lambda_max)
        ratio = lams[1] / lams[0]
        assert 12.0 <= ratio <= 20.0

    def test_satisfied_flag(self):
        system = small_system(mode="none")
        report = cfl_check(system.spatial, 2, h_t=1.0)
        assert report.h_t_max < 1.0
        assert not report.satisfied
        fine = cfl_check(system.spatial, 2, h_t=report.h_t_max / 2)
        assert fine.satisfied

    def test_ht_max_scales_like_hs_squared(self):
        ratios = []
        for n in (8, 16, 32):
            system = small_system(n_elements_space=n, mode="none")
            report = cfl_check(system.spatial, 2, h_t=0.1)
            h_s = 1.0 / n
            ratios.append(report.h_t_max / h_s**2)
        spread = (max(ratios) - min(ratios)) / max(ratios)
        assert spread < 0.25

    def test_advisory_flag(self):
        system = small_system(mode="none")
        assert cfl_check(system.spatial, 3, 0.1, time_regularity=1).advisory
        assert not cfl_check(system.spatial, 3, 0.1, time_regularity=2).advisory
        assert not cfl_check(system.spatial, 3, 0.1).advisory

    def test_power_iteration_matches_dense(self):
        system = small_system(n_elements_space=24, mode="none")
        dense = max_generalized_eigenvalue(system.spatial.K_x, system.spatial.M_x)
        power = max_generalized_eigenvalue(
            system.spatial.K_x, system.spatial.M_x, dense_cutoff=1
        )
        assert power == pytest.approx(dense, rel=1e-6)
