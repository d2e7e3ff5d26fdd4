"""Tests for the numerical probes: invariance, orbit rank, non-harmonic forms,
and the right-concatenation excess."""

import numpy as np
import pytest

from sympdist.errors import DegenerateInputError
from sympdist.paths import hamiltonian_path
from sympdist.probes import (
    default_form_family,
    default_map_family,
    disc_supported_flows,
    invariance_defect,
    nonharmonic_closed_form,
    orbit_rank,
    right_concat_excess,
    sample_metrics,
)
from sympdist.splitting import BaseNorm, SeminormSpec, SplittingOperator
from sympdist.torus import (
    DiffeoMap,
    TorusModel,
    constant_form,
    exact_form_from_primitive,
    exterior_derivative_residual,
    hamiltonian_shear,
    inner_product,
    scalar_inner_product,
    codifferential,
    zero_form,
)


@pytest.fixture(scope="module")
def t2_64m():
    return TorusModel(half_dim=1, grid_res=64)


HODGE_OSC = SeminormSpec(SplittingOperator.hodge_projection(), c=1.0,
                         base_norm=BaseNorm.HOFER_OSC)


class TestInvarianceProbe:
    def test_zero_operator_trivial(self, t2_64m, rng):
        maps = default_map_family(t2_64m, rng, 2)
        forms = default_form_family(t2_64m, rng, 2)
        result = invariance_defect(SeminormSpec(SplittingOperator.zero(), c=1.0),
                                   maps, forms)
        assert result.trivial
        assert not result.violates_invariance

    def test_hodge_violates(self, t2_64m):
        rng = np.random.default_rng(11)
        maps = default_map_family(t2_64m, rng, 4)
        forms = default_form_family(t2_64m, rng, 4)
        result = invariance_defect(HODGE_OSC, maps, forms)
        assert result.n_pairs >= 100
        assert result.violates_invariance
        assert result.worst_ratio_deviation() > 1e-3
        # the kernel hits: harmonic forms have zero norm but visible pullback
        assert result.zero_denominator_hits > 0

    def test_shear_on_dy_is_a_kernel_witness(self, t2_64m):
        # mu(dy) = 0, but the pullback by a shear has a nonzero exact part
        phi = hamiltonian_shear(t2_64m, 0.1)
        dy = constant_form(t2_64m, [0.0, 1.0])
        result = invariance_defect(HODGE_OSC, [phi], [dy])
        assert result.zero_denominator_hits == 1
        assert result.violates_invariance

    def test_translations_are_invariant(self, t2_64m):
        # grid-aligned translations permute the samples: exact equivariance
        rng = np.random.default_rng(12)
        N = t2_64m.grid_res
        maps = [
            DiffeoMap.translation(t2_64m, np.round(rng.uniform(size=2) * N) / N)
            for _ in range(4)
        ]
        forms = default_form_family(t2_64m, rng, 3)
        result = invariance_defect(HODGE_OSC, maps, forms)
        assert not result.violates_invariance
        assert result.worst_ratio_deviation() <= 1e-8

    def test_all_degenerate_pairs_flagged(self, t2_64m):
        # harmonic forms with translation maps: every pair is 0/0
        maps = [DiffeoMap.translation(t2_64m, [0.25, 0.0])]
        forms = [constant_form(t2_64m, [0.0, 1.0])]
        result = invariance_defect(HODGE_OSC, maps, forms)
        assert result.excluded == 1
        assert len(result.ratios) == 0


class TestOrbitRank:
    @pytest.mark.parametrize("k", [1, 3, 5, 8])
    def test_full_rank_for_dy(self, t2_64m, k):
        result = orbit_rank(constant_form(t2_64m, [0.0, 1.0]), k)
        assert result.rank == k
        assert result.min_singular_value > 1e-8

    def test_full_rank_for_exact_form(self, t2_64m):
        x = t2_64m.grid()[0]
        beta = exact_form_from_primitive(t2_64m, np.sin(2 * np.pi * x))
        result = orbit_rank(beta, 5)
        assert result.rank == 5
        assert result.min_singular_value > 1e-8

    def test_monotone_in_k(self, t2_64m):
        ranks = [orbit_rank(constant_form(t2_64m, [0.0, 1.0]), k).rank
                 for k in range(1, 6)]
        assert ranks == sorted(ranks)

    def test_vanishing_form_rejected(self, t2_64m):
        with pytest.raises(DegenerateInputError):
            orbit_rank(zero_form(t2_64m), 3)

    def test_flows_are_supported_and_symplectic(self, t2_64m):
        grid = t2_64m.grid()
        outside = (grid[0] - 0.5) ** 2 + (grid[1] - 0.5) ** 2 > 0.3**2
        for phi in disc_supported_flows(t2_64m, (0.5, 0.5), 0.3, 5):
            assert np.max(np.abs(phi.displacement[:, outside])) == 0.0
            assert phi.symplectic_deviation() <= 1e-12


@pytest.fixture(scope="module")
def cert(t2_64m):
    base = constant_form(t2_64m, [1.0, 0.0])
    return nonharmonic_closed_form(base, rng=np.random.default_rng(5))


class TestNonharmonicForm:
    def test_form_is_closed(self, t2_64m, cert):
        assert exterior_derivative_residual(cert.form) <= 1e-10

    def test_pairings_positive_for_all_metrics(self, cert):
        assert len(cert.metrics) == 21  # flat + 10 diagonal + 10 conformal
        assert cert.all_positive
        assert cert.pairings.min() > 1e-6

    def test_codifferential_never_vanishes(self, cert):
        assert np.all(cert.codifferential_norms > 0.0)

    def test_integration_by_parts_identity(self, cert):
        assert cert.identity_defects.max() <= 1e-8

    def test_pairing_equals_bump_gradient_energy(self, t2_64m, cert):
        # on the inner disc the constructed form equals the bump differential,
        # so the pairing is the metric-weighted gradient energy of the bump
        from sympdist.torus import exact_form_from_primitive

        d_bump = exact_form_from_primitive(t2_64m, cert.bump)
        for (diag, rho), pairing in zip(cert.metrics[:3], cert.pairings[:3]):
            oracle = inner_product(d_bump, d_bump, metric_diag=diag, conformal=rho)
            assert pairing == pytest.approx(oracle, rel=1e-6)

    def test_exact_input_rejected(self, t2_64m):
        x = t2_64m.grid()[0]
        exact = exact_form_from_primitive(t2_64m, np.sin(2 * np.pi * x))
        with pytest.raises(DegenerateInputError):
            nonharmonic_closed_form(exact)

    def test_zero_bump_rejected(self, t2_64m):
        with pytest.raises(DegenerateInputError):
            nonharmonic_closed_form(constant_form(t2_64m, [1.0, 0.0]),
                                    bump_amplitude=0.0)


class TestRightConcatExcess:
    def test_bundled_shear(self, t2_64m):
        H = 0.2 * np.cos(2 * np.pi * t2_64m.grid()[0])
        phi_path = hamiltonian_path(t2_64m, H, 64)
        phi_end = hamiltonian_shear(t2_64m, 0.2)
        result = right_concat_excess(phi_path, phi_end, [0.0, 1.0])
        assert result.excess >= 1e-3
        # the analytic prediction: osc of the potential of the pulled form,
        # which for this shear is 0.8 pi
        assert result.predicted == pytest.approx(0.8 * np.pi, abs=1e-9)
        assert abs(result.excess - result.predicted) <= 1e-4
        assert abs(result.left_control) <= 1e-6

    def test_identity_first_factor_rejected(self, t2_64m):
        path = hamiltonian_path(t2_64m, np.zeros(t2_64m.grid_shape), 8)
        with pytest.raises(DegenerateInputError):
            right_concat_excess(path, DiffeoMap.identity(t2_64m), [0.0, 1.0])


class TestMetricSampling:
    def test_conformal_factors_bounded(self, t2_64m, rng):
        metrics = sample_metrics(t2_64m, rng)
        for diag, rho in metrics:
            assert np.all(diag > 0)
            if rho is not None:
                assert rho.min() > 0.4 and rho.max() < 2.5

    def test_integration_by_parts_random_metric(self, t2_64m, rng):
        # <f, delta alpha>_g = <df, alpha>_g for sampled conformal metrics
        from sympdist.torus import exact_form_from_primitive, random_scalar_field
        from sympdist.torus import random_closed_form

        diag, rho = sample_metrics(t2_64m, rng, n_diagonal=0, n_conformal=1)[1]
        f = random_scalar_field(t2_64m, rng, max_mode=3)
        alpha = random_closed_form(t2_64m, rng, max_mode=3)
        lhs = scalar_inner_product(t2_64m, f, codifferential(alpha, diag, rho),
                                   diag, rho)
        rhs = inner_product(exact_form_from_primitive(t2_64m, f), alpha, diag, rho)
        assert lhs == pytest.approx(rhs, abs=1e-8)
