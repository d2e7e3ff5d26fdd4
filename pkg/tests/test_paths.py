"""Tests for isotopy paths: flows, products, concatenations, and flux."""

import numpy as np
import pytest

from sympdist.errors import ClosednessError, IntegrationError
from sympdist.paths import (
    SCHEDULES,
    IsotopyPath,
    Schedule,
    compose_timewise,
    concat_left,
    concat_right,
    conjugate_path,
    constant_form_path,
    endpoint,
    flow_maps,
    flux,
    hamiltonian_path,
    invert,
    random_isotopy,
    reparametrize,
    translation_path,
)
from sympdist.splitting import SeminormSpec, SplittingOperator, seminorm
from sympdist.torus import (
    DiffeoMap,
    TorusModel,
    constant_form,
    hamiltonian_shear,
    spectral_gradient,
)

GENTLE = dict(n_steps=32, max_mode=2, harmonic_scale=0.02, exact_scale=0.004)


def _trapezoid_length(path, spec):
    vals = [seminorm(spec, path.sample(i)) for i in range(path.n_samples)]
    return float(np.trapezoid(vals, dx=1.0 / path.n_steps))


class TestSchedules:
    @pytest.mark.parametrize("name", ["smooth", "smooth_wide", "quintic"])
    def test_shape(self, name):
        s = SCHEDULES[name]
        t = np.linspace(0, 1, 501)
        v = s.value(t)
        assert v[0] == 0.0 and v[-1] == 1.0
        assert np.all(np.diff(v) >= -1e-15)
        d = s.derivative(t)
        assert np.all(d >= 0.0)
        # flat near the ends
        assert np.all(d[t < s.flat_width / 2] == 0.0)
        assert np.all(d[t > 1 - s.flat_width / 2] == 0.0)
        # derivative consistent with value
        mid = (v[2:] - v[:-2]) / (t[2] - t[0])
        assert np.max(np.abs(mid - d[1:-1])) <= 2e-2

    def test_bad_profile(self):
        with pytest.raises(ValueError):
            Schedule("cubic")


class TestEndpoint:
    def test_null_path(self, t2_32):
        samples = np.zeros((9, 2) + t2_32.grid_shape)
        phi = endpoint(IsotopyPath(t2_32, samples))
        assert np.max(np.abs(phi.displacement)) == 0.0

    def test_constant_dy_path_is_x_translation(self, t2_32):
        # alpha = a dy is dual to a d/dx, so the endpoint translates x by a
        path = constant_form_path(constant_form(t2_32, [0.0, 0.25]), n_steps=16)
        phi = endpoint(path)
        assert np.allclose(phi(np.array([[0.1, 0.2]])), [[0.35, 0.2]], atol=1e-12)

    def test_translation_path_endpoint(self, t2_32):
        phi = endpoint(translation_path(t2_32, [0.3, 0.4], n_steps=16))
        oracle = DiffeoMap.translation(t2_32, [0.3, 0.4])
        assert np.max(np.abs(phi.displacement - oracle.displacement)) <= 1e-12

    def test_autonomous_shear_flow(self, t2_32):
        H = np.cos(2 * np.pi * t2_32.grid()[0])
        phi = endpoint(hamiltonian_path(t2_32, H, n_steps=32))
        oracle = hamiltonian_shear(t2_32, 1.0)
        assert np.max(np.abs(phi.displacement - oracle.displacement)) <= 1e-12
        assert phi.symplectic_deviation() <= 1e-4

    def test_convergence_order_at_least_three(self):
        m = TorusModel(grid_res=16)
        x, y = m.grid()

        def make_path(T):
            times = np.linspace(0, 1, T + 1)
            samples = np.zeros((T + 1, 2) + m.grid_shape)
            for i, t in enumerate(times):
                Ht = 0.2 * np.cos(2 * np.pi * t) * np.cos(2 * np.pi * x) + 0.15 * np.sin(
                    2 * np.pi * t
                ) * np.cos(2 * np.pi * y)
                samples[i] = spectral_gradient(m, Ht)
            return IsotopyPath(m, samples, validate=False)

        ref = flow_maps(make_path(256))[-1].displacement
        errs = []
        for T in (8, 16, 32):
            errs.append(
                np.max(np.abs(flow_maps(make_path(T))[-1].displacement - ref))
            )
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 3.0)

    def test_cfl_guard(self, t2_32):
        path = translation_path(t2_32, [8.0, 0.0], n_steps=8)  # 1 period per step
        with pytest.raises(IntegrationError):
            endpoint(path)

    def test_non_closed_samples_rejected(self, t2_32):
        samples = np.zeros((5, 2) + t2_32.grid_shape)
        samples[:, 0] = np.sin(2 * np.pi * t2_32.grid()[1])
        with pytest.raises(ClosednessError):
            IsotopyPath(t2_32, samples)


class TestProducts:
    def test_compose_identity_path(self, t2_32, rng):
        psi = random_isotopy(t2_32, rng, **GENTLE)
        ident = IsotopyPath(
            t2_32, np.zeros((psi.n_samples, 2) + t2_32.grid_shape), validate=False
        )
        out = compose_timewise(ident, psi)
        assert np.max(np.abs(out.samples - psi.samples)) <= 1e-8

    def test_compose_with_inverse_is_null(self, t2_32):
        H = 0.2 * np.cos(2 * np.pi * t2_32.grid()[0])
        phi = hamiltonian_path(t2_32, H, n_steps=32)
        null = compose_timewise(phi, invert(phi))
        assert np.max(np.abs(null.samples)) <= 1e-6

    def test_translations_commute_and_add(self, t2_32):
        p1 = translation_path(t2_32, [0.2, 0.0], 16)
        p2 = translation_path(t2_32, [0.3, 0.0], 16)
        out = compose_timewise(p1, p2)
        assert np.max(np.abs(out.samples - (p1.samples + p2.samples))) <= 1e-10

    def test_compose_endpoint(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, **GENTLE)
        q = random_isotopy(t2_32, rng, **GENTLE)
        lhs = endpoint(compose_timewise(p, q))
        rhs = endpoint(p).compose(endpoint(q))
        assert np.max(np.abs(lhs.displacement - rhs.displacement)) <= 1e-4

    def test_invert_constant_path(self, t2_32):
        path = translation_path(t2_32, [0.4, 0.0], 16)
        inv = invert(path)
        assert np.max(np.abs(inv.samples + path.samples)) <= 1e-10

    def test_invert_endpoint_roundtrip(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, **GENTLE)
        comp = endpoint(invert(p)).compose(endpoint(p))
        assert np.max(np.abs(comp.displacement)) <= 1e-4

    def test_invert_identity_path(self, t2_32):
        ident = IsotopyPath(t2_32, np.zeros((9, 2) + t2_32.grid_shape), validate=False)
        assert np.max(np.abs(invert(ident).samples)) == 0.0

    def test_conjugation_endpoint(self, t2_32, rng):
        q = random_isotopy(t2_32, rng, **GENTLE)
        tr = DiffeoMap.translation(t2_32, [0.25, 0.125])
        lhs = endpoint(conjugate_path(q, tr))
        rhs = tr.compose(endpoint(q)).compose(tr.inverse())
        assert np.max(np.abs(lhs.displacement - rhs.displacement)) <= 1e-6

    def test_right_invariance_of_generating_forms(self, t2_32, rng):
        # t -> psi_t phi has the same generating forms as Psi; check at the
        # endpoint level: flowing Psi's forms from phi-shifted starts lands on
        # endpoint(Psi) o phi
        q = random_isotopy(t2_32, rng, **GENTLE)
        phi = DiffeoMap.translation(t2_32, [0.3, 0.2])
        e = endpoint(q)
        pts = t2_32.grid_points()
        lhs = e(phi(pts))
        rhs = e.compose(phi)(pts)
        assert np.max(np.abs(lhs - rhs)) <= 1e-6


class TestConcat:
    def test_identity_first_factor(self, t2_32, rng):
        psi = random_isotopy(t2_32, rng, smooth_norm_profile=True, n_steps=32)
        ident = IsotopyPath(
            t2_32, np.zeros((33, 2) + t2_32.grid_shape), validate=False
        )
        spec = SeminormSpec(SplittingOperator.hodge_projection(), c=1.0)
        cat = concat_left(ident, psi)
        l_cat = _trapezoid_length(cat, spec)
        l_psi = _trapezoid_length(psi, spec)
        assert abs(l_cat - l_psi) <= 1e-6 * max(1.0, l_psi)

    @pytest.mark.parametrize("sched", ["smooth", "quintic"])
    def test_length_additivity_smooth_profiles(self, t2_32, sched):
        r = np.random.default_rng(42)
        spec = SeminormSpec(SplittingOperator.hodge_projection(), c=1.0)
        for _ in range(5):
            p = random_isotopy(t2_32, r, n_steps=64, smooth_norm_profile=True)
            q = random_isotopy(t2_32, r, n_steps=64, smooth_norm_profile=True)
            lp, lq = _trapezoid_length(p, spec), _trapezoid_length(q, spec)
            lc = _trapezoid_length(concat_left(p, q, SCHEDULES[sched]), spec)
            assert abs(lc - lp - lq) <= 1e-6 * (lp + lq)

    def test_length_additivity_generic_paths_loose(self, t2_32):
        # kinked osc profiles limit trapezoid accuracy; the identity still holds
        # at the quadrature-error scale
        r = np.random.default_rng(43)
        spec = SeminormSpec(SplittingOperator.hodge_projection(), c=1.0)
        for _ in range(3):
            p = random_isotopy(t2_32, r, n_steps=64)
            q = random_isotopy(t2_32, r, n_steps=64)
            lp, lq = _trapezoid_length(p, spec), _trapezoid_length(q, spec)
            lc = _trapezoid_length(concat_left(p, q), spec)
            assert abs(lc - lp - lq) <= 1e-3 * (lp + lq)

    def test_concat_left_endpoint(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, **GENTLE)
        q = random_isotopy(t2_32, rng, **GENTLE)
        lhs = endpoint(concat_left(p, q))
        rhs = endpoint(p).compose(endpoint(q))
        assert np.max(np.abs(lhs.displacement - rhs.displacement)) <= 1e-4

    def test_concat_right_endpoint(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, **GENTLE)
        q = random_isotopy(t2_32, rng, **GENTLE)
        lhs = endpoint(concat_right(p, q))
        rhs = endpoint(p).compose(endpoint(q))
        assert np.max(np.abs(lhs.displacement - rhs.displacement)) <= 1e-4

    def test_concat_right_identity_reduces_to_left(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, smooth_norm_profile=True, n_steps=32)
        ident = IsotopyPath(
            t2_32, np.zeros((33, 2) + t2_32.grid_shape), validate=False
        )
        spec = SeminormSpec(SplittingOperator.hodge_projection(), c=1.0)
        l_right = _trapezoid_length(concat_right(ident, p), spec)
        l_left = _trapezoid_length(concat_left(ident, p), spec)
        assert abs(l_right - l_left) <= 1e-6 * max(1.0, l_left)

    def test_flux_additivity(self, t2_32):
        r = np.random.default_rng(44)
        for _ in range(5):
            p = random_isotopy(t2_32, r, n_steps=64)
            q = random_isotopy(t2_32, r, n_steps=64)
            fc = flux(concat_left(p, q)).coeffs
            assert np.max(np.abs(fc - flux(p).coeffs - flux(q).coeffs)) <= 1e-8

    def test_flux_additive_under_composition(self, t2_32, rng):
        # the pullback correction in time-wise composition is exact, so the
        # flux map is a homomorphism there as well
        p = random_isotopy(t2_32, rng, **GENTLE)
        q = random_isotopy(t2_32, rng, **GENTLE)
        fc = flux(compose_timewise(p, q)).coeffs
        assert np.max(np.abs(fc - flux(p).coeffs - flux(q).coeffs)) <= 1e-8


class TestFlux:
    def test_hamiltonian_path_flux_zero(self, t2_32):
        H = 0.3 * np.cos(2 * np.pi * t2_32.grid()[0])
        path = hamiltonian_path(t2_32, H, n_steps=16)
        assert path.is_hamiltonian()
        assert np.max(np.abs(flux(path).coeffs)) <= 1e-14

    def test_constant_dy_path_flux(self, t2_32):
        path = constant_form_path(constant_form(t2_32, [0.0, 0.25]), 16)
        f = flux(path)
        assert np.allclose(f.coeffs, [0.0, 0.25])
        assert f.harmonic_l2 == pytest.approx(0.25)

    def test_flux_of_translation_path(self, t2_32):
        # translation by (a, 0) has flux (0, a) on the standard torus
        f = flux(translation_path(t2_32, [0.3, 0.0], 16))
        assert np.allclose(f.coeffs, [0.0, 0.3], atol=1e-14)

    def test_reparametrization_invariance(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, n_steps=64, smooth_norm_profile=True)
        spec = SeminormSpec(SplittingOperator.hodge_projection(), c=1.0)
        for name in ("smooth", "quintic"):
            rp = reparametrize(p, SCHEDULES[name], n_steps=128)
            assert np.max(np.abs(flux(rp).coeffs - flux(p).coeffs)) <= 1e-8
            assert abs(_trapezoid_length(rp, spec) - _trapezoid_length(p, spec)) <= 1e-6

    def test_identity_schedule_is_noop(self, t2_32, rng):
        p = random_isotopy(t2_32, rng, n_steps=32)
        rp = reparametrize(p, SCHEDULES["identity"])
        assert np.max(np.abs(rp.samples - p.samples)) <= 1e-10
