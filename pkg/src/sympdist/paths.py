"""Isotopies of symplectomorphisms represented by their generating 1-forms.

A path of symplectomorphisms starting at the identity corresponds one-to-one to
a time family of closed 1-forms alpha_t = omega(X_t, .), where X_t is the
velocity field of the isotopy.  Paths are stored as uniform time samples of
alpha_t; flow integration (RK4 with quartic time interpolation of the samples)
recovers the endpoint map, and the flux of a path is the time integral of the
harmonic coefficients.

Products of paths:
  * time-wise composition  (phi_t psi_t), with the pullback-corrected form sum,
  * left/right concatenation with smooth reparametrization schedules,
  * inversion t -> (phi_t)^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClosednessError, IntegrationError, ShapeError
from .torus import (
    CLOSEDNESS_TOL,
    Closedness,
    DiffeoMap,
    OneFormField,
    TorusModel,
    constant_form,
    exterior_derivative_residual,
    fourier_eval,
    harmonic_l2_norm,
    random_scalar_field,
    spectral_gradient,
)

DEFAULT_TIME_SAMPLES = 64
HAMILTONIAN_TAG_TOL = 1e-8


# ---------------------------------------------------------------------------
# reparametrization schedules
# ---------------------------------------------------------------------------

def _smooth_step_inf(y: np.ndarray) -> tuple:
    """C-infinity transition f(y)/(f(y)+f(1-y)) with f(y)=exp(-1/y); value and slope."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    eps = 1e-12  # below this the transition is flat to double precision anyway
    yc = np.clip(y, eps, 1.0 - eps)
    fy = np.exp(-1.0 / yc)
    f1 = np.exp(-1.0 / (1.0 - yc))
    dfy = fy / yc**2
    df1 = f1 / (1.0 - yc) ** 2
    denom = fy + f1
    value = fy / denom
    slope = (dfy * f1 + fy * df1) / denom**2
    value = np.where(y <= eps, 0.0, np.where(y >= 1.0 - eps, 1.0, value))
    slope = np.where((y <= eps) | (y >= 1.0 - eps), 0.0, slope)
    return value, slope


def _quintic_step(y: np.ndarray) -> tuple:
    y = np.clip(y, 0.0, 1.0)
    value = y**3 * (10.0 - 15.0 * y + 6.0 * y**2)
    slope = 30.0 * y**2 * (1.0 - y) ** 2
    return value, slope


@dataclass(frozen=True)
class Schedule:
    """Smooth non-decreasing surjection of [0, 1], flat near both ends.

    ``flat_width`` is the width of the constant margins; ``profile`` selects the
    transition ("smooth" = C-infinity exponential step, "quintic" = classic C^2
    smoothstep, "identity" = no reparametrization).
    """

    profile: str = "smooth"
    flat_width: float = 0.125

    def __post_init__(self):
        if self.profile not in ("smooth", "quintic", "identity"):
            raise ValueError(f"unknown schedule profile {self.profile!r}")
        if not 0.0 <= self.flat_width < 0.5:
            raise ValueError("flat_width must lie in [0, 0.5)")

    def _step(self, y):
        if self.profile == "smooth":
            return _smooth_step_inf(y)
        return _quintic_step(y)

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.profile == "identity":
            return t.copy()
        w = self.flat_width
        v, _ = self._step((t - w) / (1.0 - 2.0 * w))
        return v

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.profile == "identity":
            return np.ones_like(t)
        w = self.flat_width
        _, s = self._step((t - w) / (1.0 - 2.0 * w))
        return s / (1.0 - 2.0 * w)


SCHEDULES = {
    "smooth": Schedule("smooth", 0.125),
    "smooth_wide": Schedule("smooth", 0.2),
    "quintic": Schedule("quintic", 0.125),
    "identity": Schedule("identity", 0.0),
}


# ---------------------------------------------------------------------------
# the path type
# ---------------------------------------------------------------------------

class IsotopyPath:
    """Uniform time samples of the generating forms of a symplectic isotopy.

    ``samples`` has shape (T + 1, 2n) + grid_shape; sample i sits at time i / T.
    """

    def __init__(self, model: TorusModel, samples, validate: bool = True,
                 closedness_tol: float = CLOSEDNESS_TOL):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != model.dim + 2 or samples.shape[1:] != (model.dim,) + model.grid_shape:
            raise ShapeError(
                f"samples must have shape (T+1, {model.dim}) + {model.grid_shape}"
            )
        if samples.shape[0] < 2:
            raise ShapeError("a path needs at least two time samples")
        self.model = model
        self.samples = samples
        self.samples.setflags(write=False)
        if validate:
            worst = max(
                exterior_derivative_residual(self.sample(i))
                for i in range(self.n_samples)
            )
            if worst > closedness_tol:
                raise ClosednessError(worst, closedness_tol)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_samples)

    def sample(self, i: int) -> OneFormField:
        return OneFormField(self.model, self.samples[i], Closedness.UNCHECKED,
                            validate=False)

    def form_at(self, t: float) -> np.ndarray:
        """Components of alpha_t by 6-point Lagrange time interpolation.

        Degree-5 interpolation keeps the time-sampling error of reparametrized
        quadratures (length, flux) well below the additivity tolerances; short
        paths fall back to lower-order stencils.
        """
        T = self.n_steps
        s = float(t) * T
        width = min(6, self.n_samples)
        if width < 2:
            return self.samples[0].copy()
        j = int(np.clip(np.floor(s) - (width // 2 - 1), 0, T - (width - 1)))
        nodes = np.arange(j, j + width, dtype=float)
        out = np.zeros_like(self.samples[0])
        for a in range(width):
            w = 1.0
            for b in range(width):
                if a != b:
                    w *= (s - nodes[b]) / (nodes[a] - nodes[b])
            out += w * self.samples[j + a]
        return out

    def harmonic_track(self) -> np.ndarray:
        """Per-sample harmonic coefficients (component means), shape (T+1, 2n)."""
        axes = tuple(range(2, self.model.dim + 2))
        return self.samples.mean(axis=axes)

    def is_hamiltonian(self, tol: float = HAMILTONIAN_TAG_TOL) -> bool:
        """True when every sample's harmonic part is below tol."""
        return float(np.max(np.abs(self.harmonic_track()))) <= tol

    def reversed(self) -> "IsotopyPath":
        """The same geometric track run backwards: t -> psi_{1-t} psi_1^{-1} has
        generating forms -alpha_{1-t}; used for loop construction in tests."""
        return IsotopyPath(self.model, -self.samples[::-1], validate=False)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def constant_form_path(alpha: OneFormField, n_steps: int = DEFAULT_TIME_SAMPLES) -> IsotopyPath:
    """The isotopy generated by a fixed closed form (autonomous dual field)."""
    samples = np.repeat(alpha.components[None], n_steps + 1, axis=0)
    return IsotopyPath(alpha.model, samples, validate=True)


def translation_path(model: TorusModel, vector,
                     n_steps: int = DEFAULT_TIME_SAMPLES) -> IsotopyPath:
    """Straight path whose endpoint is the translation by ``vector``."""
    vector = np.asarray(vector, dtype=float)
    alpha = constant_form(model, model.symplectic_matrix.T @ vector)
    return constant_form_path(alpha, n_steps)


def hamiltonian_path(model: TorusModel, H: np.ndarray,
                     n_steps: int = DEFAULT_TIME_SAMPLES,
                     profile=None) -> IsotopyPath:
    """Path generated by dH, optionally modulated by a smooth time profile."""
    H = np.asarray(H, dtype=float)
    if H.shape != model.grid_shape:
        raise ShapeError("Hamiltonian grid shape mismatch")
    dH = spectral_gradient(model, H)
    times = np.linspace(0.0, 1.0, n_steps + 1)
    weights = np.ones_like(times) if profile is None else np.asarray(
        [float(profile(t)) for t in times]
    )
    expand = (slice(None),) + (None,) * (model.dim + 1)
    samples = weights[expand] * dH[None]
    return IsotopyPath(model, samples, validate=False)


def random_isotopy(model: TorusModel, rng: np.random.Generator,
                   n_steps: int = DEFAULT_TIME_SAMPLES, max_mode: int = 3,
                   harmonic_scale: float = 1.0, exact_scale: float = 1.0,
                   smooth_norm_profile: bool = False) -> IsotopyPath:
    """Random smooth-in-time path of closed forms.

    With ``smooth_norm_profile`` the exact part is a fixed spatial shape scaled
    by a positive smooth profile and the harmonic track stays away from zero, so
    t -> seminorm(alpha_t) is smooth for every splitting seminorm; this is the
    family used by quadrature-sensitive additivity checks.
    """
    times = np.linspace(0.0, 1.0, n_steps + 1)

    def trig_profile(positive: bool) -> np.ndarray:
        coeff = rng.normal(size=3)
        vals = (
            coeff[0]
            + coeff[1] * np.cos(2 * np.pi * times)
            + coeff[2] * np.sin(2 * np.pi * times)
        )
        if positive:
            vals = 1.0 + 0.5 * vals / max(1.0, float(np.max(np.abs(vals))))
        return vals

    expand = (slice(None),) + (None,) * (model.dim + 1)
    if smooth_norm_profile:
        shape = random_scalar_field(model, rng, max_mode, exact_scale)
        du = spectral_gradient(model, shape)
        h0 = rng.normal(size=model.dim)
        h0 *= harmonic_scale / max(np.linalg.norm(h0), 1e-9)
        a_t = trig_profile(positive=True)
        r_t = trig_profile(positive=True)
        samples = (
            a_t[expand] * du[None]
            + r_t[expand] * np.broadcast_to(
                h0.reshape((model.dim,) + (1,) * model.dim),
                (model.dim,) + model.grid_shape,
            )[None]
        )
        return IsotopyPath(model, np.ascontiguousarray(samples), validate=False)

    samples = np.zeros((n_steps + 1, model.dim) + model.grid_shape)
    for _ in range(2):
        shape = random_scalar_field(model, rng, max_mode, exact_scale)
        du = spectral_gradient(model, shape)
        samples += trig_profile(positive=False)[expand] * du[None]
    grid_expand = (slice(None),) + (None,) * model.dim
    for k in range(model.dim):
        hk = trig_profile(positive=False) * harmonic_scale
        samples[:, k] += hk[grid_expand]
    return IsotopyPath(model, samples, validate=False)


# ---------------------------------------------------------------------------
# flow integration
# ---------------------------------------------------------------------------

def _velocity(path: IsotopyPath, t: float, points: np.ndarray) -> np.ndarray:
    """X_t at the given points: dual of the interpolated generating form."""
    comps = path.form_at(t)
    vals = fourier_eval(path.model, comps, points)  # (2n, P)
    return (path.model.dual_matrix @ vals).T


def flow_maps(path: IsotopyPath, substeps: int = 1,
              cfl_fraction: float = 0.25) -> list:
    """Integrate the isotopy, returning the map at every sample time.

    RK4 across each sample interval (optionally subdivided), with the generating
    forms interpolated in time.  Raises IntegrationError when a single step would
    move points by more than ``cfl_fraction`` of the smallest period.
    """
    model = path.model
    points = model.grid_points()
    maps = [DiffeoMap.identity(model)]
    T = path.n_steps
    h = 1.0 / (T * substeps)
    limit = cfl_fraction * min(model.periods)
    grid_flat = points.copy()
    x = points.copy()
    for i in range(T):
        for s in range(substeps):
            t0 = (i * substeps + s) * h
            k1 = _velocity(path, t0, x)
            step_size = float(np.max(np.abs(k1))) * h
            if step_size > limit:
                raise IntegrationError(
                    f"flow step moves points by {step_size:.3e} > {limit:.3e}; "
                    "use a finer time grid"
                )
            k2 = _velocity(path, t0 + h / 2, x + (h / 2) * k1)
            k3 = _velocity(path, t0 + h / 2, x + (h / 2) * k2)
            k4 = _velocity(path, t0 + h, x + h * k3)
            x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        disp = (x - grid_flat).T.reshape((model.dim,) + model.grid_shape)
        maps.append(DiffeoMap(model, disp, check_smoothness=False))
    return maps


def endpoint(path: IsotopyPath, symplectic_tol: float = 1e-4,
             max_refinements: int = 2) -> DiffeoMap:
    """Time-1 map of the isotopy, verified to be symplectic to tolerance.

    The verification is a check, not a projection: when the RK4 endpoint drifts
    off the symplectic constraint the integration is retried with subdivided
    steps, and an IntegrationError reports the final deviation if it never
    passes.
    """
    substeps = 1
    last = None
    for _ in range(max_refinements + 1):
        phi = flow_maps(path, substeps=substeps)[-1]
        dev = phi.symplectic_deviation()
        if dev <= symplectic_tol:
            return phi
        last = dev
        substeps *= 2
    raise IntegrationError(
        f"endpoint symplectic deviation {last:.3e} exceeds {symplectic_tol:.3e} "
        "after refinement; use a finer time grid"
    )


# ---------------------------------------------------------------------------
# flux
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluxVector:
    """A first-cohomology class in the basis [dx_k], with its harmonic L2 norm."""

    coeffs: np.ndarray
    harmonic_l2: float

    @classmethod
    def from_coeffs(cls, model: TorusModel, coeffs) -> "FluxVector":
        coeffs = np.asarray(coeffs, dtype=float).copy()
        coeffs.setflags(write=False)
        return cls(coeffs=coeffs, harmonic_l2=harmonic_l2_norm(model, coeffs))

    def __add__(self, other: "FluxVector") -> "FluxVector":
        raise TypeError("combine flux vectors through FluxVector.from_coeffs on a model")


def flux(path: IsotopyPath) -> FluxVector:
    """Time integral (trapezoid) of the per-sample harmonic coefficients."""
    track = path.harmonic_track()
    coeffs = np.trapezoid(track, dx=1.0 / path.n_steps, axis=0)
    return FluxVector.from_coeffs(path.model, coeffs)


# ---------------------------------------------------------------------------
# products of paths
# ---------------------------------------------------------------------------

def compose_timewise(phi_path: IsotopyPath, psi_path: IsotopyPath,
                     substeps: int = 1) -> IsotopyPath:
    """The path t -> phi_t psi_t, via alpha(phi)_t + (phi_t^{-1})* alpha(psi)_t."""
    model = phi_path.model
    if not model.compatible(psi_path.model):
        raise ShapeError("paths live on different models")
    if phi_path.n_samples != psi_path.n_samples:
        raise ShapeError("paths need a common time grid")
    from .torus import pullback  # local import keeps module load cheap

    maps = flow_maps(phi_path, substeps=substeps)
    samples = np.empty_like(psi_path.samples)
    for i in range(phi_path.n_samples):
        phi_inv = maps[i].inverse()
        pulled = pullback(psi_path.sample(i), phi_inv)
        samples[i] = phi_path.samples[i] + pulled.components
    return IsotopyPath(model, samples, validate=False)


def invert(path: IsotopyPath, substeps: int = 1) -> IsotopyPath:
    """The inverse isotopy t -> (phi_t)^{-1}: samples -(phi_t)* alpha_t."""
    from .torus import pullback

    maps = flow_maps(path, substeps=substeps)
    samples = np.empty_like(path.samples)
    for i in range(path.n_samples):
        pulled = pullback(path.sample(i), maps[i])
        samples[i] = -pulled.components
    return IsotopyPath(path.model, samples, validate=False)


def conjugate_path(path: IsotopyPath, phi: DiffeoMap) -> IsotopyPath:
    """Pull the generating forms back by phi^{-1}: samples (phi^{-1})* alpha_t.

    Two readings of the result: as an identity-based isotopy it is the
    conjugation t -> phi psi_t phi^{-1}; and sample-for-sample its forms are
    exactly those of the left multiple t -> phi psi_t (which starts at phi,
    not the identity).  Length functionals of phi.Psi therefore evaluate on
    this path, matching the pullback factor of right-concatenation tails.
    """
    from .torus import pullback

    phi_inv = phi.inverse()
    samples = np.stack(
        [pullback(path.sample(i), phi_inv).components for i in range(path.n_samples)]
    )
    return IsotopyPath(path.model, samples, validate=False)


left_multiplied_forms = conjugate_path


def _resample(path: IsotopyPath, schedule: Schedule, out_times: np.ndarray) -> np.ndarray:
    values = schedule.value(out_times)
    slopes = schedule.derivative(out_times)
    out = np.empty((len(out_times), path.model.dim) + path.model.grid_shape)
    for i, (v, s) in enumerate(zip(values, slopes)):
        out[i] = s * path.form_at(v) if s != 0.0 else 0.0
    return out


def reparametrize(path: IsotopyPath, schedule: Schedule,
                  n_steps: int = None) -> IsotopyPath:
    """Same geometric path run along a schedule: samples r'(t) alpha_{r(t)}."""
    n = n_steps if n_steps is not None else path.n_steps
    out_times = np.linspace(0.0, 1.0, n + 1)
    return IsotopyPath(path.model, _resample(path, schedule, out_times), validate=False)


def concat_left(phi_path: IsotopyPath, psi_path: IsotopyPath,
                schedule: Schedule = SCHEDULES["smooth"],
                n_steps: int = None) -> IsotopyPath:
    """First run psi (reparametrized), then phi composed on the left of psi_1.

    The second half's generating forms are those of phi: composing with the
    fixed endpoint psi_1 on the right does not change generating forms.  The
    path's endpoint is phi_1 psi_1 and its length is additive for any schedule
    that is flat near the ends.
    """
    model = phi_path.model
    if not model.compatible(psi_path.model):
        raise ShapeError("paths live on different models")
    n = n_steps if n_steps is not None else (phi_path.n_steps + psi_path.n_steps)
    n += n % 2  # even sample count so the junction is a sample point
    t_first = np.linspace(0.0, 0.5, n // 2 + 1)
    t_second = np.linspace(0.5, 1.0, n // 2 + 1)
    first = _resample(psi_path, schedule, 2.0 * t_first) * 2.0
    second = _resample(phi_path, schedule, 2.0 * t_second - 1.0) * 2.0
    samples = np.concatenate([first[:-1], second], axis=0)
    return IsotopyPath(model, samples, validate=False)


def concat_right(phi_path: IsotopyPath, psi_path: IsotopyPath,
                 schedule: Schedule = SCHEDULES["smooth"],
                 n_steps: int = None, phi_end: DiffeoMap = None) -> IsotopyPath:
    """First run phi, then phi_1 composed on the left of psi.

    The second half's forms acquire the (phi_1^{-1}) pullback; pass ``phi_end``
    when the endpoint of phi is known analytically to skip its integration.
    """
    from .torus import pullback

    model = phi_path.model
    if not model.compatible(psi_path.model):
        raise ShapeError("paths live on different models")
    phi1 = phi_end if phi_end is not None else endpoint(phi_path)
    phi1_inv = phi1.inverse()
    pulled = np.stack(
        [
            pullback(psi_path.sample(i), phi1_inv).components
            for i in range(psi_path.n_samples)
        ]
    )
    pulled_path = IsotopyPath(model, pulled, validate=False)
    n = n_steps if n_steps is not None else (phi_path.n_steps + psi_path.n_steps)
    n += n % 2
    t_first = np.linspace(0.0, 0.5, n // 2 + 1)
    t_second = np.linspace(0.5, 1.0, n // 2 + 1)
    first = _resample(phi_path, schedule, 2.0 * t_first) * 2.0
    second = _resample(pulled_path, schedule, 2.0 * t_second - 1.0) * 2.0
    samples = np.concatenate([first[:-1], second], axis=0)
    return IsotopyPath(model, samples, validate=False)
