"""Flat-torus models, discrete 1-forms, diffeomorphisms, and spectral calculus.

Everything lives on a periodic grid over T^{2n} = R^{2n} / (L_1 Z x ... x L_2n Z)
with a constant diagonal metric and a constant symplectic matrix.  Differentiation,
Poisson inversion and interpolation are all Fourier-based, so closed/exact/harmonic
bookkeeping is accurate to rounding for band-limited data.

Coordinates are ordered in symplectic pairs (x_1, y_1, x_2, y_2, ...); the default
symplectic matrix is the block diagonal of [[0, 1], [-1, 0]].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClosednessError,
    DegenerateInputError,
    ExactnessError,
    IntegrationError,
    ResolutionError,
    ShapeError,
)

# Default tolerances; individual operations accept overrides.
CLOSEDNESS_TOL = 1e-8        # precondition for Hodge decomposition
CLOSED_TAG_TOL = 1e-10       # bar for tagging a form Closed
EXACT_TAG_TOL = 1e-10        # harmonic-part bar for tagging a form Exact
SMOOTHNESS_TAIL_TOL = 1e-8   # spectral-tail bar for displacement fields
PULLBACK_TAIL_TOL = 1e-5     # resolution guard on pullback output
SYMPLECTIC_TOL = 1e-4        # L2 deviation of phi*omega from omega


def standard_symplectic_matrix(half_dim: int) -> np.ndarray:
    """Block-diagonal matrix of omega = sum dx_i ^ dy_i in paired coordinates."""
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * half_dim, 2 * half_dim))
    for i in range(half_dim):
        out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TorusModel:
    """A flat torus T^{2n} with grid resolution, metric and symplectic structure.

    ``metric_diag`` holds the (constant) diagonal metric coefficients g_k; the
    induced volume element is sqrt(prod g_k) dx.  ``symplectic_matrix`` W encodes
    omega(u, v) = u^T W v, so the form dual to a vector field X is alpha = W^T X.
    """

    half_dim: int = 1
    periods: tuple = None
    grid_res: int = 64
    metric_diag: tuple = None
    symplectic_matrix: np.ndarray = None

    def __post_init__(self):
        n = int(self.half_dim)
        if n < 1:
            raise ValueError("half_dim must be a positive integer")
        d = 2 * n
        periods = self.periods if self.periods is not None else (1.0,) * d
        periods = tuple(float(p) for p in periods)
        if len(periods) != d or any(p <= 0 for p in periods):
            raise ValueError(f"periods must be {d} positive reals")
        metric = self.metric_diag if self.metric_diag is not None else (1.0,) * d
        metric = tuple(float(g) for g in metric)
        if len(metric) != d or any(g <= 0 for g in metric):
            raise ValueError(f"metric_diag must be {d} positive reals")
        res = int(self.grid_res)
        if res < 8 or (res & (res - 1)) != 0:
            raise ValueError("grid_res must be a power of two, at least 8")
        omega = (
            self.symplectic_matrix
            if self.symplectic_matrix is not None
            else standard_symplectic_matrix(n)
        )
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (d, d):
            raise ValueError(f"symplectic_matrix must be {d}x{d}")
        if not np.allclose(omega, -omega.T, atol=1e-12 * max(1.0, np.abs(omega).max())):
            raise ValueError("symplectic_matrix must be antisymmetric")
        det = np.linalg.det(omega)
        if abs(det) < 1e-12 * max(1.0, np.abs(omega).max()) ** d:
            raise ValueError("symplectic_matrix must be invertible")
        object.__setattr__(self, "half_dim", n)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "grid_res", res)
        object.__setattr__(self, "metric_diag", metric)
        object.__setattr__(self, "symplectic_matrix", _readonly(omega))

    @property
    def dim(self) -> int:
        return 2 * self.half_dim

    @property
    def betti1(self) -> int:
        """First Betti number of the torus: 2n."""
        return self.dim

    @property
    def grid_shape(self) -> tuple:
        return (self.grid_res,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.grid_res ** self.dim

    @property
    def volume(self) -> float:
        """Riemannian volume: sqrt(det g) * prod(periods)."""
        return float(np.sqrt(np.prod(self.metric_diag)) * np.prod(self.periods))

    @property
    def dual_matrix(self) -> np.ndarray:
        """Matrix turning a 1-form into its omega-dual vector field: X = D alpha."""
        return np.linalg.inv(self.symplectic_matrix.T)

    def axis_coordinates(self, axis: int) -> np.ndarray:
        N = self.grid_res
        return np.arange(N) * (self.periods[axis] / N)

    def grid(self) -> np.ndarray:
        """Coordinate arrays, shape (2n,) + grid_shape."""
        axes = [self.axis_coordinates(k) for k in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def grid_points(self) -> np.ndarray:
        """All grid points as rows, shape (cell_count, 2n)."""
        return self.grid().reshape(self.dim, -1).T.copy()

    def wavenumbers(self, axis: int, zero_nyquist: bool = True) -> np.ndarray:
        """Angular wavenumbers along one axis; Nyquist zeroed for differentiation."""
        N = self.grid_res
        k = 2.0 * np.pi * np.fft.fftfreq(N, d=self.periods[axis] / N)
        if zero_nyquist:
            k = k.copy()
            k[N // 2] = 0.0
        return k

    def compatible(self, other: "TorusModel") -> bool:
        return (
            self.half_dim == other.half_dim
            and self.grid_res == other.grid_res
            and np.allclose(self.periods, other.periods)
            and np.allclose(self.metric_diag, other.metric_diag)
            and np.allclose(self.symplectic_matrix, other.symplectic_matrix)
        )


class Closedness(enum.Enum):
    CLOSED = "closed"
    EXACT = "exact"
    UNCHECKED = "unchecked"


# ---------------------------------------------------------------------------
# spectral helpers on grid scalar fields
# ---------------------------------------------------------------------------

def spectral_partial(model: TorusModel, f: np.ndarray, axis: int) -> np.ndarray:
    """d f / d x_axis by Fourier differentiation (Nyquist mode dropped)."""
    spec = np.fft.fftn(f)
    k = model.wavenumbers(axis)
    shape = [1] * model.dim
    shape[axis] = model.grid_res
    return np.real(np.fft.ifftn(spec * (1j * k.reshape(shape))))


def spectral_gradient(model: TorusModel, f: np.ndarray) -> np.ndarray:
    """All partials of f, stacked to shape (2n,) + grid_shape."""
    spec = np.fft.fftn(f)
    out = np.empty((model.dim,) + model.grid_shape)
    for axis in range(model.dim):
        k = model.wavenumbers(axis)
        shape = [1] * model.dim
        shape[axis] = model.grid_res
        out[axis] = np.real(np.fft.ifftn(spec * (1j * k.reshape(shape))))
    return out


def spectral_tail_fraction(model: TorusModel, fields: np.ndarray) -> float:
    """Energy fraction carried by modes with any |m| > N/3 (aliasing guard)."""
    spec = np.fft.fftn(fields, axes=tuple(range(-model.dim, 0)))
    power = np.abs(spec) ** 2
    total = power.sum()
    if total <= 0.0:
        return 0.0
    N = model.grid_res
    freqs = np.fft.fftfreq(N) * N  # integer mode numbers
    inner = np.abs(freqs) <= N / 3
    mask = np.ones(model.grid_shape, dtype=bool)
    for axis in range(model.dim):
        shape = [1] * model.dim
        shape[axis] = N
        mask &= inner.reshape(shape)
    tail = power[..., ~mask].sum()
    return float(tail / total)


def grid_mean(model: TorusModel, f: np.ndarray) -> float:
    return float(np.mean(f))


# ---------------------------------------------------------------------------
# 1-forms
# ---------------------------------------------------------------------------

class OneFormField:
    """A 1-form alpha = sum_k a_k dx_k sampled on the model grid.

    ``components`` has shape (2n,) + grid_shape.  The closedness tag is advisory
    metadata; operations re-check residuals against their own tolerances.
    """

    def __init__(self, model: TorusModel, components, tag: Closedness = Closedness.UNCHECKED,
                 validate: bool = True):
        components = np.asarray(components, dtype=float)
        if components.shape != (model.dim,) + model.grid_shape:
            raise ShapeError(
                f"components shape {components.shape} != {(model.dim,) + model.grid_shape}"
            )
        self.model = model
        self.components = _readonly(components)
        self.tag = tag
        if validate and tag is Closedness.CLOSED:
            res = exterior_derivative_residual(self)
            if res > CLOSED_TAG_TOL:
                raise ClosednessError(res, CLOSED_TAG_TOL)
        if validate and tag is Closedness.EXACT:
            res = exterior_derivative_residual(self)
            if res > CLOSED_TAG_TOL:
                raise ClosednessError(res, CLOSED_TAG_TOL)
            h = self.component_means()
            hnorm = float(np.max(np.abs(h)))
            scale = max(1.0, float(np.max(np.abs(self.components))))
            if hnorm > EXACT_TAG_TOL * scale:
                raise ExactnessError(hnorm, EXACT_TAG_TOL * scale)

    def component_means(self) -> np.ndarray:
        """Grid means of the components: the harmonic coefficients of a closed form."""
        return self.components.mean(axis=tuple(range(1, self.model.dim + 1)))

    def __add__(self, other: "OneFormField") -> "OneFormField":
        if not self.model.compatible(other.model):
            raise ShapeError("cannot add forms on incompatible models")
        tag = Closedness.UNCHECKED
        if self.tag is Closedness.EXACT and other.tag is Closedness.EXACT:
            tag = Closedness.EXACT
        elif self.tag in (Closedness.CLOSED, Closedness.EXACT) and other.tag in (
            Closedness.CLOSED,
            Closedness.EXACT,
        ):
            tag = Closedness.CLOSED
        return OneFormField(self.model, self.components + other.components, tag,
                            validate=False)

    def __sub__(self, other: "OneFormField") -> "OneFormField":
        return self + (other * -1.0)

    def __mul__(self, scalar: float) -> "OneFormField":
        return OneFormField(self.model, self.components * float(scalar), self.tag,
                            validate=False)

    __rmul__ = __mul__


def constant_form(model: TorusModel, coeffs) -> OneFormField:
    """The harmonic form sum_k c_k dx_k with constant coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (model.dim,):
        raise ShapeError(f"need {model.dim} coefficients")
    comp = np.broadcast_to(
        coeffs.reshape((model.dim,) + (1,) * model.dim), (model.dim,) + model.grid_shape
    )
    return OneFormField(model, np.array(comp), Closedness.CLOSED, validate=False)


def zero_form(model: TorusModel) -> OneFormField:
    return OneFormField(model, np.zeros((model.dim,) + model.grid_shape),
                        Closedness.EXACT, validate=False)


def exact_form_from_primitive(model: TorusModel, u: np.ndarray) -> OneFormField:
    """du for a grid function u, computed spectrally."""
    u = np.asarray(u, dtype=float)
    if u.shape != model.grid_shape:
        raise ShapeError(f"primitive shape {u.shape} != {model.grid_shape}")
    return OneFormField(model, spectral_gradient(model, u), Closedness.EXACT,
                        validate=False)


def exterior_derivative_residual(alpha: OneFormField) -> float:
    """Relative L2 size of d(alpha), normalized by the component-gradient energy.

    The denominator is floored at ||alpha|| times the fundamental wavenumber so
    that near-constant forms (whose gradient energy is rounding noise) read as
    closed instead of dividing noise by noise.  Values near rounding mean
    closed at grid scale; O(1) values mean genuinely non-closed.
    """
    model = alpha.model
    partials = np.empty((model.dim, model.dim) + model.grid_shape)
    for j in range(model.dim):
        partials[:, j] = spectral_gradient(model, alpha.components[j])
    grad_energy = float(np.mean(partials**2) * model.dim**2)
    kappa1 = 2.0 * np.pi / max(model.periods)
    form_scale = float(np.mean(alpha.components**2)) * kappa1**2
    denom = max(grad_energy, form_scale)
    if denom <= 0.0:
        return 0.0
    curl_energy = 0.0
    for i in range(model.dim):
        for j in range(i + 1, model.dim):
            curl_energy += float(np.mean((partials[i, j] - partials[j, i]) ** 2))
    return float(np.sqrt(curl_energy / denom))


@dataclass(frozen=True)
class HodgeSplit:
    """alpha = harmonic + d(primitive): constant coefficients plus a zero-mean potential."""

    harmonic: np.ndarray
    primitive: np.ndarray
    residual: float

    def reconstruct(self, model: TorusModel) -> OneFormField:
        return constant_form(model, self.harmonic) + exact_form_from_primitive(
            model, self.primitive
        )


def _poisson_primitive(model: TorusModel, components: np.ndarray) -> np.ndarray:
    """Zero-mean u with du closest (least squares) to the given component fields."""
    axes = tuple(range(1, model.dim + 1))
    spec = np.fft.fftn(components, axes=axes)
    ksq = np.zeros(model.grid_shape)
    u_hat = np.zeros(model.grid_shape, dtype=complex)
    for axis in range(model.dim):
        k = model.wavenumbers(axis)
        shape = [1] * model.dim
        shape[axis] = model.grid_res
        k = k.reshape(shape)
        ksq = ksq + k**2
        u_hat = u_hat + (-1j) * k * spec[axis]
    mask = ksq > 0
    u_hat[mask] /= ksq[mask]
    u_hat[~mask] = 0.0
    return np.real(np.fft.ifftn(u_hat))


def hodge_decompose(alpha: OneFormField, tol: float = CLOSEDNESS_TOL) -> HodgeSplit:
    """Split a closed form into constant harmonic part and exact part.

    On the flat torus the harmonic coefficients are exactly the component means
    (for any constant diagonal metric), and the primitive solves a spectral
    Poisson problem.  Raises ClosednessError when the input residual exceeds
    tol; tol=None skips the gate for callers whose samples are closed by
    construction.
    """
    if tol is not None:
        res = exterior_derivative_residual(alpha)
        if res > tol:
            raise ClosednessError(res, tol)
    model = alpha.model
    harmonic = alpha.component_means()
    remainder = alpha.components - harmonic.reshape((model.dim,) + (1,) * model.dim)
    u = _poisson_primitive(model, remainder)
    du = spectral_gradient(model, u)
    scale = float(np.sqrt(np.mean(alpha.components**2)))
    err = float(np.sqrt(np.mean((remainder - du) ** 2)))
    rel = err / scale if scale > 0 else err
    return HodgeSplit(harmonic=_readonly(harmonic), primitive=_readonly(u), residual=rel)


def primitive_of_exact(alpha: OneFormField, tol: float = 1e-6,
                       closedness_tol: float = CLOSEDNESS_TOL) -> np.ndarray:
    """Zero-mean primitive of an exact form; raises if the harmonic part is visible."""
    split = hodge_decompose(alpha, tol=closedness_tol)
    scale = max(1.0, float(np.max(np.abs(alpha.components))))
    hnorm = float(np.max(np.abs(split.harmonic)))
    if hnorm > tol * scale:
        raise ExactnessError(hnorm, tol * scale)
    return split.primitive


# ---------------------------------------------------------------------------
# norms and inner products
# ---------------------------------------------------------------------------

def inner_product(alpha: OneFormField, beta: OneFormField,
                  metric_diag=None, conformal=None) -> float:
    """L2 inner product of 1-forms for a diagonal metric, optionally conformal.

    With g = rho * diag(g_k) on T^{2n}, the 1-form inner product integrand is
    rho^{n-1} sum_k a_k b_k / g_k weighted by sqrt(det g0).
    """
    model = alpha.model
    if not model.compatible(beta.model):
        raise ShapeError("incompatible models")
    g = np.asarray(metric_diag if metric_diag is not None else model.metric_diag,
                   dtype=float)
    integrand = np.zeros(model.grid_shape)
    for k in range(model.dim):
        integrand += alpha.components[k] * beta.components[k] / g[k]
    if conformal is not None:
        rho = np.asarray(conformal, dtype=float)
        if rho.shape != model.grid_shape:
            raise ShapeError("conformal factor shape mismatch")
        integrand = integrand * rho ** (model.half_dim - 1)
    vol = float(np.sqrt(np.prod(g)) * np.prod(model.periods))
    return float(np.mean(integrand) * vol)


def l2_norm(alpha: OneFormField, metric_diag=None, conformal=None) -> float:
    """(integral of g(alpha, alpha) dvol)^(1/2) by grid quadrature."""
    return float(np.sqrt(max(inner_product(alpha, alpha, metric_diag, conformal), 0.0)))


def harmonic_l2_norm(model: TorusModel, coeffs) -> float:
    """Closed-form L2 norm of the constant form with the given coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    g = np.asarray(model.metric_diag)
    sq = float(np.sum(coeffs**2 / g) * np.sqrt(np.prod(g)) * np.prod(model.periods))
    return float(np.sqrt(max(sq, 0.0)))


def osc_norm(u: np.ndarray) -> float:
    """max - min over grid points (the Hofer-style norm of a primitive)."""
    u = np.asarray(u)
    return float(u.max() - u.min())


def codifferential(alpha: OneFormField, metric_diag=None, conformal=None) -> np.ndarray:
    """delta_g alpha for a diagonal metric with optional conformal factor rho.

    For g = rho * g0: delta alpha = -rho^{-n} sum_k (1/g0_k) d_k(rho^{n-1} a_k).
    """
    model = alpha.model
    g = np.asarray(metric_diag if metric_diag is not None else model.metric_diag,
                   dtype=float)
    n = model.half_dim
    if conformal is None:
        rho_pow = None
    else:
        rho = np.asarray(conformal, dtype=float)
        rho_pow = rho ** (n - 1)
    out = np.zeros(model.grid_shape)
    for k in range(model.dim):
        a = alpha.components[k] if rho_pow is None else alpha.components[k] * rho_pow
        out -= spectral_partial(model, a, k) / g[k]
    if conformal is not None:
        out = out / np.asarray(conformal, dtype=float) ** n
    return out


def scalar_inner_product(model: TorusModel, f: np.ndarray, h: np.ndarray,
                         metric_diag=None, conformal=None) -> float:
    """L2 inner product of grid functions with the metric volume weight."""
    g = np.asarray(metric_diag if metric_diag is not None else model.metric_diag,
                   dtype=float)
    integrand = np.asarray(f) * np.asarray(h)
    if conformal is not None:
        integrand = integrand * np.asarray(conformal) ** model.half_dim
    vol = float(np.sqrt(np.prod(g)) * np.prod(model.periods))
    return float(np.mean(integrand) * vol)


# ---------------------------------------------------------------------------
# trigonometric interpolation at arbitrary points
# ---------------------------------------------------------------------------

def fourier_eval(model: TorusModel, fields: np.ndarray, points: np.ndarray,
                 chunk: int = 8192) -> np.ndarray:
    """Evaluate grid fields at arbitrary points via their trigonometric interpolant.

    fields: (C,) + grid_shape real arrays; points: (P, 2n).  Returns (C, P).
    Periodicity is automatic (complex exponentials), so points need no wrapping.
    """
    fields = np.asarray(fields, dtype=float)
    single = fields.ndim == model.dim
    if single:
        fields = fields[None]
    if fields.shape[1:] != model.grid_shape:
        raise ShapeError("field shape mismatch")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != model.dim:
        raise ShapeError("points must have 2n columns")
    axes = tuple(range(1, model.dim + 1))
    spec = np.fft.fftn(fields, axes=axes) / model.cell_count
    P = points.shape[0]
    C = fields.shape[0]
    out = np.empty((C, P))
    ks = [model.wavenumbers(axis, zero_nyquist=False) for axis in range(model.dim)]
    for start in range(0, P, chunk):
        stop = min(start + chunk, P)
        pts = points[start:stop]
        # contract one spatial axis at a time: (C, p, N, N, ...) -> (C, p)
        cur = None
        for axis in range(model.dim):
            phase = np.exp(1j * np.outer(pts[:, axis], ks[axis]))  # (p, N)
            if cur is None:
                cur = np.einsum("pn,cn...->cp...", phase, spec)
            else:
                cur = np.einsum("pn,cpn...->cp...", phase, cur)
        out[:, start:stop] = cur.real
    return out[0] if single else out


# ---------------------------------------------------------------------------
# diffeomorphisms
# ---------------------------------------------------------------------------

class DiffeoMap:
    """A map x -> x + v(x) (mod periods) given by a periodic displacement field.

    ``displacement`` has shape (2n,) + grid_shape.  Composition and evaluation
    use trigonometric interpolation; the Jacobian uses spectral differentiation.
    """

    def __init__(self, model: TorusModel, displacement,
                 check_smoothness: bool = True,
                 symplectic_tol: float = SYMPLECTIC_TOL,
                 jacobian_fields: np.ndarray = None):
        displacement = np.asarray(displacement, dtype=float)
        if displacement.shape != (model.dim,) + model.grid_shape:
            raise ShapeError("displacement shape mismatch")
        self.model = model
        self.displacement = _readonly(displacement)
        self.symplectic_tol = float(symplectic_tol)
        if check_smoothness:
            tail = spectral_tail_fraction(model, displacement)
            if tail > SMOOTHNESS_TAIL_TOL:
                raise ResolutionError(tail, SMOOTHNESS_TAIL_TOL)
        if jacobian_fields is not None:
            jacobian_fields = np.asarray(jacobian_fields, dtype=float)
            if jacobian_fields.shape != (model.dim, model.dim) + model.grid_shape:
                raise ShapeError("jacobian_fields shape mismatch")
            jacobian_fields = _readonly(jacobian_fields)
        self._jacobian = jacobian_fields

    @classmethod
    def identity(cls, model: TorusModel) -> "DiffeoMap":
        return cls(model, np.zeros((model.dim,) + model.grid_shape))

    @classmethod
    def translation(cls, model: TorusModel, vector) -> "DiffeoMap":
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (model.dim,):
            raise ShapeError(f"need a {model.dim}-vector")
        disp = np.broadcast_to(
            vector.reshape((model.dim,) + (1,) * model.dim),
            (model.dim,) + model.grid_shape,
        )
        return cls(model, np.array(disp))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Map arbitrary points (P, 2n) -> (P, 2n), in the covering space."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        disp = fourier_eval(self.model, self.displacement, points)
        return points + disp.T

    def mapped_grid(self) -> np.ndarray:
        """phi(grid) with exact (non-interpolated) displacement values, (2n,)+grid."""
        return self.model.grid() + self.displacement

    def jacobian(self) -> np.ndarray:
        """J[k, j] = d phi_j / d x_k on the grid, shape (2n, 2n) + grid_shape.

        Uses an exact Jacobian when one was supplied at construction (analytic
        map families), otherwise spectral differentiation of the displacement.
        """
        if self._jacobian is None:
            model = self.model
            J = np.zeros((model.dim, model.dim) + model.grid_shape)
            for j in range(model.dim):
                grad = spectral_gradient(model, self.displacement[j])
                for k in range(model.dim):
                    J[k, j] = grad[k]
                J[j, j] += 1.0
            self._jacobian = _readonly(J)
        return self._jacobian

    def jacobian_at(self, points: np.ndarray) -> np.ndarray:
        """Jacobian interpolated at arbitrary points, shape (P, 2n, 2n) as J[p][k, j]."""
        model = self.model
        flat = self.jacobian().reshape(model.dim * model.dim, *model.grid_shape)
        vals = fourier_eval(model, flat, points)
        return vals.T.reshape(-1, model.dim, model.dim)

    def compose(self, other: "DiffeoMap") -> "DiffeoMap":
        """self after other: x -> self(other(x)), with chain-rule Jacobian."""
        if not self.model.compatible(other.model):
            raise ShapeError("incompatible models")
        model = self.model
        inner = other.mapped_grid().reshape(model.dim, -1).T
        outer_disp = fourier_eval(model, self.displacement, inner)
        disp = other.displacement + outer_disp.reshape((model.dim,) + model.grid_shape)
        J_outer = self.jacobian_at(inner)  # (P, l, j) at other(x)
        J_inner = other.jacobian()  # (k, l) + grid
        P = inner.shape[0]
        J_inner_p = J_inner.reshape(model.dim, model.dim, P)
        chain = np.einsum("klp,plj->kjp", J_inner_p, J_outer)
        chain = chain.reshape((model.dim, model.dim) + model.grid_shape)
        return DiffeoMap(model, disp, check_smoothness=False, jacobian_fields=chain)

    def inverse(self, max_iter: int = 50, tol: float = 1e-12) -> "DiffeoMap":
        """Newton inverse: solve x + v(x) = y at each grid point y."""
        model = self.model
        y = model.grid().reshape(model.dim, -1).T
        x = y.copy()
        scale = max(1.0, float(np.max(np.abs(self.displacement))))
        for _ in range(max_iter):
            residual = x + fourier_eval(model, self.displacement, x).T - y
            err = float(np.max(np.abs(residual)))
            if err < tol * scale:
                break
            DF = self.jacobian_at(x).transpose(0, 2, 1)  # dF_j/dx_k at each point
            x = x - np.linalg.solve(DF, residual[..., None])[..., 0]
        else:
            raise IntegrationError(
                f"map inversion did not converge (residual {err:.2e}); map too strong"
            )
        disp = (x - y).T.reshape((model.dim,) + model.grid_shape)
        # J_{phi^-1}(y) = J_phi(phi^-1(y))^-1 (in the d phi_j / d x_k convention,
        # the stored array transposes to the conventional matrix and back)
        J_at = self.jacobian_at(x)  # (P, k, j) = d phi_j/d x_k at phi^-1(y)
        J_inv = np.linalg.inv(J_at.transpose(0, 2, 1)).transpose(0, 2, 1)
        J_fields = J_inv.transpose(1, 2, 0).reshape((model.dim, model.dim) + model.grid_shape)
        return DiffeoMap(model, disp, check_smoothness=False, jacobian_fields=J_fields)

    def symplectic_deviation(self) -> float:
        """Relative L2 norm of phi*omega - omega (constant-coefficient omega)."""
        model = self.model
        J = self.jacobian()
        W = model.symplectic_matrix
        pulled = np.einsum("ki...,ij,lj...->kl...", J, W, J)
        diff = pulled - W.reshape(W.shape + (1,) * model.dim)
        num = float(np.sqrt(np.mean(np.sum(diff**2, axis=(0, 1)))))
        den = float(np.sqrt(np.sum(W**2)))
        return num / den

    def is_symplectic(self, tol: float = None) -> bool:
        return self.symplectic_deviation() <= (tol if tol is not None else self.symplectic_tol)


def hamiltonian_shear(model: TorusModel, amplitude: float, mode: int = 1,
                      profile_axis: int = 0, time: float = 1.0) -> DiffeoMap:
    """Time-t flow of H = amplitude * cos(2 pi * mode * x_a / L_a).

    dH is supported on the profile axis, so the dual field is a shear; the flow
    is exact: displacement = -t * D dH with D the duality matrix.
    """
    coords = model.axis_coordinates(profile_axis)
    L = model.periods[profile_axis]
    dH_profile = -amplitude * 2.0 * np.pi * mode / L * np.sin(2.0 * np.pi * mode * coords / L)
    shape = [1] * model.dim
    shape[profile_axis] = model.grid_res
    dH = np.zeros((model.dim,) + model.grid_shape)
    dH[profile_axis] = np.broadcast_to(dH_profile.reshape(shape), model.grid_shape)
    X = np.einsum("ij,j...->i...", model.dual_matrix, dH)
    if float(np.max(np.abs(X[profile_axis]))) > 1e-12 * max(1.0, abs(amplitude)):
        raise ValueError("shear construction requires the dual field transverse to the profile axis")
    return DiffeoMap(model, time * X)


def twist_map(model: TorusModel, center, radius: float, angle: float,
              power: int = 6) -> DiffeoMap:
    """Compactly supported symplectomorphism of T^2: rotate by a(r) inside a disc.

    a(r) = angle * (1 - (r/R)^2)^power; this is the time-1 flow of the radial
    Hamiltonian with H'(r) = -r a(r), hence exactly area-preserving and supported
    in the disc.  The Jacobian is supplied in closed form, so the map is exactly
    the identity (Jacobian included) outside the disc.  Only for half_dim == 1.
    """
    if model.half_dim != 1:
        raise ShapeError("twist maps are built on T^2 models")
    center = np.asarray(center, dtype=float)
    grid = model.grid()
    # shortest periodic offsets from the center
    dx = grid[0] - center[0]
    dy = grid[1] - center[1]
    Lx, Ly = model.periods
    dx = (dx + Lx / 2) % Lx - Lx / 2
    dy = (dy + Ly / 2) % Ly - Ly / 2
    q = (dx**2 + dy**2) / radius**2
    base = np.clip(1.0 - q, 0.0, None)
    a = angle * base**power
    # da/dq, with the (1-q)^(power-1) factor kept separate for q >= 1
    da_dq = -angle * power * base ** (power - 1) / radius**2 * np.ones_like(q)
    da = np.stack([da_dq * 2.0 * dx, da_dq * 2.0 * dy])  # grad of a(x)
    ca, sa = np.cos(a), np.sin(a)
    disp = np.stack([ca * dx - sa * dy - dx, sa * dx + ca * dy - dy])
    # d_k phi_j = R(a)[j,k] + R'(a)[j,l] w_l * d_k a
    w = np.stack([dx, dy])
    R = np.stack([np.stack([ca, -sa]), np.stack([sa, ca])])        # R[j,l]
    Rp = np.stack([np.stack([-sa, -ca]), np.stack([ca, -sa])])     # dR/da
    Rw = np.einsum("jl...,l...->j...", Rp, w)
    J = np.empty((2, 2) + model.grid_shape)
    for k in range(2):
        for j in range(2):
            J[k, j] = R[j, k] + Rw[j] * da[k]
    return DiffeoMap(model, disp, jacobian_fields=J)


def pullback(alpha: OneFormField, phi: DiffeoMap,
             tail_tol: float = PULLBACK_TAIL_TOL) -> OneFormField:
    """phi^* alpha: interpolate alpha at phi(x) and contract with the Jacobian.

    Raises ResolutionError when the result has visible aliasing (spectral tail
    above tail_tol), which signals that the grid is too coarse for this pair.
    """
    model = alpha.model
    if not model.compatible(phi.model):
        raise ShapeError("form and map live on different models")
    points = phi.mapped_grid().reshape(model.dim, -1).T
    vals = fourier_eval(model, alpha.components, points)
    vals = vals.reshape((model.dim,) + model.grid_shape)
    J = phi.jacobian()
    out = np.einsum("kj...,j...->k...", J, vals)
    tail = spectral_tail_fraction(model, out)
    if tail > tail_tol:
        raise ResolutionError(tail, tail_tol)
    result = OneFormField(model, out, Closedness.UNCHECKED, validate=False)
    if alpha.tag in (Closedness.CLOSED, Closedness.EXACT):
        res = exterior_derivative_residual(result)
        if res <= CLOSED_TAG_TOL:
            result.tag = Closedness.CLOSED
    return result


# ---------------------------------------------------------------------------
# random data for tests and probes
# ---------------------------------------------------------------------------

def random_scalar_field(model: TorusModel, rng: np.random.Generator,
                        max_mode: int = None, scale: float = 1.0) -> np.ndarray:
    """Smooth random zero-mean band-limited grid function."""
    N = model.grid_res
    K = max_mode if max_mode is not None else max(1, N // 8)
    spec = np.zeros(model.grid_shape, dtype=complex)
    freqs = (np.fft.fftfreq(N) * N).astype(int)
    idx = [np.where(np.abs(freqs) <= K)[0] for _ in range(model.dim)]
    mesh = np.meshgrid(*idx, indexing="ij")
    sel = tuple(m.ravel() for m in mesh)
    vals = rng.normal(size=len(sel[0])) + 1j * rng.normal(size=len(sel[0]))
    spec[sel] = vals
    spec[(0,) * model.dim] = 0.0
    f = np.real(np.fft.ifftn(spec))
    fmax = np.max(np.abs(f))
    if fmax > 0:
        f = f * (scale / fmax)
    return f


def random_closed_form(model: TorusModel, rng: np.random.Generator,
                       max_mode: int = None, harmonic_scale: float = 1.0,
                       exact_scale: float = 1.0) -> OneFormField:
    """Random closed form: constant coefficients plus d(random potential)."""
    h = rng.normal(size=model.dim) * harmonic_scale
    u = random_scalar_field(model, rng, max_mode, exact_scale)
    return constant_form(model, h) + exact_form_from_primitive(model, u)


def bump_function(model: TorusModel, center, radius: float,
                  amplitude: float = 1.0, power: int = 4) -> np.ndarray:
    """Compactly supported bump amplitude*(1 - (r/R)^2)^power inside the disc."""
    center = np.asarray(center, dtype=float)
    if center.shape != (model.dim,):
        raise ShapeError("bump center needs 2n coordinates")
    grid = model.grid()
    r2 = np.zeros(model.grid_shape)
    for k in range(model.dim):
        d = grid[k] - center[k]
        L = model.periods[k]
        d = (d + L / 2) % L - L / 2
        r2 += d**2
    prof = np.clip(1.0 - r2 / radius**2, 0.0, None) ** power
    if float(prof.max()) <= 0.0:
        raise DegenerateInputError("bump support does not meet the grid")
    return amplitude * prof
