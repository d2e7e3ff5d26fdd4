"""Numerical probes: pullback invariance of seminorms, orbit independence,
non-harmonic closed forms, and non-minimizing right concatenations.

These experiments quantify structural facts about splitting operators.  The
invariance probe samples the ratio base_norm(mu(phi* alpha)) / base_norm(mu(alpha))
over map/form families; a ratio different from 1 (or a vanishing denominator
with a non-vanishing numerator) witnesses that the seminorm is not invariant
under the pullback action.  The orbit probe builds compactly supported
Hamiltonian flows in a disc and certifies linear independence of the pulled
forms.  The non-harmonic construction produces a closed form that no metric in
a sampled family makes harmonic, with a quadrature certificate.  The right
concatenation demo measures the strict length excess of factoring a path
through a fixed harmonic translation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .paths import (
    SCHEDULES,
    IsotopyPath,
    concat_left,
    concat_right,
    constant_form_path,
)
from .splitting import SeminormSpec, SplitKind, apply_splitting, base_norm_value
from .torus import (
    DiffeoMap,
    OneFormField,
    TorusModel,
    bump_function,
    codifferential,
    constant_form,
    exact_form_from_primitive,
    fourier_eval,
    hamiltonian_shear,
    hodge_decompose,
    inner_product,
    l2_norm,
    osc_norm,
    pullback,
    scalar_inner_product,
    twist_map,
)
from .distances import length_banyaga

RATIO_DENOMINATOR_FLOOR = 1e-10
INVARIANCE_RATIO_TOL = 1e-4


# ---------------------------------------------------------------------------
# pullback invariance of base_norm o mu
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvarianceProbeResult:
    """Sampled ratios of the operator seminorm before/after pullback."""

    spec: SeminormSpec
    ratios: np.ndarray                  # finite ratios with denominators above floor
    sup_ratio: float
    violations: int                     # ratios away from 1 beyond tolerance
    zero_denominator_hits: int          # denominator ~ 0 but numerator visible
    excluded: int                       # 0/0 pairs dropped from the statistics
    n_pairs: int
    trivial: bool = False               # the zero operator: nothing to measure

    @property
    def violates_invariance(self) -> bool:
        return self.violations > 0 or self.zero_denominator_hits > 0

    def worst_ratio_deviation(self) -> float:
        if len(self.ratios) == 0:
            return 0.0
        return float(np.max(np.abs(self.ratios - 1.0)))


def default_map_family(model: TorusModel, rng: np.random.Generator,
                       n_each: int = 6) -> list:
    """Translations, shears in both axes, and twists at random centers.

    Translation vectors snap to grid multiples: shifts then permute the grid
    exactly, so osc-type norms see the genuine pullback action instead of
    between-node sampling error.
    """
    maps = []
    N = model.grid_res
    for _ in range(n_each):
        vec = np.round(rng.uniform(size=model.dim) * N) / N * np.asarray(model.periods)
        maps.append(DiffeoMap.translation(model, vec))
    for i in range(n_each):
        axis = i % model.dim
        amp = 0.02 + 0.05 * rng.uniform()
        maps.append(hamiltonian_shear(model, amp, profile_axis=axis))
    if model.half_dim == 1:
        for _ in range(n_each):
            center = rng.uniform(size=2)
            maps.append(twist_map(model, center, 0.2 + 0.1 * rng.uniform(),
                                  0.3 + 0.5 * rng.uniform()))
    return maps


def default_form_family(model: TorusModel, rng: np.random.Generator,
                        n_each: int = 6, max_mode: int = 2) -> list:
    """Harmonic, exact, and mixed closed forms."""
    from .torus import random_scalar_field

    forms = []
    for _ in range(n_each):
        forms.append(constant_form(model, rng.normal(size=model.dim)))
    for _ in range(n_each):
        u = random_scalar_field(model, rng, max_mode=max_mode, scale=0.5)
        forms.append(exact_form_from_primitive(model, u))
    for _ in range(n_each):
        u = random_scalar_field(model, rng, max_mode=max_mode, scale=0.5)
        forms.append(
            constant_form(model, rng.normal(size=model.dim))
            + exact_form_from_primitive(model, u)
        )
    return forms


def invariance_defect(spec: SeminormSpec, maps, forms,
                      closedness_tol: float = 1e-4,
                      ratio_tol: float = INVARIANCE_RATIO_TOL) -> InvarianceProbeResult:
    """Sample base_norm(mu(phi* alpha)) / base_norm(mu(alpha)) over all pairs.

    Pullbacks of sampled forms carry interpolation-level closedness residuals,
    so the operator is applied with a relaxed closedness gate; the measured
    ratios are far coarser than that error.
    """
    if spec.mu.kind is SplitKind.ZERO:
        n = len(maps) * len(forms)
        return InvarianceProbeResult(
            spec=spec, ratios=np.array([]), sup_ratio=1.0, violations=0,
            zero_denominator_hits=0, excluded=n, n_pairs=n, trivial=True,
        )
    ratios = []
    zero_hits = 0
    excluded = 0
    scale_floor = RATIO_DENOMINATOR_FLOOR
    for alpha in forms:
        denom = base_norm_value(spec, apply_splitting(spec.mu, alpha, closedness_tol))
        for phi in maps:
            pulled = pullback(alpha, phi)
            numer = base_norm_value(
                spec, apply_splitting(spec.mu, pulled, closedness_tol)
            )
            if denom <= scale_floor:
                if numer > max(100.0 * scale_floor, 1e-6):
                    zero_hits += 1
                else:
                    excluded += 1
                continue
            ratios.append(numer / denom)
    ratios = np.array(ratios)
    violations = int(np.sum(np.abs(ratios - 1.0) > ratio_tol)) if len(ratios) else 0
    sup_ratio = float(np.max(ratios)) if len(ratios) else 0.0
    return InvarianceProbeResult(
        spec=spec, ratios=ratios, sup_ratio=sup_ratio, violations=violations,
        zero_denominator_hits=zero_hits, excluded=excluded,
        n_pairs=len(maps) * len(forms),
    )


# ---------------------------------------------------------------------------
# orbit independence in a disc
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitRankResult:
    rank: int
    min_singular_value: float
    gram: np.ndarray


def disc_supported_flows(model: TorusModel, center, radius: float, k: int,
                         base_angle: float = 0.9) -> list:
    """k distinct compactly supported Hamiltonian flow maps inside the disc.

    Radial twist maps: exact time-1 flows of radial bump Hamiltonians, stacked
    with varied radii and angles (the first is the identity).
    """
    maps = [DiffeoMap.identity(model)]
    for j in range(1, k):
        r_j = radius * (0.55 + 0.45 * j / max(k - 1, 1))
        a_j = base_angle * (0.35 + 0.65 * j / max(k - 1, 1)) * (-1.0) ** j
        maps.append(twist_map(model, center, r_j, a_j))
    return maps[:k]


def orbit_rank(beta: OneFormField, k: int, center=(0.5, 0.5),
               radius: float = 0.3, rank_rtol: float = 1e-8) -> OrbitRankResult:
    """Numerical rank of {phi_j^* beta} for disc-supported Hamiltonian flows.

    The forms are normalized before the Gram matrix, so the reported smallest
    singular value is relative to unit vectors.  Raises DegenerateInputError
    when beta is constant over the disc (no flow can move it).
    """
    model = beta.model
    if k < 1:
        raise ValueError("k must be positive")
    grid = model.grid()
    r2 = np.zeros(model.grid_shape)
    for a in range(model.dim):
        d = grid[a] - center[a]
        L = model.periods[a]
        d = (d + L / 2) % L - L / 2
        r2 += d**2
    inside = r2 <= radius**2
    # the orbit is trivial exactly when the form vanishes over the disc: flows
    # supported there then fix it (a nonzero constant form still moves, by the
    # exact part of its pullback)
    magnitude = float(np.max(np.abs(beta.components[:, inside])))
    if magnitude <= 1e-12:
        raise DegenerateInputError("form vanishes on the disc; orbit is trivial")
    pulled = []
    for phi in disc_supported_flows(model, center, radius, k):
        p = pullback(beta, phi)
        nrm = l2_norm(p)
        if nrm <= 1e-14:
            raise DegenerateInputError("pulled form vanishes")
        pulled.append(p * (1.0 / nrm))
    gram = np.array([[inner_product(a, b) for b in pulled] for a in pulled])
    vals = np.linalg.eigvalsh(gram)
    vals = np.clip(vals, 0.0, None)
    rank = int(np.sum(vals > rank_rtol * vals[-1]))
    return OrbitRankResult(rank=rank, min_singular_value=float(np.sqrt(vals[0])),
                           gram=gram)


# ---------------------------------------------------------------------------
# closed forms that are never harmonic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonharmonicCertificate:
    form: OneFormField                  # the constructed closed form
    bump: np.ndarray                    # the compactly supported function f'
    pairings: np.ndarray                # <df', form>_g per sampled metric
    codifferential_norms: np.ndarray    # ||delta_g form||_L2 per sampled metric
    identity_defects: np.ndarray        # |<f', delta form> - <df', form>| per metric
    metrics: list                       # the sampled (diag, conformal) pairs

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.pairings > 0.0))


def sample_metrics(model: TorusModel, rng: np.random.Generator,
                   n_diagonal: int = 10, n_conformal: int = 10,
                   conformal_max_mode: int = 2) -> list:
    """Flat metric, random diagonal metrics, and random conformal factors."""
    from .torus import random_scalar_field

    metrics = [(np.ones(model.dim), None)]
    for _ in range(n_diagonal):
        metrics.append((np.exp(rng.normal(size=model.dim) * 0.4), None))
    for _ in range(n_conformal):
        f = random_scalar_field(model, rng, max_mode=conformal_max_mode, scale=0.3)
        rho = np.exp(f)  # bounded in roughly [0.5, 2]
        diag = np.exp(rng.normal(size=model.dim) * 0.2)
        metrics.append((diag, rho))
    return metrics


def local_primitive(alpha: OneFormField, center, radius: float) -> np.ndarray:
    """A function with df = alpha inside the disc, smoothly cut off outside.

    Radial line integration from the disc center (the disc is contractible and
    alpha closed, so the integral is path-independent there), multiplied by a
    smooth plateau cutoff that is exactly 1 on the disc and vanishes beyond
    twice its radius.
    """
    model = alpha.model
    center = np.asarray(center, dtype=float)
    grid = model.grid()
    offsets = np.zeros((model.dim,) + model.grid_shape)
    for a in range(model.dim):
        d = grid[a] - center[a]
        L = model.periods[a]
        offsets[a] = (d + L / 2) % L - L / 2
    # Gauss-Legendre nodes on [0, 1] for the radial integral
    nodes, weights = np.polynomial.legendre.leggauss(24)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    flat_offsets = offsets.reshape(model.dim, -1).T
    f = np.zeros(flat_offsets.shape[0])
    for s, w in zip(nodes, weights):
        pts = center[None, :] + s * flat_offsets
        vals = fourier_eval(model, alpha.components, pts)  # (dim, P)
        f += w * np.einsum("ap,pa->p", vals, flat_offsets)
    f = f.reshape(model.grid_shape)
    r2 = np.sum(offsets**2, axis=0)
    q = np.clip((np.sqrt(r2) - radius) / radius, 0.0, 1.0)
    plateau = (1.0 - q**2) ** 4  # 1 on the disc, 0 at distance 2 * radius
    return f * plateau


def nonharmonic_closed_form(alpha: OneFormField, center=(0.5, 0.5),
                            disc_radius: float = 0.2,
                            inner_radius: float = 0.12,
                            bump_amplitude: float = 1.0,
                            metrics=None, rng=None,
                            margin: float = 1e-6) -> NonharmonicCertificate:
    """Build a closed form that is non-harmonic for every sampled metric.

    Starting from a non-exact closed form, subtract the differential of a local
    primitive so the result vanishes on an inner disc, then add the
    differential of a bump supported there.  For any metric, pairing the
    result with the bump differential integrates the squared bump gradient,
    which is strictly positive, so the codifferential cannot vanish.
    """
    model = alpha.model
    split = hodge_decompose(alpha)
    if float(np.max(np.abs(split.harmonic))) <= 1e-10:
        raise DegenerateInputError("construction needs a non-exact closed form")
    if bump_amplitude == 0.0:
        raise DegenerateInputError("a vanishing bump certifies nothing")
    if inner_radius >= disc_radius:
        raise ShapeError("inner disc must sit strictly inside the outer disc")
    f_local = local_primitive(alpha, center, disc_radius)
    alpha_prime = alpha - exact_form_from_primitive(model, f_local)
    bump = bump_function(model, center, inner_radius, bump_amplitude)
    form = alpha_prime + exact_form_from_primitive(model, bump)
    if metrics is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        metrics = sample_metrics(model, rng)
    d_bump = exact_form_from_primitive(model, bump)
    pairings = np.empty(len(metrics))
    codiff_norms = np.empty(len(metrics))
    defects = np.empty(len(metrics))
    for i, (diag, rho) in enumerate(metrics):
        pairings[i] = inner_product(d_bump, form, metric_diag=diag, conformal=rho)
        delta = codifferential(form, metric_diag=diag, conformal=rho)
        codiff_norms[i] = float(
            np.sqrt(max(scalar_inner_product(model, delta, delta, diag, rho), 0.0))
        )
        lhs = scalar_inner_product(model, bump, delta, diag, rho)
        defects[i] = abs(lhs - pairings[i])
    cert = NonharmonicCertificate(
        form=form, bump=bump, pairings=pairings,
        codifferential_norms=codiff_norms, identity_defects=defects,
        metrics=list(metrics),
    )
    if not np.all(pairings > margin):
        raise DegenerateInputError(
            f"certificate not positive (min pairing {pairings.min():.3e}); "
            "enlarge the bump or the grid"
        )
    return cert


# ---------------------------------------------------------------------------
# non-minimizing right concatenations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RightConcatExcess:
    excess: float                 # Banyaga length of the right concat minus the sum
    left_control: float           # same quantity for the left concatenation
    predicted: float              # osc of the pullback potential of the harmonic form
    harmonic_length: float
    hamiltonian_length: float


def right_concat_excess(phi_path: IsotopyPath, phi_end: DiffeoMap,
                        harmonic_coeffs, n_steps: int = None,
                        min_displacement: float = 1e-6) -> RightConcatExcess:
    """Measure the strict Banyaga-length excess of factoring through a
    harmonic translation path.

    The second factor is the constant path of the harmonic form; right
    concatenation pulls it back by the first factor's endpoint, adding exactly
    the osc of the pullback's potential.  Left concatenation is the additive
    control.  Degenerate first factors (endpoint at the identity) are refused.
    """
    model = phi_path.model
    if float(np.max(np.abs(phi_end.displacement))) < min_displacement:
        raise DegenerateInputError("first factor is too close to the identity")
    h_form = constant_form(model, harmonic_coeffs)
    psi_path = constant_form_path(h_form, phi_path.n_steps)
    l_phi = length_banyaga(phi_path)
    l_psi = length_banyaga(psi_path)
    right = concat_right(phi_path, psi_path, SCHEDULES["smooth"],
                         n_steps=n_steps, phi_end=phi_end)
    left = concat_left(phi_path, psi_path, SCHEDULES["smooth"], n_steps=n_steps)
    l_right = length_banyaga(right)
    l_left = length_banyaga(left)
    pulled = pullback(h_form, phi_end.inverse())
    split = hodge_decompose(pulled, tol=1e-4)
    predicted = osc_norm(split.primitive)
    return RightConcatExcess(
        excess=float(l_right - l_phi - l_psi),
        left_control=float(l_left - l_phi - l_psi),
        predicted=float(predicted),
        harmonic_length=float(l_psi),
        hamiltonian_length=float(l_phi),
    )
