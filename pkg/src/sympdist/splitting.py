"""Splitting operators (closed forms -> exact forms) and the seminorms they induce.

A splitting operator mu maps closed 1-forms linearly into exact 1-forms; together
with a constant c >= 0 and a base norm on exact forms it defines the seminorm

    n(alpha) = base_norm(mu(alpha)) + c * ||alpha - mu(alpha)||_L2.

Provided families: the zero operator, the Hodge projection onto the exact part,
the pullback difference alpha -> alpha - f*alpha for a diffeomorphism f, the
contraction alpha -> d(alpha(X_H)) for an autonomous Hamiltonian H, and the
L2-orthogonal projection onto a span of exact forms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ClosednessError, ShapeError
from .torus import (
    CLOSEDNESS_TOL,
    DiffeoMap,
    OneFormField,
    TorusModel,
    exact_form_from_primitive,
    exterior_derivative_residual,
    hodge_decompose,
    inner_product,
    l2_norm,
    osc_norm,
    primitive_of_exact,
    pullback,
    spectral_gradient,
    zero_form,
)


class SplitKind(enum.Enum):
    ZERO = "zero"
    HODGE_PROJECTION = "hodge_projection"
    PULLBACK_DIFF = "pullback_diff"
    HAMILTONIAN_CONTRACTION = "hamiltonian_contraction"
    EXACT_PROJECTION = "exact_projection"


class BaseNorm(enum.Enum):
    HOFER_OSC = "hofer_osc"
    L2_ON_EXACT = "l2_on_exact"


@dataclass(frozen=True)
class SplittingOperator:
    """Descriptor for a linear map from closed to exact 1-forms."""

    kind: SplitKind
    diffeo: DiffeoMap = None
    hamiltonian: np.ndarray = None
    basis: tuple = ()
    description: str = ""

    @classmethod
    def zero(cls) -> "SplittingOperator":
        return cls(SplitKind.ZERO, description="zero operator")

    @classmethod
    def hodge_projection(cls) -> "SplittingOperator":
        return cls(SplitKind.HODGE_PROJECTION, description="exact part of the Hodge split")

    @classmethod
    def pullback_diff(cls, f: DiffeoMap) -> "SplittingOperator":
        return cls(SplitKind.PULLBACK_DIFF, diffeo=f,
                   description="alpha - f*alpha for a fixed diffeomorphism")

    @classmethod
    def hamiltonian_contraction(cls, model: TorusModel, H: np.ndarray) -> "SplittingOperator":
        H = np.asarray(H, dtype=float)
        if H.shape != model.grid_shape:
            raise ShapeError("Hamiltonian grid shape mismatch")
        return cls(SplitKind.HAMILTONIAN_CONTRACTION, hamiltonian=H,
                   description="d(alpha(X_H)) for an autonomous Hamiltonian")

    @classmethod
    def exact_projection(cls, basis) -> "SplittingOperator":
        """Orthogonal projection onto span(basis); basis is orthonormalized here."""
        ortho = _gram_schmidt(tuple(basis))
        return cls(SplitKind.EXACT_PROJECTION, basis=ortho,
                   description=f"L2 projection onto a {len(ortho)}-dim space of exact forms")


def _gram_schmidt(forms) -> tuple:
    ortho = []
    for beta in forms:
        work = beta
        for b in ortho:
            work = work - b * inner_product(work, b)
        nrm = l2_norm(work)
        if nrm > 1e-10:
            ortho.append(work * (1.0 / nrm))
    return tuple(ortho)


def hamiltonian_vector_field(model: TorusModel, H: np.ndarray) -> np.ndarray:
    """X_H with iota_{X_H} omega = dH, stacked as (2n,) + grid_shape."""
    dH = spectral_gradient(model, np.asarray(H, dtype=float))
    return np.einsum("ij,j...->i...", model.dual_matrix, dH)


def apply_splitting(op: SplittingOperator, alpha: OneFormField,
                    closedness_tol: float = CLOSEDNESS_TOL) -> OneFormField:
    """Evaluate the operator on a closed form; the result is exact.

    closedness_tol=None skips the residual gate (trusted inputs).
    """
    if closedness_tol is not None:
        res = exterior_derivative_residual(alpha)
        if res > closedness_tol:
            raise ClosednessError(res, closedness_tol)
    model = alpha.model
    if op.kind is SplitKind.ZERO:
        return zero_form(model)
    if op.kind is SplitKind.HODGE_PROJECTION:
        split = hodge_decompose(alpha, tol=None)
        return exact_form_from_primitive(model, split.primitive)
    if op.kind is SplitKind.PULLBACK_DIFF:
        return alpha - pullback(alpha, op.diffeo)
    if op.kind is SplitKind.HAMILTONIAN_CONTRACTION:
        X = hamiltonian_vector_field(model, op.hamiltonian)
        contraction = np.einsum("k...,k...->...", alpha.components, X)
        return exact_form_from_primitive(model, contraction)
    if op.kind is SplitKind.EXACT_PROJECTION:
        out = zero_form(model)
        for b in op.basis:
            out = out + b * inner_product(alpha, b)
        return out
    raise ValueError(f"unknown splitting kind {op.kind}")


@dataclass(frozen=True)
class SeminormSpec:
    """A splitting seminorm: base_norm(mu(alpha)) + c * ||alpha - mu(alpha)||_L2."""

    mu: SplittingOperator
    c: float = 1.0
    base_norm: BaseNorm = BaseNorm.HOFER_OSC
    injective: bool = False  # no provided kind is injective; kept for the norm flag

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be nonnegative")

    @property
    def is_norm(self) -> bool:
        """Non-degenerate iff c != 0 or the operator is injective."""
        return self.c != 0 or self.injective


def hofer_norm_of_exact(beta: OneFormField, tol: float = 1e-6) -> float:
    """osc of the zero-mean spectral primitive of an exact form.

    Exactness (small harmonic part) is still verified; the closedness gate is
    skipped because every operator image is exact by construction.
    """
    return osc_norm(primitive_of_exact(beta, tol=tol, closedness_tol=None))


def base_norm_value(spec: SeminormSpec, beta: OneFormField) -> float:
    if spec.base_norm is BaseNorm.HOFER_OSC:
        return hofer_norm_of_exact(beta)
    if spec.base_norm is BaseNorm.L2_ON_EXACT:
        return l2_norm(beta)
    raise ValueError(f"unknown base norm {spec.base_norm}")


def seminorm(spec: SeminormSpec, alpha: OneFormField,
             closedness_tol: float = CLOSEDNESS_TOL) -> float:
    """Evaluate the splitting seminorm on a closed form."""
    mu_alpha = apply_splitting(spec.mu, alpha, closedness_tol)
    value = base_norm_value(spec, mu_alpha)
    if spec.c != 0:
        value += spec.c * l2_norm(alpha - mu_alpha)
    return float(value)


def composition_identity_defect(f: DiffeoMap, g: DiffeoMap,
                                alpha: OneFormField) -> float:
    """L2 defect of the composition rule for pullback-difference operators.

    The operator of f o g equals the operator of f plus the operator of g
    applied after f-pullback; returns ||(id - (f o g)*) alpha - [(id - f*) alpha
    + (id - g*) f*alpha]||_L2, which vanishes analytically.
    """
    fg = f.compose(g)
    lhs = alpha - pullback(alpha, fg)
    f_alpha = pullback(alpha, f)
    rhs = (alpha - f_alpha) + (f_alpha - pullback(f_alpha, g))
    return l2_norm(lhs - rhs)


@dataclass(frozen=True)
class NormCriterionResult:
    is_norm: bool
    witness: OneFormField = None  # a nonzero closed form with seminorm 0, if any


def norm_criterion(spec: SeminormSpec, model: TorusModel) -> NormCriterionResult:
    """Decide norm vs seminorm; with c = 0, search the harmonic space for a kernel.

    The harmonic subspace is 2n-dimensional; a minimal-eigenvalue direction of
    the Gram matrix of the operator images gives a seminorm-kernel witness when
    the operator kills a harmonic direction.  All provided operator kinds do.
    """
    if spec.is_norm:
        return NormCriterionResult(is_norm=True)
    from .torus import constant_form  # local import to avoid cycle noise

    images = []
    for k in range(model.dim):
        e_k = np.zeros(model.dim)
        e_k[k] = 1.0
        images.append(apply_splitting(spec.mu, constant_form(model, e_k)))
    gram = np.array([[inner_product(a, b) for b in images] for a in images])
    vals, vecs = np.linalg.eigh(gram)
    if vals[0] > 1e-10 * max(1.0, vals[-1]):
        # operator injective on harmonics: this search finds no witness
        return NormCriterionResult(is_norm=True)
    null_vecs = vecs[:, vals <= 1e-10 * max(1.0, vals[-1])]
    # deterministic tie-break: prefer the highest coordinate axis (dy on T^2)
    coeffs = None
    for k in range(model.dim - 1, -1, -1):
        e_k = np.zeros(model.dim)
        e_k[k] = 1.0
        proj = null_vecs @ (null_vecs.T @ e_k)
        if np.linalg.norm(proj) > 1e-8:
            coeffs = proj / np.linalg.norm(proj)
            break
    if coeffs is None:
        coeffs = null_vecs[:, 0]
    witness = constant_form(model, coeffs)
    return NormCriterionResult(is_norm=False, witness=witness)
