"""Numerical symplectic geometry on flat tori.

Splitting seminorms on closed 1-forms, length functionals and pseudo-distances
on the symplectomorphism group, the flux morphism and flux lattice, and the
non-degenerate distance to the Hamiltonian diffeomorphism group, with a CLI
for reproducible scenario reports.
"""

__version__ = "0.1.0"

from .torus import (
    Closedness,
    DiffeoMap,
    HodgeSplit,
    OneFormField,
    TorusModel,
    constant_form,
    exact_form_from_primitive,
    exterior_derivative_residual,
    fourier_eval,
    hamiltonian_shear,
    harmonic_l2_norm,
    hodge_decompose,
    inner_product,
    l2_norm,
    osc_norm,
    primitive_of_exact,
    pullback,
    random_closed_form,
    twist_map,
    zero_form,
)
from .splitting import (
    BaseNorm,
    NormCriterionResult,
    SeminormSpec,
    SplitKind,
    SplittingOperator,
    apply_splitting,
    composition_identity_defect,
    norm_criterion,
    seminorm,
)
from .paths import (
    SCHEDULES,
    FluxVector,
    IsotopyPath,
    Schedule,
    compose_timewise,
    concat_left,
    concat_right,
    conjugate_path,
    constant_form_path,
    endpoint,
    flux,
    hamiltonian_path,
    invert,
    random_isotopy,
    reparametrize,
    translation_path,
)
from .lattice import (
    FluxLattice,
    HamiltonianVerdict,
    ProductModel,
    closest_vector,
    embed_path_left,
    embed_path_right,
    is_hamiltonian_endpoint,
    product_path,
    product_split_obstruction,
    split_flux,
    torus_flux_lattice,
)
from .ansatz import PathAnsatz, UnsupportedSpecError
from .distances import (
    DistanceEstimate,
    distance_estimate,
    distance_lower_flux,
    distance_symmetrized,
    distance_to_ham,
    distance_upper,
    gradient_check,
    hofer_length,
    length,
    length_banyaga,
    quotient_distance,
)
from .probes import (
    InvarianceProbeResult,
    NonharmonicCertificate,
    OrbitRankResult,
    RightConcatExcess,
    invariance_defect,
    nonharmonic_closed_form,
    orbit_rank,
    right_concat_excess,
)
from .scenarios import BUNDLED_SCENARIOS, load_scenario, run_scenario, validate_scenario
from . import serialize

__all__ = [name for name in dir() if not name.startswith("_")]
