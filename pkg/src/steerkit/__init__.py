"""steerkit: steerable convolutional networks over D4 and p4m on a torus."""

__version__ = "0.1.0"

from .dihedral import (
    ELEMENTS,
    DihedralElement,
    IsometryElement,
    Subgroup,
    TorusGrid,
    compose,
    cosets,
    element,
    enumerate_subgroups,
    inverse,
    section,
)
from .reps import (
    Representation,
    RepTypeVector,
    block_diagonalize,
    char_inner,
    character,
    decompose_type,
    direct_sum,
    irrep,
    irrep_catalog,
    is_representation,
    quotient_rep,
    realization_class,
    regular_rep,
)
from .induction import (
    build_patch_rep,
    build_pi0,
    check_induction_identity,
    induced_act_field,
    induced_matrix,
)
from .intertwiners import (
    FilterBank,
    FilterBankParams,
    IntertwinerBasis,
    assemble_filter_bank,
    constraint_matrix,
    hom_basis,
    intertwining_number,
    parameter_utilization,
    project_equivariant,
    random_params,
)
from .capsules import (
    Capsule,
    FiberSpec,
    act_fiber,
    act_rep,
    capsule_catalog,
    check_addable,
    fiber_rep,
    get_capsule,
)
from .network import (
    FeatureField,
    LayerSpec,
    NetworkSpec,
    ParamSet,
    apply_nonlinearity,
    correlate,
    forward,
    gcnn_oracle,
    init_params,
    invariant_readout,
    load_params,
    residual_add,
    save_params,
    verify_equivariance,
)
from .training import grad_params, train_demo
