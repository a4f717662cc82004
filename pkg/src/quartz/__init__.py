"""Quartz: randomized primal-dual method for L2-regularized ERM under arbitrary samplings."""
from .problem import (
    TOL_NUM,
    DataMatrix,
    InfeasibleDualError,
    L2Regularizer,
    LossModel,
    ProblemInstance,
    SmoothedHinge,
    SquaredHinge,
    dual_value,
    duality_gap,
    gap_components,
    make_loss,
    primal_value,
)
from .sampling import (
    DistributedSampling,
    ProductSampling,
    SerialSampling,
    SupportTooLargeError,
    TauNiceSampling,
    detect_product_partition,
    make_rng,
)
from .eso import (
    EsoParams,
    SeparabilityError,
    eso_params,
    exact_eso_lhs,
    importance_probs,
    theta,
    v_distributed,
    v_product,
    v_serial,
    v_tau_nice,
)
from .solver import SolverConfig, SolveResult, solve
from .analysis import (
    complexity_bound,
    omega_tilde_from_v,
    practical_speedup,
    sandwich_check,
    speedup_distributed,
    speedup_tau_nice,
)
from .io import load_libsvm, synth_instance, write_libsvm

__version__ = "0.1.0"
