"""Bell-measurement-free quantum repeater simulator for quantum-dot chains."""

__version__ = "0.1.0"

from .analysis import SuccessStats, SweepPoint, concurrence, dispersive_sweep, fidelity, success_stats
from .hilbert import (
    DensityMatrix,
    OperatorKind,
    OperatorMatrix,
    StateVector,
    apply,
    basis_state,
    evolve,
    fock_vacuum,
    partial_trace,
    propagator,
    qubit_basis,
    tensor,
)
from .measure import Branch, RngStream, discard, enumerate_branches, sample
from .model import (
    PhysParams,
    align_frame,
    build_effective,
    build_full_tcm,
    build_h0,
    closed_form_step,
    exchange_generator,
)
from .protocol import (
    THETA_SWAP,
    ChainRunRecord,
    ClosureCase,
    ClosureReport,
    FullSwapResult,
    PairState,
    PairTag,
    RetryPolicy,
    SwapRecord,
    TruncationError,
    classify_pair,
    closure_check,
    prepare_singlet,
    run_chain,
    swap_effective,
    swap_full_cavity,
)

__all__ = [
    "__version__",
    "Branch",
    "ChainRunRecord",
    "ClosureCase",
    "ClosureReport",
    "DensityMatrix",
    "FullSwapResult",
    "OperatorKind",
    "OperatorMatrix",
    "PairState",
    "PairTag",
    "PhysParams",
    "RetryPolicy",
    "RngStream",
    "StateVector",
    "SuccessStats",
    "SwapRecord",
    "SweepPoint",
    "THETA_SWAP",
    "TruncationError",
    "align_frame",
    "apply",
    "basis_state",
    "build_effective",
    "build_full_tcm",
    "build_h0",
    "classify_pair",
    "closed_form_step",
    "closure_check",
    "concurrence",
    "discard",
    "dispersive_sweep",
    "enumerate_branches",
    "evolve",
    "exchange_generator",
    "fidelity",
    "fock_vacuum",
    "partial_trace",
    "prepare_singlet",
    "propagator",
    "qubit_basis",
    "run_chain",
    "sample",
    "success_stats",
    "swap_effective",
    "swap_full_cavity",
    "tensor",
]
