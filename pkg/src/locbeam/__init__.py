"""Location-assisted robust beamforming for RIS-aided mmWave links."""

__version__ = "0.1.0"

from .algorithm import (
    BaselineResult,
    IterationRecord,
    RobustInputs,
    RunResult,
    fixed_beam_worst_snr,
    non_robust_baseline,
    run_algorithm1,
    worst_case_snr,
)
from .bound import BoundResult, csi_error_bound, monte_carlo_bound
from .estimators import CSIErrorBound, NonRobustBeamformer, RobustBeamformer
from .geometry import (
    ArrayGeometry,
    ChannelParams,
    ChannelSet,
    PathLossParams,
    build_bs_ris_channel,
    reconstruct_ris_ue_los,
    sample_rician,
)
from .phase import argument_rounding, bnb_phase_solve, sdr_phase_solve
from .robust import InfeasibleError, PhaseSet, PhaseVector, bisect_mu
from .sdp import SDPProblem, solve_sdp

__all__ = [
    "ArrayGeometry",
    "BaselineResult",
    "BoundResult",
    "CSIErrorBound",
    "ChannelParams",
    "ChannelSet",
    "InfeasibleError",
    "IterationRecord",
    "NonRobustBeamformer",
    "PathLossParams",
    "PhaseSet",
    "PhaseVector",
    "RobustBeamformer",
    "RobustInputs",
    "RunResult",
    "SDPProblem",
    "argument_rounding",
    "bisect_mu",
    "bnb_phase_solve",
    "build_bs_ris_channel",
    "csi_error_bound",
    "fixed_beam_worst_snr",
    "monte_carlo_bound",
    "non_robust_baseline",
    "reconstruct_ris_ue_los",
    "run_algorithm1",
    "sample_rician",
    "sdr_phase_solve",
    "solve_sdp",
    "worst_case_snr",
]
