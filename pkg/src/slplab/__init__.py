"""Symbol-level precoding laboratory.

Constructive-interference precoders and classical baselines for the
MU-MISO downlink, the small dense optimization kernels they need (NNLS,
convex QP), hardware-efficient quantized/constant-envelope frontends, and
a reproducible Monte-Carlo simulation harness with a CLI.
"""

from .channel import sample_rayleigh, stream_rng, transmit
from .ci import CiSpec, UserGains, ci_margin, component_gains, decompose_symbol, \
    erfinv, noise_robust_level, sep_level, user_gains
from .constellations import Constellation, classify_components, detect, \
    from_name, make_constellation
from .precoding import PrecodeResult, ci_inverse, civp_strict, cpm, \
    csb_symbol_scaling, mrt_sym, multicast_equivalent, pm_duality, rzf_sym, zf_sym
from .quantized import CePoint, QuantAlphabet, bbit_ccd, cep_descent, onebit_lp
from .sim import ResultRow, SimConfig, run_ber_sweep, run_power_sweep
from .solvers import NnlsProblem, QpProblem, SolveReport, SolverTolerances, \
    solve_nnls, solve_qp

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
