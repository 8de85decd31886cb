"""Low-rank tensor completion with multi-modal core tensor factorization.

Two models share one solver: MCTF penalizes factor matrices with the
nuclear norm and cores with a Fourier-domain tensor nuclear norm; NC-MCTF
replaces both with log-sum-of-singular-value surrogates.
"""

from .data import (
    ObservationMask,
    apply_mask,
    project,
    rank_heuristic,
    sample_uniform,
    synth_mctf,
)
from .io import TnsFormatError, load_mask, load_tensor, save_mask, save_tensor
from .metrics import QualityReport, ergas, psnr, quality_report, sam, ssim
from .model import MctfFactors, compose, compose_permuted
from .prox import log_svt, log_tnn_prox, svt, tnn_prox
from .solver import (
    CompletionResult,
    DivergenceError,
    SolverConfig,
    SolverState,
    flop_estimate,
    init_state,
    objective,
    solve,
)
from .tensor import (
    NumericalConsistencyError,
    fft_mode,
    fold,
    fro_norm,
    ifft_mode,
    inner,
    mode_n_product,
    permute_from_mode3,
    permute_to_mode3,
    unfold,
)

__version__ = "0.1.0"
