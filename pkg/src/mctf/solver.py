"""BSUM / augmented-Lagrangian completion solver for MCTF and NC-MCTF.

The model fits the observed tensor ``F`` (known on the index set Omega) by
minimizing

    sum_n  alpha_n/2 ||Y - G_n x_n X_n||_F^2 + tau_n R(X_n) + lam_n R_n(G_n)

over factors ``X_n``, cores ``G_n`` and the completed tensor ``Y`` with
``P_Omega(Y) = P_Omega(F)``. ``R`` is the matrix nuclear norm (``convex``
variant) or the log-sum of singular values (``log`` variant); ``R_n`` is the
matching Fourier-domain tensor norm along mode ``n``.

Each outer iteration runs the block updates Z, X, G, J, Y followed by the
multiplier updates, then grows the per-mode penalty ``rho_n`` by
``rho_growth`` up to ``mu_max``.
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.linalg

from . import prox
from .data import apply_mask
from .model import MctfFactors, compose
from .tensor import fold, fro_norm, mode_n_product, unfold

logger = logging.getLogger(__name__)

VARIANTS = ("convex", "log")


class DivergenceError(FloatingPointError):
    """A block update produced NaN or Inf."""

    def __init__(self, block, iteration):
        self.block = block
        self.iteration = iteration
        super().__init__(f"non-finite values in block {block} at iteration {iteration}")


def _triple(v, name):
    if np.ndim(v) == 0:
        return (float(v),) * 3
    v = tuple(float(x) for x in v)
    if len(v) != 3:
        raise ValueError(f"{name} needs 1 or 3 values, got {len(v)}")
    return v


@dataclass
class SolverConfig:
    """Hyperparameters of the completion solver.

    Scalars given for per-mode fields are broadcast to all three modes. When
    `tau` is None it is set to ``C * lam`` (the tau/lambda ratio used for
    parameter sweeps).
    """

    ranks: tuple
    variant: str = "convex"
    alpha: tuple = (1 / 3, 1 / 3, 1 / 3)
    lam: tuple = 1e-3
    tau: tuple = None
    C: float = 1.0
    rho: tuple = 1e-8
    rho_growth: float = 1.5
    mu_max: float = 1e6
    log_eps: float = 1e-3
    stop_tol: float = 1e-5
    max_iter: int = 500
    init: str = "svd"
    multiplier_step: str = "rho"

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        if len(self.ranks) != 3 or min(self.ranks) < 1:
            raise ValueError(f"ranks must be three positive integers, got {self.ranks}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self.alpha = _triple(self.alpha, "alpha")
        if min(self.alpha) < 0 or not math.isclose(sum(self.alpha), 1.0, rel_tol=1e-9):
            raise ValueError(f"alpha must be non-negative and sum to 1, got {self.alpha}")
        self.lam = _triple(self.lam, "lam")
        self.tau = _triple(self.C * np.asarray(self.lam) if self.tau is None else self.tau, "tau")
        self.rho = _triple(self.rho, "rho")
        if min(self.lam) < 0 or min(self.tau) < 0:
            raise ValueError("tau and lam must be non-negative")
        if min(self.rho) <= 0:
            raise ValueError("rho must be positive")
        if self.rho_growth < 1:
            raise ValueError("rho_growth must be >= 1")
        if self.log_eps <= 0:
            raise ValueError("log_eps must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be positive")
        self.max_iter = int(self.max_iter)
        if self.init not in ("svd", "zeros"):
            raise ValueError(f"init must be 'svd' or 'zeros', got {self.init!r}")
        if self.multiplier_step not in ("rho", "unit"):
            raise ValueError(
                f"multiplier_step must be 'rho' or 'unit', got {self.multiplier_step!r}"
            )

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SolverState:
    """All iterates. Lists are indexed by ``mode - 1``."""

    X: list
    Z: list
    G: list
    J: list
    GX: list
    GG: list
    Y: np.ndarray
    rho: tuple
    iter: int = 0

    def factors(self, alpha):
        return MctfFactors(tuple(self.X), tuple(self.G), tuple(alpha))


@dataclass
class CompletionResult:
    Y_hat: np.ndarray
    factors: MctfFactors
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)
    rel_change_trace: list = field(default_factory=list)


def _core_shape(shape, n, r):
    s = list(shape)
    s[n] = r
    return tuple(s)


def init_state(observed, mask, config):
    """Starting point from per-mode truncated SVDs of the zero-filled data.

    With ``config.init == "zeros"`` every factor starts at zero instead, which
    is a fixed point of the updates and is only kept for reference.
    """
    F = apply_mask(observed, mask)
    shape = F.shape
    X, G = [], []
    for n in range(3):
        r = config.ranks[n]
        Fn = unfold(F, n + 1)
        if r > min(Fn.shape):
            raise ValueError(
                f"rank {r} exceeds the mode-{n + 1} unfolding size {Fn.shape}"
            )
        if config.init == "zeros" or not np.any(Fn):
            x = np.zeros((shape[n], r))
        else:
            x = prox.thin_svd(Fn).U[:, :r]
        X.append(x)
        G.append(mode_n_product(F, x.T, n + 1))
    return SolverState(
        X=X,
        Z=[x.copy() for x in X],
        G=G,
        J=[g.copy() for g in G],
        GX=[np.zeros_like(x) for x in X],
        GG=[np.zeros_like(g) for g in G],
        Y=F,
        rho=config.rho,
    )


def _matrix_shrink(M, thr, config):
    if thr == 0:
        return M.copy()
    if config.variant == "convex":
        return prox.svt(M, thr)
    return prox.log_svt(M, thr, config.log_eps)


def _tensor_shrink(t, mode, thr, config):
    if thr == 0:
        return t.copy()
    if config.variant == "convex":
        return prox.tnn_prox(t, mode, thr)
    return prox.log_tnn_prox(t, mode, thr, config.log_eps)


def update_Z(state, config):
    """``Z_n <- prox_{tau_n/rho_n}(X_n + GX_n / rho_n)``."""
    Z = [
        _matrix_shrink(state.X[n] + state.GX[n] / state.rho[n], config.tau[n] / state.rho[n], config)
        for n in range(3)
    ]
    return replace(state, Z=Z)


def update_X(state, config):
    """Regularized least squares for each factor matrix.

    Minimizes ``alpha/2 ||Y_(n) - X G_(n)||^2 + rho ||X - A||^2`` with the
    proximal anchor ``A = (Z - GX/rho + X_prev) / 2``.
    """
    X = []
    for n in range(3):
        rho, a = state.rho[n], config.alpha[n]
        anchor = (state.Z[n] - state.GX[n] / rho + state.X[n]) / 2
        Gn = unfold(state.G[n], n + 1)
        lhs = a * (Gn @ Gn.T) + 2 * rho * np.eye(Gn.shape[0])
        rhs = a * (unfold(state.Y, n + 1) @ Gn.T) + 2 * rho * anchor
        X.append(scipy.linalg.solve(lhs, rhs.T, assume_a="pos").T)
    return replace(state, X=X)


def update_G(state, config):
    """Regularized least squares for each core, anchored at ``(J - GG/rho + G_prev)/2``."""
    G = []
    for n in range(3):
        rho, a = state.rho[n], config.alpha[n]
        anchor = (state.J[n] - state.GG[n] / rho + state.G[n]) / 2
        Xn = state.X[n]
        lhs = a * (Xn.T @ Xn) + 2 * rho * np.eye(Xn.shape[1])
        rhs = a * (Xn.T @ unfold(state.Y, n + 1)) + 2 * rho * unfold(anchor, n + 1)
        G.append(fold(scipy.linalg.solve(lhs, rhs, assume_a="pos"), n + 1, state.G[n].shape))
    return replace(state, G=G)


def update_J(state, config):
    """``J_n <- tensor prox_{lam_n/rho_n}(G_n + GG_n / rho_n)`` along mode n."""
    J = [
        _tensor_shrink(
            state.G[n] + state.GG[n] / state.rho[n], n + 1, config.lam[n] / state.rho[n], config
        )
        for n in range(3)
    ]
    return replace(state, J=J)


def update_Y(state, mask, observed, config):
    """Blend the per-mode reconstructions into the missing entries.

    Unobserved entries become
    ``sum_n alpha_n (G_n x_n X_n + rho_n Y) / (1 + rho_n)``; observed entries
    are copied from `observed` unchanged.
    """
    Y = np.zeros(state.Y.shape)
    for n in range(3):
        a, rho = config.alpha[n], state.rho[n]
        if a:
            Y += a * (mode_n_product(state.G[n], state.X[n], n + 1) + rho * state.Y) / (1 + rho)
    idx = mask.multi_index()
    Y[idx] = np.asarray(observed)[idx]
    return replace(state, Y=Y)


def update_multipliers(state, config=None):
    """Dual ascent on the splitting constraints ``X_n = Z_n`` and ``G_n = J_n``.

    The step is ``rho_n`` (standard augmented Lagrangian, matching the
    ``Gamma / rho_n`` shifts in the primal updates). ``multiplier_step="unit"``
    uses a step of 1 instead; that variant is unstable for ``rho_n < 1/2``.
    """
    unit = config is not None and config.multiplier_step == "unit"
    steps = (1.0,) * 3 if unit else state.rho
    GX = [g + s * (x - z) for g, s, x, z in zip(state.GX, steps, state.X, state.Z)]
    GG = [g + s * (c - j) for g, s, c, j in zip(state.GG, steps, state.G, state.J)]
    return replace(state, GX=GX, GG=GG)


def objective(state, config):
    """Value of the MCTF (convex) or NC-MCTF (log) objective at `state`."""
    total = 0.0
    for n in range(3):
        resid = state.Y - mode_n_product(state.G[n], state.X[n], n + 1)
        total += 0.5 * config.alpha[n] * fro_norm(resid) ** 2
        if config.variant == "convex":
            total += config.tau[n] * prox.nuclear_norm(state.X[n])
            total += config.lam[n] * prox.tensor_nuclear_norm(state.G[n], n + 1)
        else:
            total += config.tau[n] * prox.log_norm(state.X[n], config.log_eps)
            total += config.lam[n] * prox.tensor_log_norm(state.G[n], n + 1, config.log_eps)
    return total


def _check_finite(state, blocks, iteration):
    for block in blocks:
        value = getattr(state, block)
        arrays = value if isinstance(value, list) else [value]
        for n, arr in enumerate(arrays):
            if not np.all(np.isfinite(arr)):
                name = block if block == "Y" else f"{block}_{n + 1}"
                raise DivergenceError(name, iteration)


def solve(observed, mask, config, state=None, callback=None):
    """Complete `observed` from the entries listed in `mask`.

    Parameters
    ----------
    observed : ndarray, shape (I1, I2, I3)
        Data tensor; only entries in `mask` are read.
    mask : ObservationMask
    config : SolverConfig
    state : SolverState, optional
        Warm start; defaults to :func:`init_state`.
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    Returns
    -------
    CompletionResult

    Raises
    ------
    ValueError
        Empty mask or shape mismatch.
    DivergenceError
        A block update produced NaN or Inf.
    """
    observed = np.asarray(observed, dtype=float)
    if tuple(observed.shape) != mask.shape:
        raise ValueError(f"observed shape {observed.shape} does not match mask {mask.shape}")
    if len(mask) == 0:
        raise ValueError("mask has no observed entries")
    if state is None:
        state = init_state(observed, mask, config)

    objectives, changes = [], []
    converged = False
    for k in range(config.max_iter):
        Y_prev = state.Y
        state = update_Z(state, config)
        _check_finite(state, ["Z"], k)
        state = update_X(state, config)
        _check_finite(state, ["X"], k)
        state = update_G(state, config)
        _check_finite(state, ["G"], k)
        state = update_J(state, config)
        _check_finite(state, ["J"], k)
        state = update_Y(state, mask, observed, config)
        _check_finite(state, ["Y"], k)
        state = update_multipliers(state, config)
        _check_finite(state, ["GX", "GG"], k)
        rho = tuple(min(config.rho_growth * r, config.mu_max) for r in state.rho)
        state = replace(state, rho=rho, iter=k + 1)

        denom = fro_norm(Y_prev)
        diff = fro_norm(state.Y - Y_prev)
        change = diff / denom if denom > 0 else (0.0 if diff == 0 else math.inf)
        objectives.append(objective(state, config))
        changes.append(change)
        logger.debug("iter %d objective %.6e rel_change %.3e", k + 1, objectives[-1], change)
        if callback is not None:
            callback(state)
        if change < config.stop_tol:
            converged = True
            break

    return CompletionResult(
        Y_hat=state.Y,
        factors=state.factors(config.alpha),
        iterations=state.iter,
        converged=converged,
        objective_trace=objectives,
        rel_change_trace=changes,
    )


def flop_estimate(shape, ranks):
    """Per-iteration operation count of the solver, up to constants.

    Sums ``I_n r_n^2 + I_n r_n s_n + r_n^2 s_n`` over the modes, with
    ``s_n = prod_{j != n} I_j``, plus
    ``N (log N + sum_n min(I_n, I_{n+1}))`` for ``N = I1 I2 I3`` and cyclic
    ``I_4 = I_1``.
    """
    shape = [int(s) for s in shape]
    ranks = [int(r) for r in ranks]
    total = math.prod(shape)
    est = 0.0
    for n in range(3):
        s = total // shape[n]
        est += shape[n] * ranks[n] ** 2 + shape[n] * ranks[n] * s + ranks[n] ** 2 * s
    est += total * (math.log(total) + sum(min(shape[n], shape[(n + 1) % 3]) for n in range(3)))
    return est


__all__ = [
    "CompletionResult",
    "DivergenceError",
    "SolverConfig",
    "SolverState",
    "compose",
    "flop_estimate",
    "init_state",
    "objective",
    "solve",
    "update_G",
    "update_J",
    "update_X",
    "update_Y",
    "update_Z",
    "update_multipliers",
]
