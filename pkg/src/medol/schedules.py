"""Hyper-parameter schedules derived from the convergence bounds.

Modes:
    ``smooth``           first-order, no smoothing (``delta_prime = 0``)
    ``nonsmooth_first``  first-order, smoothing radius ``delta / 2``
    ``nonsmooth_zero``   two-point zero-order, smoothing radius ``delta / 2``
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "ProblemConstants",
    "Constants",
    "Schedule",
    "MODES",
    "geometric_constant",
    "zero_order_second_moment",
    "constants",
    "domain_radius",
    "make_schedule",
    "predict_rounds",
    "predict_rounds_real",
    "estimate_gradient_constants",
]

log = logging.getLogger(__name__)

MODES = ("smooth", "nonsmooth_first", "nonsmooth_zero")
ZO_MOMENT = 16.0 * math.sqrt(2.0 * math.pi)  # second-moment factor of the two-point estimator


@dataclass(frozen=True)
class ProblemConstants:
    """Problem-level constants the bounds depend on.

    ``L`` Lipschitz constant, ``G`` stochastic-gradient second-moment bound,
    ``sigma`` gradient noise level, ``gamma`` initial suboptimality,
    ``L1`` gradient-Lipschitz constant (smooth mode only).
    """

    L: float
    G: float
    sigma: float
    gamma: float
    n: int
    d: int
    rho: float
    L1: float | None = None

    def __post_init__(self):
        for name in ("L", "G", "sigma", "gamma"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")
        if self.n < 1 or self.d < 1:
            raise ParameterError("n and d must be >= 1")
        if not 0 <= self.rho < 1:
            raise ParameterError(f"rho must lie in [0, 1), got {self.rho}")


@dataclass(frozen=True)
class Constants:
    c: float
    c1: float
    c3: float
    c5: float | None
    c8: float
    c9: float
    c10: float
    c11: float
    c4: float | None
    c7: float
    c7_zero: float


@dataclass(frozen=True)
class Schedule:
    N: int
    T: int
    K: int
    D: float
    eta: float
    delta_prime: float
    mode: str
    delta: float
    eta_mode: str = "experiment"

    def to_dict(self) -> dict:
        return asdict(self)


def _log_double_factorial(k: int) -> float:
    if k <= 0:
        return 0.0
    if k % 2 == 0:
        h = k // 2
        return h * math.log(2.0) + math.lgamma(h + 1)
    h = (k - 1) // 2
    return math.lgamma(k + 1) - h * math.log(2.0) - math.lgamma(h + 1)


def geometric_constant(d: int) -> float:
    """``kappa * d!! / ((d - 1)!! * sqrt(d))`` with ``kappa = 2/pi`` for even ``d``.

    Times ``L sqrt(d) / delta`` this is the gradient-Lipschitz constant of the
    ball-smoothed function. It tends to ``sqrt(2 / pi)`` as ``d`` grows.
    """
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    kappa = 2.0 / math.pi if d % 2 == 0 else 1.0
    ratio = math.exp(_log_double_factorial(d) - _log_double_factorial(d - 1))
    return kappa * ratio / math.sqrt(d)


def zero_order_second_moment(d: int, L: float) -> float:
    """Upper bound ``16 sqrt(2 pi) d L^2`` on ``E||g||^2`` for the two-point estimator."""
    return ZO_MOMENT * d * L * L


def _regret_constant(G: float, L: float, n: int, rho: float) -> float:
    gap = 1.0 - rho
    return 4.0 * math.sqrt((G * G * gap + 4.0 * G * (L + G) * math.sqrt(n)) / (2.0 * gap))


def constants(pc: ProblemConstants) -> Constants:
    """Every constant of the three bounds for the given problem constants.

    ``c5`` and ``c4`` need ``pc.L1`` and are ``None`` without it. ``c7_zero``
    is the zero-order counterpart of ``c7`` (``G -> c9``, ``c1 -> c10``).
    """
    if pc.rho >= 1:
        raise ParameterError(f"rho must be < 1, got {pc.rho}")
    n, d, L, G, rho = pc.n, pc.d, pc.L, pc.G, pc.rho
    gap = 1.0 - rho
    sn = math.sqrt(n)
    c = geometric_constant(d)
    c1 = _regret_constant(G, L, n, rho)
    c3 = 3.0 * sn / gap + 5.0
    gamma_p = pc.gamma + L
    smooth_term = c * L * math.sqrt(d) * gap * c3

    c5 = c4 = None
    if pc.L1 is not None:
        B = 2.0 * pc.sigma + 2.0 * c1 * sn + pc.L1 * gap * c3
        c5 = 1.5 * (pc.gamma * B * B / (gap * sn)) ** (1.0 / 3.0)
        if pc.gamma > 0:
            c4 = (gap * B / (8.0 * pc.gamma * n)) ** (2.0 / 3.0)

    A = 2.0 * G + 2.0 * c1 * sn + smooth_term
    c8 = 3.0 * (gamma_p * A * A / (4.0 * gap * sn)) ** (1.0 / 3.0)
    c7 = (gap * A / (16.0 * gamma_p * n)) ** (2.0 / 3.0) if gamma_p > 0 else math.inf

    c9 = math.sqrt(zero_order_second_moment(d, L))
    c10 = _regret_constant(c9, L, n, rho)
    Az = 2.0 * c9 + 2.0 * c10 * sn + smooth_term
    c11 = 3.0 * (gamma_p * Az * Az / (4.0 * gap * sn)) ** (1.0 / 3.0)
    c7_zero = (gap * Az / (16.0 * gamma_p * n)) ** (2.0 / 3.0) if gamma_p > 0 else math.inf
    return Constants(c, c1, c3, c5, c8, c9, c10, c11, c4, c7, c7_zero)


def domain_radius(delta: float, T: int, n: int, rho: float, mode: str) -> float:
    """``delta (1 - rho) / (k T sqrt(n))`` with ``k = 2`` (smooth) or ``4`` (nonsmooth)."""
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}")
    divisor = 2.0 if mode == "smooth" else 4.0
    return delta * (1.0 - rho) / (divisor * T * math.sqrt(n))


def make_schedule(delta: float, N: int, pc: ProblemConstants, mode: str, *,
                  c_T: float | None = None, T: int | None = None,
                  eta_mode: str = "experiment") -> Schedule:
    """Epoch length, epoch count, domain radius, step and smoothing radius.

    The epoch length is ``c_T (1 - rho)^(1/3) (delta N)^(2/3)`` when ``c_T`` is
    given, otherwise ``c (delta N)^(2/3)`` with ``c`` the explicit constant of
    the mode (``c4``, ``c7`` or ``c7_zero``), which already carries the
    ``(1 - rho)^(2/3)`` factor. An explicit ``T`` overrides both. The result
    is clamped to at least 3 and ``N`` is rounded up to ``K * T``.

    ``eta_mode`` selects ``eta = 8 D / (c1 sqrt(T))`` (``"theory"``, with
    ``c10`` in place of ``c1`` for zero-order) or ``eta = 0.01 D``
    (``"experiment"``).
    """
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    if eta_mode not in ("theory", "experiment"):
        raise ParameterError(f"eta_mode must be 'theory' or 'experiment', got {eta_mode!r}")
    gap = 1.0 - pc.rho
    consts = None
    if T is None:
        if c_T is not None:
            raw = c_T * gap ** (1.0 / 3.0) * (delta * N) ** (2.0 / 3.0)
        else:
            consts = constants(pc)
            coef = {"smooth": consts.c4, "nonsmooth_first": consts.c7, "nonsmooth_zero": consts.c7_zero}[mode]
            if coef is None or not math.isfinite(coef):
                raise ParameterError(f"cannot derive the epoch length for mode {mode!r}: "
                                     "supply gamma > 0 (and L1 for smooth mode) or c_T")
            raw = coef * (delta * N) ** (2.0 / 3.0)
        T = math.ceil(raw - 1e-9)
    T = max(3, int(T))
    K = math.ceil(N / T)
    if math.sqrt(pc.n) / gap < 2:
        log.warning("sqrt(n)/(1-rho) = %.3g < 2: the intra-epoch diameter guarantee does not apply",
                    math.sqrt(pc.n) / gap)
    D = domain_radius(delta, T, pc.n, pc.rho, mode)
    if eta_mode == "theory":
        consts = consts or constants(pc)
        c_reg = consts.c10 if mode == "nonsmooth_zero" else consts.c1
        if c_reg <= 0:
            raise ParameterError("theory step size needs G > 0")
        eta = 8.0 * D / (c_reg * math.sqrt(T))
    else:
        eta = 0.01 * D
    delta_prime = 0.0 if mode == "smooth" else delta / 2.0
    return Schedule(N=K * T, T=T, K=K, D=D, eta=eta, delta_prime=delta_prime, mode=mode,
                    delta=delta, eta_mode=eta_mode)


def _bound_constant(pc: ProblemConstants, mode: str) -> float:
    consts = constants(pc)
    if mode == "smooth":
        if consts.c5 is None:
            raise ParameterError("smooth mode needs L1 in ProblemConstants")
        return consts.c5
    if mode == "nonsmooth_first":
        return consts.c8
    if mode == "nonsmooth_zero":
        return consts.c11
    raise ParameterError(f"unknown mode {mode!r}")


def predict_rounds_real(delta: float, eps: float, pc: ProblemConstants, mode: str,
                        c_mode: float | None = None) -> float:
    """``(c / eps)^3 / delta`` before rounding, for the mode's bound constant ``c``."""
    if not (0 < delta < 1 and 0 < eps < 1):
        raise ParameterError("delta and eps must lie in (0, 1)")
    c = _bound_constant(pc, mode) if c_mode is None else c_mode
    return (c / eps) ** 3 / delta


def predict_rounds(delta: float, eps: float, pc: ProblemConstants, mode: str,
                   c_mode: float | None = None) -> int:
    """Rounds ``N`` after which the mode's bound ``c (delta N)^(-1/3)`` is at most ``eps``."""
    return math.ceil(predict_rounds_real(delta, eps, pc, mode, c_mode) - 1e-9)


def estimate_gradient_constants(suite, x, rng, samples: int = 100) -> tuple[float, float]:
    """Empirical ``(G, sigma)`` from ``samples`` stochastic subgradients at ``x``.

    ``G`` is the root mean squared norm of the draws and ``sigma`` the root
    mean squared deviation from their mean; both are rough suggestions for
    :class:`ProblemConstants`, not certified bounds.
    """
    if samples < 2:
        raise ParameterError(f"samples must be >= 2, got {samples}")
    x = np.asarray(x, dtype=float)
    draws = np.empty((samples, x.shape[0]))
    for k in range(samples):
        F = suite.locals[int(rng.integers(suite.n))]
        draws[k] = F.subgradient(x, F.draw(rng))
    G = math.sqrt(float(np.mean(np.sum(draws**2, axis=1))))
    sigma = math.sqrt(float(np.sum((draws - draws.mean(axis=0)) ** 2)) / (samples - 1))
    return G, sigma
