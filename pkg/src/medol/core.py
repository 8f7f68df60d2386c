"""Multi-epoch decentralized online learning (ME-DOL) driver.

Each epoch restarts the online learner; each round every agent takes an
action ``delta`` from the learner, moves to ``x = y + delta``, queries its
oracle at the random point ``w = y + s * delta`` on the segment, and mixes
``x`` with its neighbors. The average of all ``w`` in an epoch is that
epoch's candidate; the output is one candidate picked uniformly.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NonFiniteError, ParameterError
from .objectives import ObjectiveSuite, test_accuracy
from .online_learner import LearnerState, learner_mix, learner_step, restart
from .rng import AgentStreams, run_stream
from .smoothing import first_order_gradient, zero_order_gradient
from .topology import CommMatrix, gossip

__all__ = [
    "RunConfig",
    "TraceRecord",
    "RunResult",
    "RoundRecord",
    "MedolSimulator",
    "run_medol",
    "candidate_average",
    "query_oracle",
    "default_workers",
]

log = logging.getLogger(__name__)

WORKERS_ENV = "MEDOL_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """Solver hyper-parameters for one ME-DOL run.

    ``delta`` is the Goldstein radius the run targets; it is only used to
    report the intra-epoch diameter check and may be left unset.
    """

    K: int
    T: int
    D: float
    eta: float
    delta_prime: float = 0.0
    oracle: str = "first"
    seed: int = 0
    n: int | None = None
    d: int | None = None
    trace_every: int = 1
    batch_size: int = 1
    x0: tuple | None = None
    delta: float | None = None
    proxy_samples: int = 0
    provenance: str = "manual"

    def validate(self) -> None:
        if self.K < 1 or self.T < 1:
            raise ParameterError(f"need K >= 1 and T >= 1, got K={self.K}, T={self.T}")
        if not (self.D > 0 and self.eta > 0):
            raise ParameterError(f"need D > 0 and eta > 0, got D={self.D}, eta={self.eta}")
        if self.oracle not in ("first", "zero"):
            raise ParameterError(f"oracle must be 'first' or 'zero', got {self.oracle!r}")
        if self.delta_prime < 0:
            raise ParameterError(f"delta_prime must be >= 0, got {self.delta_prime}")
        if self.oracle == "zero" and self.delta_prime == 0:
            raise ParameterError("the zero-order oracle needs delta_prime > 0")
        if self.trace_every < 1 or self.batch_size < 1:
            raise ParameterError("trace_every and batch_size must be >= 1")
        for name in ("D", "eta", "delta_prime"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    round: int
    solver: str
    grad_norm: float | None = None
    proxy_norm: float | None = None
    test_acc: float | None = None
    disagreement_max: float | None = None
    oracle_calls: int = 0


@dataclass
class RunResult:
    candidates: np.ndarray
    output: np.ndarray
    output_index: int
    trace: list
    oracle_calls: int
    function_evals: int
    rounds_per_epoch: int
    consensus_bound: float | None = None
    consensus_violations: int = 0
    max_disagreement: float = 0.0
    epoch_diameters: list = field(default_factory=list)
    solver: str = "medol"

    @property
    def grad_norms(self) -> list:
        return [r.grad_norm for r in self.trace if r.grad_norm is not None]


@dataclass(frozen=True)
class RoundRecord:
    """Per-agent state of one round, each field an ``(n, d)`` array (``s``: ``(n,)``)."""

    y_prev: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    s: np.ndarray
    w: np.ndarray
    y: np.ndarray
    g: np.ndarray


def query_oracle(kind: str, F, w, delta_prime: float, xi, rng) -> np.ndarray:
    if kind == "zero":
        return zero_order_gradient(F, w, delta_prime, xi, rng).g
    return first_order_gradient(F, w, delta_prime, xi, rng).g


def candidate_average(ws) -> np.ndarray:
    """Mean of a ``(T, n, d)`` block, summed round by round in agent order."""
    ws = np.asarray(ws, dtype=float)
    if ws.ndim == 2:
        ws = ws[:, None, :]
    if ws.size == 0:
        raise ParameterError("candidate_average needs at least one vector")
    acc = np.zeros(ws.shape[-1])
    for t in range(ws.shape[0]):
        for i in range(ws.shape[1]):
            acc += ws[t, i]
    return acc / (ws.shape[0] * ws.shape[1])


def disagreement(Y) -> np.ndarray:
    return np.linalg.norm(Y - Y.mean(axis=0), axis=1)


def _check_shapes(cfg, suite, M):
    if not isinstance(M, CommMatrix):
        raise ParameterError("M must be a CommMatrix")
    if M.n != suite.n:
        raise ParameterError(f"matrix has {M.n} agents but the suite has {suite.n}")
    if cfg.n is not None and cfg.n != suite.n:
        raise ParameterError(f"config says n={cfg.n} but the suite has {suite.n} agents")
    if cfg.d is not None and cfg.d != suite.dim:
        raise ParameterError(f"config says d={cfg.d} but the suite has dimension {suite.dim}")
    if cfg.x0 is not None and len(cfg.x0) != suite.dim:
        raise ParameterError(f"x0 has length {len(cfg.x0)}, expected {suite.dim}")


class MedolSimulator:
    """Round-by-round ME-DOL state machine.

    ``streams`` supplies one generator per agent for sample indices, segment
    positions ``s`` and smoothing directions; it defaults to streams derived
    from ``cfg.seed``. With ``workers > 1`` the per-agent work of a round runs
    on a thread pool; results are identical to the serial path.
    """

    def __init__(self, cfg: RunConfig, suite: ObjectiveSuite, M: CommMatrix,
                 streams: AgentStreams | None = None, workers: int = 1, y0=None):
        cfg.validate()
        _check_shapes(cfg, suite, M)
        self.cfg, self.suite, self.M = cfg, suite, M
        n, d = suite.n, suite.dim
        self.streams = streams or AgentStreams.from_seed(cfg.seed, n)
        if y0 is None:
            y0 = np.zeros(d) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
        y0 = np.asarray(y0, dtype=float)
        self.y = np.array(np.broadcast_to(y0, (n, d)), dtype=float)
        self.learner = LearnerState.zeros(n, d, cfg.D, cfg.eta)
        self.g_prev = np.zeros((n, d))
        self.epoch = 0
        self.t = 0
        self.oracle_calls = 0
        self.function_evals = 0
        self.workers = workers
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _map(self, fn, n):
        if self._pool is None:
            return [fn(i) for i in range(n)]
        return list(self._pool.map(fn, range(n)))

    def start_epoch(self) -> None:
        restart(self.learner)
        self.g_prev = np.zeros_like(self.g_prev)
        self.epoch += 1
        self.t = 0

    def round(self) -> RoundRecord:
        """Advance one round and return every agent's ``(y_prev, delta, x, s, w, y, g)``."""
        cfg, suite = self.cfg, self.suite
        n = suite.n
        self.t += 1
        y_prev = self.y

        def act(i):
            delta = learner_step(self.learner, i, self.g_prev[i])
            return delta, float(self.streams.s[i].random())

        acted = self._map(act, n)
        delta = np.array([a[0] for a in acted])
        s = np.array([a[1] for a in acted])
        learner_mix(self.learner, self.M, delta)
        x = y_prev + delta
        w = y_prev + s[:, None] * delta
        y = gossip(self.M, x)

        def ask(i):
            F = suite.locals[i]
            xi = F.draw(self.streams.xi[i], cfg.batch_size)
            return query_oracle(cfg.oracle, F, w[i], cfg.delta_prime, xi, self.streams.z[i])

        g = np.array(self._map(ask, n))
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(y))):
            raise NonFiniteError("non-finite iterate or gradient", self.epoch, self.t)
        self.oracle_calls += n
        if cfg.oracle == "zero":
            self.function_evals += 2 * n
        self.g_prev = g
        self.y = y
        return RoundRecord(y_prev, delta, x, s, w, y, g)


def _epoch_metrics(suite, point, test_set, proxy_samples, delta, eval_rng):
    from .evaluation import goldstein_proxy

    grad = float(np.linalg.norm(suite.global_subgradient(point)))
    acc = test_accuracy(point, test_set) if test_set is not None and len(test_set) else None
    proxy = None
    if proxy_samples > 0:
        radius = delta if delta else 1e-3
        proxy = goldstein_proxy(suite, point, radius, proxy_samples, eval_rng, full_batch=True)[0]
    return grad, proxy, acc


def run_medol(cfg: RunConfig, suite: ObjectiveSuite, M: CommMatrix, *, test_set=None,
              streams: AgentStreams | None = None, workers: int | None = None) -> RunResult:
    """Run ``cfg.K`` epochs of ``cfg.T`` rounds and return candidates plus trace."""
    workers = default_workers() if workers is None else workers
    sim = MedolSimulator(cfg, suite, M, streams=streams, workers=workers)
    n, d, T = suite.n, suite.dim, cfg.T
    bound = cfg.D * math.sqrt(n) / (1.0 - M.rho) if M.rho < 1 else math.inf
    eval_rng = run_stream(cfg.seed, "eval")
    candidates = np.empty((cfg.K, d))
    trace, diameters = [], []
    violations, worst = 0, 0.0
    try:
        for k in range(cfg.K):
            sim.start_epoch()
            ws = np.empty((T, n, d))
            for t in range(T):
                rec = sim.round()
                ws[t] = rec.w
                spread = float(disagreement(rec.y).max())
                worst = max(worst, spread)
                if spread > bound:
                    violations += 1
                last = t + 1 == T
                if last:
                    candidates[k] = candidate_average(ws)
                    grad, proxy, acc = _epoch_metrics(suite, candidates[k], test_set,
                                                      cfg.proxy_samples, cfg.delta, eval_rng)
                    trace.append(TraceRecord(k + 1, t + 1, "medol", grad, proxy, acc, spread,
                                             sim.oracle_calls))
                elif (t + 1) % cfg.trace_every == 0:
                    trace.append(TraceRecord(k + 1, t + 1, "medol", disagreement_max=spread,
                                             oracle_calls=sim.oracle_calls))
            diameters.append(float(np.linalg.norm(ws - candidates[k], axis=2).max()))
    finally:
        sim.close()
    pick = int(run_stream(cfg.seed, "pick").integers(cfg.K))
    if violations:
        log.warning("consensus bound exceeded in %d rounds", violations)
    return RunResult(
        candidates=candidates,
        output=candidates[pick].copy(),
        output_index=pick,
        trace=trace,
        oracle_calls=sim.oracle_calls,
        function_evals=sim.function_evals,
        rounds_per_epoch=T,
        consensus_bound=bound,
        consensus_violations=violations,
        max_disagreement=worst,
        epoch_diameters=diameters,
    )


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
