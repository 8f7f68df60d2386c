"""Reference decentralized solvers: DPSGD (first-order) and DGFM (zero-order).

Both take a local step ``x_i = y_i - step_size * g_i`` and then mix,
``y = W x``. Metrics are computed on the network average ``ybar`` every
``eval_every`` rounds; each such block is reported as one pseudo-epoch so the
trace lines up with ME-DOL's.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (RunResult, TraceRecord, _epoch_metrics, default_workers, disagreement,
                   query_oracle)
from .errors import NonFiniteError, ParameterError
from .objectives import ObjectiveSuite
from .rng import AgentStreams, run_stream
from .topology import CommMatrix, gossip

__all__ = ["BaselineConfig", "run_dpsgd", "run_dgfm"]


@dataclass(frozen=True)
class BaselineConfig:
    rounds: int
    step_size: float
    delta_prime: float = 0.0
    seed: int = 0
    trace_every: int = 1
    eval_every: int | None = None
    batch_size: int = 1
    x0: tuple | None = None
    proxy_samples: int = 0
    delta: float | None = None

    def validate(self, zero_order: bool) -> None:
        if self.rounds < 1 or self.trace_every < 1 or self.batch_size < 1:
            raise ParameterError("rounds, trace_every and batch_size must be >= 1")
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ParameterError(f"step_size must be positive, got {self.step_size}")
        if zero_order and not self.delta_prime > 0:
            raise ParameterError("DGFM needs delta_prime > 0")
        if self.eval_every is not None and self.eval_every < 1:
            raise ParameterError("eval_every must be >= 1")


def _run(cfg: BaselineConfig, suite: ObjectiveSuite, M: CommMatrix, oracle: str, solver: str,
         test_set=None, streams=None, workers=None) -> RunResult:
    cfg.validate(oracle == "zero")
    if not isinstance(M, CommMatrix) or M.n != suite.n:
        raise ParameterError("communication matrix does not match the number of agents")
    if cfg.x0 is not None and len(cfg.x0) != suite.dim:
        raise ParameterError(f"x0 has length {len(cfg.x0)}, expected {suite.dim}")
    n, d = suite.n, suite.dim
    block = cfg.eval_every or cfg.rounds
    streams = streams or AgentStreams.from_seed(cfg.seed, n)
    workers = default_workers() if workers is None else workers
    x0 = np.zeros(d) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    y = np.array(np.broadcast_to(x0, (n, d)), dtype=float)
    eval_rng = run_stream(cfg.seed, "eval")
    trace, candidates = [], []
    calls = evals = 0
    worst = 0.0

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def ask(i, y):
        F = suite.locals[i]
        xi = F.draw(streams.xi[i], cfg.batch_size)
        return query_oracle(oracle, F, y[i], cfg.delta_prime, xi, streams.z[i])

    try:
        for t in range(1, cfg.rounds + 1):
            if pool is None:
                g = np.array([ask(i, y) for i in range(n)])
            else:
                g = np.array(list(pool.map(lambda i: ask(i, y), range(n))))
            y = gossip(M, y - cfg.step_size * g)
            if not np.all(np.isfinite(y)):
                raise NonFiniteError("non-finite iterate", (t - 1) // block + 1, t)
            calls += n
            if oracle == "zero":
                evals += 2 * n
            spread = float(disagreement(y).max())
            worst = max(worst, spread)
            epoch, r = (t - 1) // block + 1, (t - 1) % block + 1
            if r == block or t == cfg.rounds:
                ybar = y.mean(axis=0)
                candidates.append(ybar)
                grad, proxy, acc = _epoch_metrics(suite, ybar, test_set, cfg.proxy_samples,
                                                  cfg.delta, eval_rng)
                trace.append(TraceRecord(epoch, r, solver, grad, proxy, acc, spread, calls))
            elif r % cfg.trace_every == 0:
                trace.append(TraceRecord(epoch, r, solver, disagreement_max=spread, oracle_calls=calls))
    finally:
        if pool is not None:
            pool.shutdown()
    cands = np.array(candidates)
    return RunResult(
        candidates=cands,
        output=cands[-1].copy(),
        output_index=len(cands) - 1,
        trace=trace,
        oracle_calls=calls,
        function_evals=evals,
        rounds_per_epoch=block,
        max_disagreement=worst,
        solver=solver,
    )


def run_dpsgd(cfg: BaselineConfig, suite: ObjectiveSuite, M: CommMatrix, **kw) -> RunResult:
    """Decentralized SGD: stochastic subgradient at ``y_i``, local step, then gossip."""
    return _run(cfg, suite, M, "first", "dpsgd", **kw)


def run_dgfm(cfg: BaselineConfig, suite: ObjectiveSuite, M: CommMatrix, **kw) -> RunResult:
    """Decentralized gradient-free method with the two-point sphere estimator."""
    return _run(cfg, suite, M, "zero", "dgfm", **kw)
