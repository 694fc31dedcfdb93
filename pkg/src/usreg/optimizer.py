"""Nelder-Mead downhill simplex minimizer."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class SimplexConfig:
    """Simplex parameters.

    ``initial_size_units`` is the offset of each extra starting vertex along
    its axis; values outside [3, 5] need ``allow_any_size``.

    Termination reasons:

    - ``x_tol``: the simplex diameter (largest vertex distance from the best
      vertex) is at most ``x_tol`` and the cost spread at most ``f_tol``;
    - ``f_tol``: all vertices have exactly the same cost (a flat landscape
      gives no direction to follow);
    - ``max_evals`` / ``timeout``: budget exhausted.
    """

    initial_size_units: float | tuple = 4.0
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_evals: int = 2000
    x_tol: float = 0.01
    f_tol: float = 1e-5
    max_time: float | None = None
    restart: bool = False
    allow_any_size: bool = False

    def __post_init__(self):
        sizes = np.atleast_1d(np.asarray(self.initial_size_units, dtype=float))
        if np.any(sizes <= 0):
            raise ValueError("initial simplex size must be positive")
        if not self.allow_any_size and (sizes.min() < 3 or sizes.max() > 5):
            raise ValueError("initial simplex size must lie in [3, 5] units (set allow_any_size to override)")
        if min(self.reflection, self.expansion, self.contraction, self.shrink) <= 0:
            raise ValueError("simplex coefficients must be positive")
        if not self.reflection < self.expansion:
            raise ValueError("expansion must exceed reflection")
        if not (self.contraction < 1 and self.shrink < 1):
            raise ValueError("contraction and shrink must be below 1")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    evals: int
    reason: str
    iterations: int = 0
    history: list = field(default_factory=list)


def _initial_simplex(x0, sizes):
    n = x0.size
    sizes = np.broadcast_to(sizes, (n,))
    pts = np.tile(x0, (n + 1, 1))
    pts[1:] += np.diag(sizes)
    return pts


def minimize(f: Callable, x0, cfg: SimplexConfig = SimplexConfig(), callback=None) -> OptResult:
    """Minimize ``f`` from ``x0`` with the Nelder-Mead simplex method.

    All coordinates are updated together. The simplex starts at ``x0`` plus
    one vertex offset along each axis by ``cfg.initial_size_units``.

    ``callback(iteration, operation, simplex, costs)`` is called after each
    step with the simplex sorted best first. ``OptResult.history`` holds the
    best cost after each iteration.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    sizes = np.asarray(cfg.initial_size_units, dtype=float)
    f0 = f(x0)
    if not math.isfinite(f0):
        raise OptimizerError(f"cost at the starting point is not finite ({f0})")
    result = _run(f, x0, f0, sizes, cfg, callback, evals=1, t0=time.perf_counter())
    if cfg.restart and result.reason != "max_evals" and result.reason != "timeout":
        again = _run(f, result.x, result.fun, sizes, cfg, callback, evals=result.evals + 1,
                     t0=time.perf_counter(), history=result.history)
        again.iterations += result.iterations
        return again
    return result


def _run(f, x0, f0, sizes, cfg, callback, evals, t0, history=None):
    n = x0.size
    pts = _initial_simplex(x0, sizes)
    costs = np.empty(n + 1)
    costs[0] = f0
    for i in range(1, n + 1):
        costs[i] = f(pts[i])
    evals += n
    # creation stamps break cost ties deterministically
    stamps = np.arange(n + 1)
    next_stamp = n + 1
    history = [] if history is None else history
    rho, chi, gamma, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    it = 0

    while True:
        order = np.lexsort((stamps, costs))
        pts, costs, stamps = pts[order], costs[order], stamps[order]
        history.append(float(costs[0]))
        spread = costs[-1] - costs[0]
        if spread == 0.0:
            reason = "f_tol"
            break
        if spread <= cfg.f_tol and np.max(np.linalg.norm(pts[1:] - pts[0], axis=1)) <= cfg.x_tol:
            reason = "x_tol"
            break
        if evals >= cfg.max_evals:
            reason = "max_evals"
            break
        if cfg.max_time is not None and time.perf_counter() - t0 > cfg.max_time:
            reason = "timeout"
            break
        it += 1

        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = centroid + rho * (centroid - worst)
        fr = f(xr)
        evals += 1
        op = None
        if fr < costs[0]:
            xe = centroid + rho * chi * (centroid - worst)
            fe = f(xe)
            evals += 1
            new, fnew, op = (xe, fe, "expand") if fe < fr else (xr, fr, "reflect")
        elif fr < costs[-2]:
            new, fnew, op = xr, fr, "reflect"
        elif fr < costs[-1]:
            xc = centroid + gamma * (xr - centroid)
            fc = f(xc)
            evals += 1
            if fc <= fr:
                new, fnew, op = xc, fc, "contract_outside"
        else:
            xc = centroid - gamma * (centroid - worst)
            fc = f(xc)
            evals += 1
            if fc < costs[-1]:
                new, fnew, op = xc, fc, "contract_inside"

        if op is None:
            op = "shrink"
            best = pts[0]
            for i in range(1, n + 1):
                pts[i] = best + sigma * (pts[i] - best)
                costs[i] = f(pts[i])
                stamps[i] = next_stamp
                next_stamp += 1
            evals += n
        else:
            pts[-1] = new
            costs[-1] = fnew
            stamps[-1] = next_stamp
            next_stamp += 1

        if callback is not None:
            o = np.lexsort((stamps, costs))
            callback(it, op, pts[o].copy(), costs[o].copy())

    return OptResult(pts[0].copy(), float(costs[0]), evals, reason, it, history)
