"""Gaussian-process Bayesian optimization over the multi-laser feature
hyperparameters (duplication a, amplification b, peak-loss weight c),
minimizing a validation-RMSE objective.

The surrogate is exact GP regression with a Matern-5/2 kernel (per-dimension
length scales) on points normalized to the unit cube; acquisition is
minimization-form expected improvement.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erf as _erf
from scipy.stats import qmc

PENALTY_OBJECTIVE = 1e6  # recorded for non-finite objective evaluations


class GpNumericError(RuntimeError):
    """Covariance stayed non-positive-definite after jitter escalation."""


@dataclass(frozen=True)
class HyperPoint:
    a: int  # laser-column duplication count
    b: float  # laser-column amplification
    c: float  # peak-loss weight

    def __post_init__(self) -> None:
        if self.a < 1 or self.b < 1.0 or self.c < 1.0:
            raise ValueError(f"hyperparameters must be >= 1, got {self}")


@dataclass(frozen=True)
class HyperBounds:
    a: tuple[float, float] = (1.0, 4.0)
    b: tuple[float, float] = (1.0, 1000.0)
    c: tuple[float, float] = (1.0, 1e4)

    def lows(self) -> np.ndarray:
        return np.array([self.a[0], self.b[0], self.c[0]])

    def highs(self) -> np.ndarray:
        return np.array([self.a[1], self.b[1], self.c[1]])

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lows() + np.asarray(u) * (self.highs() - self.lows())

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.lows()) / (self.highs() - self.lows())

    def point_from_unit(self, u: np.ndarray) -> HyperPoint:
        raw = self.from_unit(u)
        a = int(round(raw[0]))
        a = max(int(self.a[0]), min(int(self.a[1]), a))
        return HyperPoint(a=a, b=float(raw[1]), c=float(raw[2]))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.highs() - self.lows()))


@dataclass(frozen=True)
class KernelConfig:
    length_scales: np.ndarray  # per-dimension, unit-cube units
    signal_variance: float
    noise_variance: float


@dataclass
class GpPosterior:
    x_obs: np.ndarray  # (n, d) in the unit cube
    y_obs: np.ndarray
    kernel: KernelConfig
    y_mean: float
    chol: tuple
    alpha: np.ndarray


@dataclass
class TuneEval:
    index: int
    point: HyperPoint
    raw_a: float  # continuous proposal before integer rounding
    objective: float
    seconds: float


@dataclass
class TuneTrace:
    evaluations: list[TuneEval] = field(default_factory=list)

    def best_so_far(self) -> list[float]:
        out = []
        best = math.inf
        for ev in self.evaluations:
            best = min(best, ev.objective)
            out.append(best)
        return out


def _matern52(x1: np.ndarray, x2: np.ndarray, kernel: KernelConfig) -> np.ndarray:
    scaled1 = x1 / kernel.length_scales
    scaled2 = x2 / kernel.length_scales
    d2 = (
        np.sum(scaled1**2, axis=1)[:, None]
        + np.sum(scaled2**2, axis=1)[None, :]
        - 2.0 * scaled1 @ scaled2.T
    )
    r = np.sqrt(np.maximum(d2, 0.0))
    sqrt5_r = math.sqrt(5.0) * r
    return kernel.signal_variance * (1.0 + sqrt5_r + 5.0 * r**2 / 3.0) * np.exp(-sqrt5_r)


def gp_posterior(x_obs: np.ndarray, y_obs: np.ndarray, kernel: KernelConfig) -> GpPosterior:
    """Exact GP regression on unit-cube points with a constant-mean prior."""
    x_obs = np.atleast_2d(np.asarray(x_obs, dtype=np.float64))
    y_obs = np.asarray(y_obs, dtype=np.float64).reshape(-1)
    if x_obs.shape[0] != y_obs.size or y_obs.size < 1:
        raise ValueError("need matching, nonempty observations")
    if not np.all(np.isfinite(x_obs)) or not np.all(np.isfinite(y_obs)):
        raise ValueError("observations must be finite")
    y_mean = float(np.mean(y_obs))
    k_mat = _matern52(x_obs, x_obs, kernel)
    k_mat = k_mat + kernel.noise_variance * np.eye(x_obs.shape[0])
    jitter = 1e-12 * max(kernel.signal_variance, 1.0)
    for _ in range(12):
        try:
            chol = cho_factor(k_mat + jitter * np.eye(x_obs.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
    else:
        raise GpNumericError("covariance not positive definite after jitter escalation")
    alpha = cho_solve(chol, y_obs - y_mean)
    return GpPosterior(
        x_obs=x_obs, y_obs=y_obs, kernel=kernel, y_mean=y_mean, chol=chol, alpha=alpha
    )


def query(posterior: GpPosterior, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at unit-cube query points (rows)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k_star = _matern52(x, posterior.x_obs, posterior.kernel)
    mean = posterior.y_mean + k_star @ posterior.alpha
    v = cho_solve(posterior.chol, k_star.T)
    var = posterior.kernel.signal_variance - np.sum(k_star * v.T, axis=1)
    return mean, np.maximum(var, 0.0)


def _neg_log_marginal(log_params: np.ndarray, x: np.ndarray, y: np.ndarray, noise: float) -> float:
    d = x.shape[1]
    kernel = KernelConfig(
        length_scales=np.exp(log_params[:d]),
        signal_variance=float(np.exp(log_params[d])),
        noise_variance=noise,
    )
    n = x.shape[0]
    y_c = y - np.mean(y)
    k_mat = _matern52(x, x, kernel) + (noise + 1e-12 * kernel.signal_variance) * np.eye(n)
    try:
        chol = cho_factor(k_mat, lower=True)
    except np.linalg.LinAlgError:
        return 1e12
    alpha = cho_solve(chol, y_c)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    return float(0.5 * y_c @ alpha + 0.5 * log_det + 0.5 * n * math.log(2.0 * math.pi))


def fit_kernel(x: np.ndarray, y: np.ndarray, seed: int, n_restarts: int = 3) -> KernelConfig:
    """Maximize the marginal likelihood over length scales and signal variance
    with multi-start bounded search; noise floored at 1e-6 of the observed
    variance."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    d = x.shape[1]
    y_var = float(np.var(y))
    if y_var <= 0.0:
        y_var = 1.0
    noise = max(1e-6 * y_var, 1e-12)
    bounds = [(math.log(2e-2), math.log(10.0))] * d + [
        (math.log(1e-4 * y_var), math.log(1e3 * y_var))
    ]
    rng = np.random.default_rng(seed)
    starts = [np.array([math.log(0.3)] * d + [math.log(y_var)])]
    for _ in range(n_restarts - 1):
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in bounds]))
    best = None
    best_val = math.inf
    for start in starts:
        res = optimize.minimize(
            _neg_log_marginal,
            start,
            args=(x, y, noise),
            method="L-BFGS-B",
            bounds=bounds,
        )
        if res.fun < best_val:
            best_val = res.fun
            best = res.x
    return KernelConfig(
        length_scales=np.exp(best[:d]),
        signal_variance=float(np.exp(best[d])),
        noise_variance=noise,
    )


def expected_improvement(mean, variance, best_observed: float):
    """Minimization-form EI; zero-variance points fall back to max(best-mean, 0)."""
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(variance < 0.0):
        raise ValueError("variance must be >= 0")
    sigma = np.sqrt(variance)
    improvement = best_observed - mean
    u = np.where(sigma > 0.0, improvement / np.where(sigma > 0.0, sigma, 1.0), 0.0)
    phi = np.exp(-0.5 * u**2) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * (1.0 + _erf(u / math.sqrt(2.0)))
    ei = improvement * cdf + sigma * phi
    ei = np.where(sigma > 0.0, ei, np.maximum(improvement, 0.0))
    return ei if ei.ndim else float(ei)


def _propose(posterior: GpPosterior, best: float, rng: np.random.Generator, d: int) -> np.ndarray:
    """EI maximization: dense seeded candidates plus local polish."""
    candidates = rng.random((2048, d))
    mean, var = query(posterior, candidates)
    ei = expected_improvement(mean, var, best)
    top = np.argsort(ei)[::-1][:4]

    def neg_ei(u: np.ndarray) -> float:
        m, v = query(posterior, u[None, :])
        return -float(expected_improvement(m, v, best)[0])

    best_u = candidates[top[0]]
    best_val = -ei[top[0]]
    for idx in top:
        res = optimize.minimize(
            neg_ei, candidates[idx], method="L-BFGS-B", bounds=[(0.0, 1.0)] * d
        )
        if res.fun < best_val:
            best_val = res.fun
            best_u = np.clip(res.x, 0.0, 1.0)
    return best_u


def tune(
    objective,
    bounds: HyperBounds = HyperBounds(),
    n_init: int = 5,
    n_iter: int = 25,
    seed: int = 0,
) -> tuple[HyperPoint, TuneTrace]:
    """Seeded quasi-random initialization followed by EI-driven evaluations.

    ``objective(point: HyperPoint) -> RMSE`` is minimized; non-finite returns
    are recorded with a large penalty and optimization continues.
    """
    if n_init < 2 or n_iter < 1:
        raise ValueError("need n_init >= 2 and n_iter >= 1")
    d = 3
    trace = TuneTrace()
    sampler = qmc.LatinHypercube(d=d, seed=seed)
    x_unit: list[np.ndarray] = []
    y_vals: list[float] = []

    def run_eval(u: np.ndarray, index: int) -> None:
        raw = bounds.from_unit(u)
        point = bounds.point_from_unit(u)
        start = time.perf_counter()
        value = objective(point)
        elapsed = time.perf_counter() - start
        if value is None or not math.isfinite(value):
            value = PENALTY_OBJECTIVE
        x_unit.append(np.asarray(u, dtype=np.float64))
        y_vals.append(float(value))
        trace.evaluations.append(
            TuneEval(
                index=index,
                point=point,
                raw_a=float(raw[0]),
                objective=float(value),
                seconds=elapsed,
            )
        )

    for i, u in enumerate(sampler.random(n_init)):
        run_eval(u, i)

    rng = np.random.default_rng(seed + 1)
    for it in range(n_iter):
        x_arr = np.array(x_unit)
        y_arr = np.array(y_vals)
        kernel = fit_kernel(x_arr, y_arr, seed=seed + 100 + it)
        posterior = gp_posterior(x_arr, y_arr, kernel)
        u = _propose(posterior, float(np.min(y_arr)), rng, d)
        if float(np.linalg.norm(u - x_arr, axis=1).min()) < 1e-9:
            u = rng.random(d)  # duplicate proposal: fall back to exploration
        run_eval(u, n_init + it)

    best_idx = int(np.argmin(y_vals))
    best_point = trace.evaluations[best_idx].point
    return best_point, trace


def write_trace_csv(path, trace: TuneTrace) -> None:
    best = trace.best_so_far()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "a", "b", "c", "rmse", "best_so_far", "seconds"])
        for ev, b in zip(trace.evaluations, best):
            writer.writerow(
                [
                    ev.index,
                    ev.point.a,
                    repr(ev.point.b),
                    repr(ev.point.c),
                    repr(ev.objective),
                    repr(b),
                    repr(ev.seconds),
                ]
            )


def format_table3(trace: TuneTrace, top: int = 10) -> str:
    """Top rows by objective in the hyperparameter-table layout."""
    rows = sorted(trace.evaluations, key=lambda ev: ev.objective)[:top]
    lines = ["a\tb\tc\tRMSE [degC]"]
    for ev in rows:
        lines.append(f"{ev.point.a}\t{ev.point.b:.0f}\t{ev.point.c:.2f}\t{ev.objective:.4g}")
    return "\n".join(lines)
