"""Double-integrator benchmark for the sampled-data safety filter.

A unit-mass point on a line, ``x1dd = u + d``, must stay inside a
position corridor ``x_min <= x1 <= x_max`` despite a bounded matched
disturbance and a zero-order-hold control updated every ``sample_time``
seconds.  The nominal controller deliberately drives the state toward a
target outside the corridor so the filter is exercised on every run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from barriergrasp.barrier import (
    ExtendedClassK,
    MarginEstimate,
    PositionConstraint,
    SecondOrderPlant,
    barrier_halfspace,
    estimate_nu,
    eval_h_robust,
)
from barriergrasp.qp import filter_control

__all__ = [
    "DoubleIntegratorBenchmark",
    "sample_initial_state",
    "episode",
    "invariance_trial",
    "margin_curve",
]


@dataclass(frozen=True)
class DoubleIntegratorBenchmark:
    """Corridor-keeping benchmark configuration."""

    x_min: float = 1.0
    x_max: float = 4.0
    delta: float = 0.05
    beta: float = 0.1
    nu_hat: float = 0.01
    sample_time: float = 0.01
    d_bound: float = 0.05
    u_bound: float = 10.0
    v_bound: float = 3.0
    alpha1: ExtendedClassK = field(default_factory=lambda: ExtendedClassK("linear", 1.0))
    alpha2: ExtendedClassK = field(default_factory=lambda: ExtendedClassK("linear", 1.0))

    @property
    def constraints(self) -> tuple[PositionConstraint, PositionConstraint]:
        lower = PositionConstraint.affine([1.0], -self.x_min,
                                          delta=self.delta, beta=self.beta)
        upper = PositionConstraint.affine([-1.0], self.x_max,
                                          delta=self.delta, beta=self.beta)
        return lower, upper

    @property
    def plant(self) -> SecondOrderPlant:
        return SecondOrderPlant(
            dim_q=1, dim_u=1,
            drift_accel=lambda x: np.zeros(1),
            input_matrix=lambda x: np.ones((1, 1)),
        )

    def velocity_interval(self, x1: float) -> tuple[float, float]:
        """Velocities with both barriers nonnegative at position x1."""
        lower, upper = self.constraints
        lo = -float(self.alpha1(eval_h_robust(lower, [x1]))) + self.beta
        hi = float(self.alpha1(eval_h_robust(upper, [x1]))) - self.beta
        return lo, hi

    def region(self, rng: np.random.Generator) -> np.ndarray:
        """Sampler over the operating region, for margin estimation."""
        x1 = rng.uniform(self.x_min, self.x_max)
        v = rng.uniform(-self.v_bound, self.v_bound)
        return np.array([x1, v])


def sample_initial_state(bench: DoubleIntegratorBenchmark,
                         rng: np.random.Generator) -> np.ndarray:
    """Random state strictly inside both robust barrier sets."""
    pad = bench.delta
    for _ in range(1000):
        x1 = rng.uniform(bench.x_min + pad + 1e-3, bench.x_max - pad - 1e-3)
        lo, hi = bench.velocity_interval(x1)
        if lo < hi:
            v = rng.uniform(lo, hi)
            return np.array([x1, v])
    raise RuntimeError("could not sample an admissible initial state")


def episode(bench: DoubleIntegratorBenchmark, x0: np.ndarray, duration: float,
            rng: np.random.Generator) -> dict:
    """One zero-order-hold run with the safety filter engaged.

    The nominal input chases a target outside the corridor; a fresh
    disturbance, constant over each sampling interval, is drawn uniformly
    within the stated bound.  Integration over each interval is exact.
    Returns per-sample arrays including the robust constraint values.
    """
    T = bench.sample_time
    n = int(math.floor(duration / T + 1e-9))
    lower, upper = bench.constraints
    plant = bench.plant
    target = float(rng.choice([bench.x_min - 2.0, bench.x_max + 2.0]))
    lb = np.array([-bench.u_bound])
    ub = np.array([bench.u_bound])

    x = np.asarray(x0, dtype=float).copy()
    t_arr = np.empty(n)
    h_arr = np.empty((n, 2))
    u_arr = np.empty(n)
    for k in range(n):
        t_arr[k] = k * T
        h_arr[k, 0] = eval_h_robust(lower, x[:1])
        h_arr[k, 1] = eval_h_robust(upper, x[:1])
        rows = [
            barrier_halfspace(plant, c, bench.alpha1, bench.alpha2, bench.nu_hat, x)
            for c in (lower, upper)
        ]
        u_nom = np.array([-5.0 * (x[0] - target) - 2.0 * x[1]])
        u = filter_control(u_nom, rows, lb, ub)
        d = rng.uniform(-bench.d_bound, bench.d_bound)
        a = float(u[0]) + d
        x = np.array([x[0] + x[1] * T + 0.5 * a * T * T, x[1] + a * T])
        u_arr[k] = float(u[0])
    return {"t": t_arr, "h_rob": h_arr, "u": u_arr, "target": target}


def invariance_trial(bench: DoubleIntegratorBenchmark, n_runs: int = 50,
                     duration: float = 10.0, seed: int = 0) -> float:
    """Minimum robust constraint value over all samples of all runs."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(n_runs):
        x0 = sample_initial_state(bench, rng)
        out = episode(bench, x0, duration, rng)
        worst = min(worst, float(out["h_rob"].min()))
    return worst


def margin_curve(bench: DoubleIntegratorBenchmark, T_values,
                 n_samples: int = 2000, seed: int = 0) -> tuple[MarginEstimate, list]:
    """Sampling-margin constants and nu(T) over a grid of sample times."""
    est = estimate_nu(
        bench.plant, list(bench.constraints), bench.alpha1, bench.alpha2,
        bench.region, u_bound=bench.u_bound, T=float(T_values[0]),
        n_samples=n_samples, seed=seed,
    )
    return est, [(float(T), est.nu_of_T(float(T))) for T in T_values]
