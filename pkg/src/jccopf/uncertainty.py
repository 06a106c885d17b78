"""Wind forecast-error model and the fixed scenario sets drawn from it.

Stream rule: ``SeedSequence(seed).spawn(horizon)`` gives one child per time
step, each feeding its own PCG64 generator. Draws for step ``t`` are
``w_t + z @ L.T`` with ``z`` of shape (N_s, N_w) from ``standard_normal``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ModelError(ValueError):
    """Covariance is not a valid (symmetric positive semidefinite) matrix."""


def factor_covariance(cov, sym_tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == cov``.

    Semidefinite inputs are supported: a vanishing pivot zeroes its column
    instead of failing.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ModelError(f"covariance must be square, got shape {cov.shape}")
    scale = max(1.0, float(np.max(np.abs(cov), initial=0.0)))
    if np.max(np.abs(cov - cov.T), initial=0.0) > sym_tol * scale:
        raise ModelError("covariance is not symmetric")
    cov = 0.5 * (cov + cov.T)
    tol = 1e-10 * scale
    eig_min = float(np.linalg.eigvalsh(cov)[0]) if cov.size else 0.0
    if eig_min < -tol:
        raise ModelError(f"covariance has a negative eigenvalue {eig_min:.6g}")

    n = cov.shape[0]
    low = np.zeros_like(cov)
    for j in range(n):
        pivot = cov[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= tol:
            # remaining column must vanish for a PSD matrix
            continue
        low[j, j] = np.sqrt(pivot)
        low[j + 1:, j] = (cov[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


@dataclass(frozen=True)
class ErrorModel:
    """Zero-mean Gaussian forecast error, shared or per-time-step covariance.

    ``covariance`` has shape (N_w, N_w) or (horizon, N_w, N_w).
    """
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        if cov.ndim not in (2, 3) or cov.shape[-1] != cov.shape[-2]:
            raise ModelError(f"covariance must be (N_w, N_w) or (T, N_w, N_w), got {cov.shape}")
        for c in (cov if cov.ndim == 3 else [cov]):
            factor_covariance(c)
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)

    @property
    def n_wind(self) -> int:
        return self.covariance.shape[-1]

    @property
    def per_step(self) -> bool:
        return self.covariance.ndim == 3

    def at(self, t: int) -> np.ndarray:
        return self.covariance[t] if self.per_step else self.covariance

    def factors(self, horizon: int) -> list[np.ndarray]:
        if self.per_step:
            if self.covariance.shape[0] != horizon:
                raise ModelError(f"per-step covariance has {self.covariance.shape[0]} "
                                 f"entries, horizon is {horizon}")
            return [factor_covariance(c) for c in self.covariance]
        shared = factor_covariance(self.covariance)
        return [shared] * horizon


@dataclass(frozen=True)
class ScenarioSet:
    """Wind power samples ``draws[t]`` of shape (N_s, N_w) per time step."""
    draws: tuple[np.ndarray, ...]
    seed: int | None = None

    def __post_init__(self):
        frozen = []
        for d in self.draws:
            arr = np.array(d, dtype=float)
            if arr.ndim != 2:
                raise ModelError("each time step needs an (N_s, N_w) sample array")
            arr.setflags(write=False)
            frozen.append(arr)
        if len({a.shape for a in frozen}) > 1:
            raise ModelError("sample arrays differ in shape across time steps")
        object.__setattr__(self, "draws", tuple(frozen))

    @property
    def horizon(self) -> int:
        return len(self.draws)

    @property
    def count(self) -> int:
        return self.draws[0].shape[0]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.draws[t]


def draw_scenarios(model: ErrorModel, forecasts, n_samples: int, seed: int) -> ScenarioSet:
    """Sample ``n_samples`` wind realizations per time step.

    ``forecasts`` has shape (horizon, N_w).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    forecasts = np.asarray(forecasts, dtype=float)
    horizon, n_wind = forecasts.shape
    if n_wind != model.n_wind:
        raise ModelError(f"forecasts have {n_wind} wind farms, covariance has {model.n_wind}")
    factors = model.factors(horizon)
    streams = np.random.SeedSequence(seed).spawn(horizon)
    draws = []
    for t, (child, low) in enumerate(zip(streams, factors)):
        rng = np.random.Generator(np.random.PCG64(child))
        z = rng.standard_normal((n_samples, n_wind))
        draws.append(forecasts[t] + z @ low.T)
    return ScenarioSet(tuple(draws), seed=seed)


def write_scenarios_csv(scenarios: ScenarioSet, path) -> None:
    """Write ``t,s,w_1,...`` rows; ``t`` and ``s`` are 1-based."""
    n_wind = scenarios[0].shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "s"] + [f"w_{k + 1}" for k in range(n_wind)])
        for t, arr in enumerate(scenarios.draws):
            for s, row in enumerate(arr):
                out.writerow([t + 1, s + 1] + [repr(float(v)) for v in row])


def read_scenarios_csv(path) -> ScenarioSet:
    """Load an empirical scenario set written by :func:`write_scenarios_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ModelError(f"{path}: empty scenario file")
    header = rows[0]
    if header[:2] != ["t", "s"] or len(header) < 3:
        raise ModelError(f"{path}: header must be t,s,w_1,...")
    per_t: dict[int, list[tuple[int, list[float]]]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ModelError(f"{path}:{lineno}: expected {len(header)} fields")
        try:
            t, s = int(row[0]), int(row[1])
            vals = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ModelError(f"{path}:{lineno}: {exc}") from None
        per_t.setdefault(t, []).append((s, vals))
    steps = sorted(per_t)
    if steps != list(range(1, len(steps) + 1)):
        raise ModelError(f"{path}: time steps must run 1..T without gaps")
    draws = tuple(np.array([v for _, v in sorted(per_t[t])]) for t in steps)
    return ScenarioSet(draws)
