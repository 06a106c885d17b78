"""Static grid description, DC sensitivities and signed line-limit views.

Orientation convention: a positive flow on a line runs from ``from_bus`` to
``to_bus``. Loads are stored as positive consumption and their sensitivity
rows are the withdrawal factors (negated injection PTDFs), so a flow is
always ``lam_g @ g + lam_w @ w + lam_d @ d`` with positive ``d``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GridError(ValueError):
    """Invalid network data; ``problems`` holds every diagnostic found."""

    def __init__(self, *problems: str):
        self.problems = list(problems)
        super().__init__("; ".join(problems))


class TopologyError(GridError):
    """Network is disconnected or its susceptance system is singular."""


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    limit_upper: float
    limit_lower: float
    monitored: bool | None = None  # None: decided by the network default rule

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise GridError(f"line {self.id}: from_bus equals to_bus")
        if not self.reactance > 0:
            raise GridError(f"line {self.id}: reactance must be positive")
        if not self.limit_lower < self.limit_upper:
            raise GridError(f"line {self.id}: limit_lower must be below limit_upper")


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    g_min: float
    g_max: float
    ramp_down: float
    ramp_up: float
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0

    def __post_init__(self):
        if self.g_min > self.g_max:
            raise GridError(f"generator {self.id}: g_min exceeds g_max")
        if not (self.ramp_down <= 0.0 <= self.ramp_up):
            raise GridError(f"generator {self.id}: need ramp_down <= 0 <= ramp_up")
        if self.c2 < 0:
            raise GridError(f"generator {self.id}: c2 must be nonnegative")


@dataclass(frozen=True)
class WindFarm:
    id: int
    bus: int
    forecast: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "forecast", tuple(float(v) for v in self.forecast))


@dataclass(frozen=True)
class LoadPoint:
    id: int
    bus: int
    demand: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "demand", tuple(float(v) for v in self.demand))
        if any(v < 0 for v in self.demand):
            raise GridError(f"load {self.id}: demand must be nonnegative")


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    wind: tuple[WindFarm, ...]
    loads: tuple[LoadPoint, ...]
    horizon: int
    base_mva: float = 100.0

    def __post_init__(self):
        for name in ("buses", "lines", "generators", "wind", "loads"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = validate_network(self)
        if problems:
            raise GridError(*problems)

    @property
    def slack_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_slack)

    @property
    def monitored_lines(self) -> tuple[Line, ...]:
        """Lines in the joint chance constraint.

        Explicit ``monitored`` flags win; if no line carries a flag, the set
        defaults to the lines touching a wind bus.
        """
        if any(ln.monitored is not None for ln in self.lines):
            return tuple(ln for ln in self.lines if ln.monitored)
        wind_buses = {w.bus for w in self.wind}
        return tuple(ln for ln in self.lines
                     if ln.from_bus in wind_buses or ln.to_bus in wind_buses)

    def forecast_matrix(self) -> np.ndarray:
        """Wind forecasts, shape (horizon, N_w)."""
        return np.array([w.forecast for w in self.wind], dtype=float).T.reshape(self.horizon, -1)

    def demand_matrix(self) -> np.ndarray:
        """Load demands, shape (horizon, N_d)."""
        return np.array([d.demand for d in self.loads], dtype=float).T.reshape(self.horizon, -1)


def validate_network(net: Network) -> list[str]:
    """Collect every structural problem instead of stopping at the first."""
    problems = []
    if net.horizon < 1:
        problems.append("horizon must be >= 1")
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        problems.append("bus ids are not unique")
    n_slack = sum(b.is_slack for b in net.buses)
    if n_slack != 1:
        problems.append(f"expected exactly one slack bus, found {n_slack}")
    known = set(ids)
    for ln in net.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                problems.append(f"line {ln.id}: unknown bus {end}")
    for kind, items in (("generator", net.generators), ("wind", net.wind), ("load", net.loads)):
        if not items:
            problems.append(f"at least one {kind} is required")
        seen = set()
        for it in items:
            if it.bus not in known:
                problems.append(f"{kind} {it.id}: unknown bus {it.bus}")
            if it.id in seen:
                problems.append(f"{kind} id {it.id} is duplicated")
            seen.add(it.id)
    for w in net.wind:
        if len(w.forecast) != net.horizon:
            problems.append(f"wind {w.id}: forecast length {len(w.forecast)} != horizon {net.horizon}")
    for d in net.loads:
        if len(d.demand) != net.horizon:
            problems.append(f"load {d.id}: demand length {len(d.demand)} != horizon {net.horizon}")
    return problems


@dataclass(frozen=True)
class SensitivityMatrix:
    """PTDF rows of the monitored lines split by injection type.

    ``lam_g`` has shape (L, N_g), ``lam_w`` (L, N_w), ``lam_d`` (L, N_d).
    ``lam_d`` already carries the withdrawal sign.
    """
    line_ids: tuple[int, ...]
    lam_g: np.ndarray
    lam_w: np.ndarray
    lam_d: np.ndarray

    def __post_init__(self):
        for name in ("lam_g", "lam_w", "lam_d"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class ConstraintView:
    """One side of a monitored line limit: ``sign * flow <= bound``.

    ``position`` is 0-based; ``n`` is the 1-based view index, odd for the
    upper limit and even for the lower limit of the same line.
    """
    position: int
    line_id: int
    sign: int
    bound: float

    @property
    def n(self) -> int:
        return self.position + 1

    @property
    def direction(self) -> str:
        return "forward" if self.sign > 0 else "reverse"

    def value(self, flow):
        return self.sign * flow

    def violated(self, flow):
        return self.sign * flow > self.bound


def bus_ptdf(network: Network, lines: Sequence[Line] | None = None) -> np.ndarray:
    """Bus-level injection PTDF, shape (len(lines), N_bus), columns in bus order.

    The slack column is identically zero.
    """
    lines = network.lines if lines is None else tuple(lines)
    bus_pos = {b.id: k for k, b in enumerate(network.buses)}
    n_bus = len(network.buses)
    slack = bus_pos[network.slack_bus]
    _check_connected(network)

    incidence = np.zeros((len(network.lines), n_bus))
    b_line = np.empty(len(network.lines))
    for k, ln in enumerate(network.lines):
        incidence[k, bus_pos[ln.from_bus]] = 1.0
        incidence[k, bus_pos[ln.to_bus]] = -1.0
        b_line[k] = 1.0 / ln.reactance
    b_bus = incidence.T @ (b_line[:, None] * incidence)

    keep = np.array([k for k in range(n_bus) if k != slack], dtype=int)
    b_red = b_bus[np.ix_(keep, keep)]
    try:
        chol = np.linalg.cholesky(b_red)
    except np.linalg.LinAlgError as exc:
        raise TopologyError("reduced susceptance matrix is singular") from exc
    # angles per unit injection at each non-slack bus
    theta = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(len(keep))))

    sel = np.array([network.lines.index(ln) for ln in lines], dtype=int)
    ptdf = np.zeros((len(lines), n_bus))
    ptdf[:, keep] = (b_line[sel, None] * incidence[np.ix_(sel, keep)]) @ theta
    return ptdf


def _check_connected(network: Network) -> None:
    adj = {b.id: [] for b in network.buses}
    for ln in network.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    start = network.slack_bus
    seen = {start}
    queue = deque([start])
    while queue:
        for nxt in adj[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    if len(seen) != len(network.buses):
        missing = sorted(set(adj) - seen)
        raise TopologyError(f"network is disconnected; unreachable buses {missing}")


def build_ptdf(network: Network) -> SensitivityMatrix:
    """Sensitivities of every monitored line to generators, wind and loads."""
    monitored = network.monitored_lines
    ptdf = bus_ptdf(network, monitored)
    bus_pos = {b.id: k for k, b in enumerate(network.buses)}

    def columns(items):
        return ptdf[:, [bus_pos[it.bus] for it in items]]

    return SensitivityMatrix(
        line_ids=tuple(ln.id for ln in monitored),
        lam_g=columns(network.generators),
        lam_w=columns(network.wind),
        lam_d=-columns(network.loads),
    )


def line_flows(sens: SensitivityMatrix, g_t, w_t, d_t) -> np.ndarray:
    """Monitored line flows for one time step.

    ``w_t`` may also be a stack of wind samples with shape (N_s, N_w); the
    result then has shape (N_s, L).
    """
    g_t = np.asarray(g_t, dtype=float)
    w_t = np.asarray(w_t, dtype=float)
    d_t = np.asarray(d_t, dtype=float)
    n_lines = len(sens.line_ids)
    if g_t.shape != (sens.lam_g.shape[1],) or d_t.shape != (sens.lam_d.shape[1],):
        raise GridError(f"injection size mismatch: g {g_t.shape}, d {d_t.shape}, "
                        f"expected ({sens.lam_g.shape[1]},), ({sens.lam_d.shape[1]},)")
    if w_t.shape[-1:] != (sens.lam_w.shape[1],) or w_t.ndim > 2:
        raise GridError(f"wind size mismatch: {w_t.shape}, expected (..., {sens.lam_w.shape[1]})")
    base = sens.lam_g @ g_t + sens.lam_d @ d_t if n_lines else np.zeros(0)
    return w_t @ sens.lam_w.T + base


def constraint_views(network: Network) -> list[ConstraintView]:
    monitored = network.monitored_lines
    if not monitored:
        raise GridError("no monitored lines")
    views = []
    for k, ln in enumerate(monitored):
        views.append(ConstraintView(2 * k, ln.id, +1, float(ln.limit_upper)))
        views.append(ConstraintView(2 * k + 1, ln.id, -1, float(-ln.limit_lower)))
    return views
