"""JSON case files and run configuration.

Case layout::

    {"name": ..., "base_mva": 100,
     "buses": [{"id", "slack"}],
     "lines": [{"id", "from", "to", "reactance_pu", "limit_mw_upper",
                "limit_mw_lower", "monitored"}],
     "generators": [{"id", "bus", "g_min_mw", "g_max_mw", "ramp_down_mw",
                     "ramp_up_mw", "c2", "c1", "c0"}],
     "wind": [{"id", "bus", "forecast_mw": [...]}],
     "loads": [{"id", "bus", "demand_mw": [...]}],
     "uncertainty": {"covariance_mw2": N_w x N_w or T x N_w x N_w}}

``monitored`` is optional; when no line sets it the monitored set is the
lines touching a wind bus.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .case import Case
from .grid_model import Bus, GridError, Generator, Line, LoadPoint, Network, WindFarm
from .uncertainty import ErrorModel, ModelError, factor_covariance


class CaseError(ValueError):
    """A case file failed to parse; ``problems`` lists every diagnostic."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


def shipped_case_path(name: str) -> Path:
    """Path of a case bundled with the package, e.g. ``"five_bus"``."""
    fname = name if name.endswith(".json") else f"{name}.json"
    return Path(str(resources.files("jccopf") / "cases" / fname))


def load_shipped_case(name: str) -> Case:
    return parse_case(shipped_case_path(name))


class _Collector:
    def __init__(self):
        self.problems = []

    def get(self, obj, key, where, kind=float, default=...):
        if not isinstance(obj, dict) or key not in obj:
            if default is not ...:
                return default
            self.problems.append(f"{where}.{key}: missing field")
            return None
        val = obj[key]
        try:
            if kind is bool:
                if not isinstance(val, bool):
                    raise TypeError("expected true/false")
                return val
            if kind is list:
                return [float(v) for v in val]
            return kind(val)
        except (TypeError, ValueError) as exc:
            self.problems.append(f"{where}.{key}: {exc}")
            return None

    def build(self, ctor, where, **kw):
        if any(v is None for k, v in kw.items() if k != "monitored"):
            return None
        try:
            return ctor(**kw)
        except (GridError, TypeError, ValueError) as exc:
            self.problems.append(f"{where}: {exc}")
            return None


def case_from_dict(doc: dict, name: str = "case") -> Case:
    col = _Collector()
    if not isinstance(doc, dict):
        raise CaseError(["case: top level must be an object"])
    sections = {}
    for sec in ("buses", "lines", "generators", "wind", "loads"):
        items = doc.get(sec)
        if not isinstance(items, list) or not items:
            col.problems.append(f"{sec}: missing or empty list")
            items = []
        sections[sec] = items

    buses = [col.build(Bus, f"buses[{k}]", id=col.get(b, "id", f"buses[{k}]", int),
                       is_slack=col.get(b, "slack", f"buses[{k}]", bool, default=False))
             for k, b in enumerate(sections["buses"])]
    lines = []
    for k, ln in enumerate(sections["lines"]):
        w = f"lines[{k}]"
        lines.append(col.build(
            Line, w, id=col.get(ln, "id", w, int), from_bus=col.get(ln, "from", w, int),
            to_bus=col.get(ln, "to", w, int), reactance=col.get(ln, "reactance_pu", w),
            limit_upper=col.get(ln, "limit_mw_upper", w), limit_lower=col.get(ln, "limit_mw_lower", w),
            monitored=col.get(ln, "monitored", w, bool, default=None)))
    gens = []
    for k, g in enumerate(sections["generators"]):
        w = f"generators[{k}]"
        gens.append(col.build(
            Generator, w, id=col.get(g, "id", w, int), bus=col.get(g, "bus", w, int),
            g_min=col.get(g, "g_min_mw", w), g_max=col.get(g, "g_max_mw", w),
            ramp_down=col.get(g, "ramp_down_mw", w), ramp_up=col.get(g, "ramp_up_mw", w),
            c2=col.get(g, "c2", w), c1=col.get(g, "c1", w), c0=col.get(g, "c0", w, default=0.0)))
    wind = []
    for k, wf in enumerate(sections["wind"]):
        w = f"wind[{k}]"
        wind.append(col.build(WindFarm, w, id=col.get(wf, "id", w, int), bus=col.get(wf, "bus", w, int),
                              forecast=col.get(wf, "forecast_mw", w, list)))
    loads = []
    for k, ld in enumerate(sections["loads"]):
        w = f"loads[{k}]"
        loads.append(col.build(LoadPoint, w, id=col.get(ld, "id", w, int), bus=col.get(ld, "bus", w, int),
                               demand=col.get(ld, "demand_mw", w, list)))

    unc = doc.get("uncertainty")
    cov = None
    cov_problems = []
    if not isinstance(unc, dict) or "covariance_mw2" not in unc:
        cov_problems.append("uncertainty.covariance_mw2: missing field")
    else:
        try:
            cov = np.array(unc["covariance_mw2"], dtype=float)
            mats = cov if cov.ndim == 3 else [cov]
            if cov.ndim not in (2, 3):
                raise ModelError(f"expected a matrix or list of matrices, got {cov.ndim}-D")
            for mat in mats:
                factor_covariance(mat)
        except (ModelError, ValueError) as exc:
            cov_problems.append(f"uncertainty.covariance_mw2: {exc}")
            cov = None

    horizon = None
    lengths = [len(w.forecast) for w in wind if w] + [len(d.demand) for d in loads if d]
    if lengths:
        horizon = max(set(lengths), key=lengths.count)

    if col.problems or any(x is None for x in buses + lines + gens + wind + loads):
        raise CaseError(col.problems + cov_problems)
    problems = cov_problems
    if cov is not None and cov.shape[-1] != len(wind):
        problems.append(f"uncertainty.covariance_mw2: size {cov.shape[-1]} does not match "
                        f"{len(wind)} wind farms")
    if cov is not None and cov.ndim == 3 and cov.shape[0] != horizon:
        problems.append(f"uncertainty.covariance_mw2: {cov.shape[0]} matrices for horizon {horizon}")
    network = None
    try:
        network = Network(buses, lines, gens, wind, loads, horizon,
                          base_mva=float(doc.get("base_mva", 100.0)))
    except GridError as exc:
        problems = exc.problems + problems
    if problems:
        raise CaseError(problems)
    return Case(network, ErrorModel(cov), name=str(doc.get("name", name)))


def parse_case(path) -> Case:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise CaseError([f"{path}: {exc.strerror or exc}"]) from None
    except json.JSONDecodeError as exc:
        raise CaseError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    return case_from_dict(doc, name=path.stem)


def case_to_dict(case: Case) -> dict:
    net = case.network
    lines = []
    for ln in net.lines:
        d = {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "reactance_pu": ln.reactance,
             "limit_mw_upper": ln.limit_upper, "limit_mw_lower": ln.limit_lower}
        if ln.monitored is not None:
            d["monitored"] = ln.monitored
        lines.append(d)
    return {
        "name": case.name,
        "base_mva": net.base_mva,
        "buses": [{"id": b.id, "slack": b.is_slack} for b in net.buses],
        "lines": lines,
        "generators": [{"id": g.id, "bus": g.bus, "g_min_mw": g.g_min, "g_max_mw": g.g_max,
                        "ramp_down_mw": g.ramp_down, "ramp_up_mw": g.ramp_up,
                        "c2": g.c2, "c1": g.c1, "c0": g.c0} for g in net.generators],
        "wind": [{"id": w.id, "bus": w.bus, "forecast_mw": list(w.forecast)} for w in net.wind],
        "loads": [{"id": d.id, "bus": d.bus, "demand_mw": list(d.demand)} for d in net.loads],
        "uncertainty": {"covariance_mw2": case.errors.covariance.tolist()},
    }


def dumps_case(doc: dict) -> str:
    """JSON text with one bus, line, unit or matrix row per line."""
    parts = []
    for key, val in doc.items():
        if isinstance(val, list) and val:
            body = ",\n".join("    " + json.dumps(v) for v in val)
            parts.append(f"  {json.dumps(key)}: [\n{body}\n  ]")
        elif key == "uncertainty":
            rows = ",\n".join("    " + json.dumps(r) for r in val["covariance_mw2"])
            parts.append(f'  "uncertainty": {{"covariance_mw2": [\n{rows}\n  ]}}')
        else:
            parts.append(f"  {json.dumps(key)}: {json.dumps(val)}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def write_case(case: Case, path) -> None:
    Path(path).write_text(dumps_case(case_to_dict(case)))


@dataclass
class RunConfig:
    alpha: float = 0.05
    epsilon: float = 1e-4
    n_samples: int = 20_000
    n_eval: int = 100_000
    seed: int = 42
    eval_seed: int | None = None
    tolerance: float = 1e-5
    max_iter: int = 50
    methods: list[str] = field(default_factory=lambda: ["no_jcc", "boole", "improved_boole",
                                                        "improving_bound", "iterative"])
    out: str = "out"

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise CaseError([f"{path}: unknown config keys {unknown}"])
        return cls(**doc)

    def as_dict(self) -> dict:
        return asdict(self)
