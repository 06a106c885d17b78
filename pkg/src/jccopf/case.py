"""A network bundled with its forecast-error model and derived sensitivities."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid_model import ConstraintView, Network, SensitivityMatrix, build_ptdf, constraint_views
from .uncertainty import ErrorModel, ModelError


@dataclass(frozen=True)
class Case:
    network: Network
    errors: ErrorModel
    name: str = field(default="case", compare=False)

    def __post_init__(self):
        if self.errors.n_wind != len(self.network.wind):
            raise ModelError(f"covariance is {self.errors.n_wind}x{self.errors.n_wind}, "
                             f"network has {len(self.network.wind)} wind farms")
        if self.errors.per_step and self.errors.covariance.shape[0] != self.network.horizon:
            raise ModelError("per-step covariance count differs from the horizon")

    @property
    def horizon(self) -> int:
        return self.network.horizon

    @cached_property
    def sensitivities(self) -> SensitivityMatrix:
        return build_ptdf(self.network)

    @cached_property
    def views(self) -> tuple[ConstraintView, ...]:
        return tuple(constraint_views(self.network))

    @cached_property
    def forecasts(self) -> np.ndarray:
        return self.network.forecast_matrix()

    @cached_property
    def demands(self) -> np.ndarray:
        return self.network.demand_matrix()

    def covariance(self, t: int) -> np.ndarray:
        return self.errors.at(t)
