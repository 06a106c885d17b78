"""Small network and case constructors shared by the tests."""
import numpy as np

from jccopf.case import Case
from jccopf.grid_model import Bus, Generator, Line, LoadPoint, Network, WindFarm
from jccopf.uncertainty import ErrorModel


def network(n_bus, edges, slack=1, gen_buses=(1,), wind_buses=(1,), load_buses=(1,),
            horizon=1, limit=100.0, monitored=None, reactances=None):
    """``edges`` is a list of (from, to); every line gets the same symmetric limit."""
    reactances = reactances or [0.1] * len(edges)
    lines = [Line(k + 1, f, t, x, limit, -limit,
                  None if monitored is None else (k + 1) in monitored)
             for k, ((f, t), x) in enumerate(zip(edges, reactances))]
    return Network(
        buses=[Bus(i, i == slack) for i in range(1, n_bus + 1)],
        lines=lines,
        generators=[Generator(j + 1, b, 0.0, 500.0, -500.0, 500.0, 0.01, 10.0 + j)
                    for j, b in enumerate(gen_buses)],
        wind=[WindFarm(k + 1, b, [10.0] * horizon) for k, b in enumerate(wind_buses)],
        loads=[LoadPoint(k + 1, b, [50.0] * horizon) for k, b in enumerate(load_buses)],
        horizon=horizon,
    )


def case_of(net, cov=None):
    n_w = len(net.wind)
    cov = np.eye(n_w) * 25.0 if cov is None else cov
    return Case(net, ErrorModel(cov))
