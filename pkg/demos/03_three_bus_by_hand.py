"""The 3-bus toy worked by hand and by the library.

Bus 1 (slack) and bus 2 host the generators, bus 3 the wind farm and the
load. Only line 1-3 is monitored. Its flow is (2 (d - w) - g2) / 3, so the
wind error reaches it with standard deviation 12 * 2/3 = 8 MW.
"""
from jccopf import FrameworkConfig, load_shipped_case, solve_boole, solve_no_jcc
from jccopf.chance_reform import std_normal_quantile

case = load_shipped_case("three_bus")
cfg = FrameworkConfig(alpha=0.05)
z_bal = std_normal_quantile(1 - cfg.epsilon)
net_load = 150 - 30

# without line limits the cheap unit covers everything plus the reserve margin
g1 = net_load + z_bal * 12
print(f"no JCC   by hand g = ({g1:.4f}, 0)   library {solve_no_jcc(case, cfg).g[0].round(4)}")

# Boole splits alpha over two views; the upper one binds and sets g2
z_line = std_normal_quantile(1 - cfg.alpha / 2)
g2 = 3 * (2 * net_load / 3 - (70 - z_line * 8))
g1 = net_load + z_bal * 12 - g2
cost = 0.01 * g1**2 + 10 * g1 + 0.02 * g2**2 + 15 * g2
boole = solve_boole(case, cfg)
print(f"Boole    by hand g = ({g1:.4f}, {g2:.4f}) cost {cost:.4f}")
print(f"         library g = {boole.g[0].round(4)} cost {boole.objective:.4f}")
