"""Is a given behaviour noncontextual?

Membership is decided by a linear program over the product vertices. A
failed test returns a separating inequality, which certifies the verdict.
"""
import numpy as np

from ncpolytope import golden, nc_membership
from ncpolytope.quantum import SeesawConfig, sample_nc_behavior, seesaw
from ncpolytope.scenario import get_scenario

s = get_scenario("s7")
rng = np.random.default_rng(1)

# behaviours generated by a noncontextual model are always members
p, model = sample_nc_behavior(s, rng)
print("sampled model with", model.n_lambda, "ontic states -> member:", nc_membership(p, s).member)

# the qubit optimum for I7 is not
_, strat = seesaw(s, golden.named("s7", "I7"), 2, SeesawConfig(restarts=3, seed=0))
for w in (0.0, 0.3, 0.5):
    q = strat.mixed(w).behavior()
    res = nc_membership(list(q), s)
    print(f"noise {w:.1f}: member = {res.member}")
    if not res.member:
        sep = res.separating
        print(f"    separated by an inequality with value {sep.value(q):.4f} > {float(sep.bound):.4f}")
