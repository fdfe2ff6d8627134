"""A noncontextuality inequality as a dimension witness.

Restricting the relaxation to moments realisable by qubits bounds the
qubit value from above. When a qutrit strategy beats that bound, the
observed value certifies dimension at least three. Takes about a minute.
"""
from ncpolytope import golden
from ncpolytope.hierarchy import dim_restricted_bound
from ncpolytope.quantum import SeesawConfig, evaluate, load_strategy, seesaw
from ncpolytope.scenario import get_scenario

s = get_scenario("s6")
ineq = golden.named("s6", "I6^1")
qubit_ub = dim_restricted_bound(s, ineq, 2, level=3)
qubit_lb, _ = seesaw(s, ineq, 2, SeesawConfig(restarts=5, seed=0))
qutrit, _ = seesaw(s, ineq, 3, SeesawConfig(restarts=5, seed=0))
print(f"qubits:  {qubit_lb:.4f} <= Q <= {qubit_ub:.4f}")
print(f"qutrits: see-saw reaches {qutrit:.4f}")
print("dimension witnessed:", qutrit > qubit_ub + 1e-6)

# a published qutrit strategy, rounded to four digits, evaluates to nearly the same value
st = load_strategy(golden.fixture_path("s6_I6_1_d3.strategy"), s)
print(f"bundled d=3 strategy: {evaluate(st, ineq, s):.4f}")
