"""How far can qubits violate a noncontextuality inequality?

A see-saw search gives a lower bound (an explicit qubit strategy), the
moment-matrix relaxation an upper bound valid in every dimension. The
robustness is the largest white-noise fraction that still leaves a
violation.
"""
from ncpolytope import golden
from ncpolytope.hierarchy import upper_bound
from ncpolytope.quantum import SeesawConfig, evaluate, robustness, seesaw
from ncpolytope.scenario import get_scenario

for key, name in [("s2", "I2"), ("s7", "I7")]:
    s = get_scenario(key)
    ineq = golden.named(key, name)
    qs, strat = seesaw(s, ineq, 2, SeesawConfig(restarts=10, seed=0))
    w = robustness(strat, ineq, ineq.bound, s)
    q1 = upper_bound(s, ineq, level=1)
    print(f"{name}: classical bound {ineq.bound}, qubit value {qs:.4f}, "
          f"relaxation bound {q1:.4f}, robustness {w:.3f}")
    # mixing in exactly that much noise lands on the classical bound
    print(f"    value after mixing: {evaluate(strat.mixed(w), ineq):.9f}")

print("\noptimal qubit states for I7 (Bloch vectors):")
for rho in strat.states:
    bloch = [2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real]
    print("   ", " ".join(f"{c:+.3f}" for c in bloch))
