"""Certified randomness as a function of the observed violation.

For each value of the inequality, the relaxation bounds the probability
that an adversary guesses one outcome; its negative logarithm is the
min-entropy. At the classical bound nothing is certified.
"""
import numpy as np

from ncpolytope import golden
from ncpolytope.hierarchy import entropy_curve, upper_bound
from ncpolytope.scenario import get_scenario

s = get_scenario("s7")
I7 = golden.named("s7", "I7")
top = upper_bound(s, I7, level=1)
grid = np.linspace(1.5, top, 7)
for i, h in entropy_curve(s, I7, grid, level=1):
    print(f"I7 = {i:.4f}   h = {h:.4f}  " + "#" * int(100 * h))
