"""Noncontextual polytope of the simplest scenario, end to end.

Four preparations, two binary measurements, and one equivalence: the even
and odd mixtures of preparations cannot be told apart. We build the
preparation and measurement polytopes, take their product, enumerate its
facets exactly and group them into symmetry classes.
"""
from ncpolytope import golden
from ncpolytope.pipeline import reduce, run_pipeline
from ncpolytope.scenario import get_scenario
from ncpolytope.symmetry import classify_facets, find_symmetries

s = get_scenario("s1")
res = run_pipeline(s)

print("preparation vertices (rescaled q(x)):")
for v in res.prep.vertices:
    print("   ", " ".join(str(c) for c in v))
print("measurement vertices (deterministic responses):")
for v in res.meas.vertices:
    print("   ", " ".join(str(c) for c in v))
print(f"{len(res.product.vertices)} product vertices, {len(res.raw_facets)} facets")

# The equivalence fixes some coordinates in terms of others; facets are
# rewritten in the remaining free coordinates before they are compared.
print("\nsubstitutions:")
for line in res.basis.substitution_text():
    print("   ", line)

group = find_symmetries(s, prep=res.prep, meas=res.meas)
classes = classify_facets(res, group.generators())
print(f"\nsymmetry group of order {len(group)}; classes:")
for c in classes:
    kind = "trivial" if c.trivial else "nontrivial"
    print(f"   orbit {c.orbit_size:3d}  {kind:10s}  {c.representative.format(s)}")

# The nontrivial class is the parity-oblivious multiplexing success bound.
pom = reduce(golden.named("s1", "POM"), res.basis)
nontrivial = next(c for c in classes if not c.trivial)
print("\nPOM inequality in the nontrivial class:",
      pom in {res.reduced[i] for i in nontrivial.members})
