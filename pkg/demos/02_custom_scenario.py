"""Describing a scenario in a file and inspecting its polytope sizes.

A scenario file lists the numbers of preparations, measurements and
outcomes, followed by equivalence groups: each ``|``-separated vector is a
mixture, and all mixtures in one group must be indistinguishable.
"""
import tempfile
from pathlib import Path

from ncpolytope import load_scenario, run_pipeline
from ncpolytope.scenario import dims_report

TEXT = """\
name three-preps
nx 6
ny 3
nz 2
# three pairs of preparations whose equal mixtures coincide
prep_equiv 1/2 1/2 0 0 0 0 | 0 0 1/2 1/2 0 0 | 0 0 0 0 1/2 1/2
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "three.txt"
    path.write_text(TEXT)
    s = load_scenario(path)

print(f"{s.name}: nx={s.nx} ny={s.ny} nz={s.nz}, {len(s.prep_equivs)} preparation equivalence(s)")
rep = dims_report(s)
for k, v in vars(rep).items():
    print(f"   {k:20s} {v}")

res = run_pipeline(s)
print(f"{len(res.prep.vertices)} preparation vertices, {len(res.meas.vertices)} measurement "
      f"vertices, {len(res.raw_facets)} facets ({len(res.nontrivial)} distinct nontrivial)")
for q in res.nontrivial[:5]:
    print("   ", q.format(s))
