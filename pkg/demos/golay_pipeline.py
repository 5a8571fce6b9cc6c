"""Three-stage Golay [[23,1,7]] synthesis: prepare, verify on four blocks, measure syndromes."""

from ftsynth import SynthesisConfig, validate
from ftsynth.workflow import golay_pipeline

res = golay_pipeline(None, SynthesisConfig(distance=7, seed=0), iterations=1)
for st in res.stages:
    c = st.job.circuit
    rep = validate(c, st.job.protocol, st.layout, anchors=st.job.anchors, dd_budget=st.dd_budget)
    print(f"{st.name:7s} {str(st.layout):>6s} depth {c.depth:4d}  swaps {c.inserted_swaps:4d}  "
          f"dd {rep.metrics['dd_swaps']}/{st.dd_budget}  valid {rep.passed}")

# the stage-1 placement is what every later stage is pinned to
print("\nprepared block placement (first 5):", dict(list(sorted(res.lq_mapping.items()))[:5]))
