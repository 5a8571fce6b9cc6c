"""Route the Steane protocol set onto a 5x7 grid and check every circuit.

    python3 demos/steane_walkthrough.py [seed]
"""

import sys

from ftsynth import QubitLayout, SynthesisConfig, check_composition, render_snapshots, validate
from ftsynth.analysis import compute_kq
from ftsynth.workflow import ProtocolSet, synthesize_set

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
grid = QubitLayout(5, 7)
lqc, jobs = synthesize_set(ProtocolSet.steane(), grid, SynthesisConfig(iterations=5, seed=seed))

print("logical qubit configuration (data anchors):")
for q, p in sorted(lqc.positions.items()):
    print(f"  {q:8s} -> cell {p:2d} {divmod(p, grid.cols)}")

print(f"\n{'circuit':22s} {'layout':>6s} {'depth':>5s} {'KQ':>6s} {'swaps':>5s} {'dd':>3s}  valid  identity")
for name, job in jobs.items():
    c = job.circuit
    rep = validate(c, job.protocol, c.layout, anchors=job.anchors)
    data = [q for r in job.protocol.registers if r.role == "data" for q in r.qubits]
    ident = "yes" if all(c.final_mapping[q] == c.initial_mapping[q] for q in data) else "no"
    print(f"{name:22s} {c.rows}x{c.cols:<4d} {c.depth:5d} {compute_kq(c.depth, c.rows * c.cols):6d} "
          f"{c.inserted_swaps:5d} {rep.metrics['dd_swaps']:3d}  {str(rep.passed):5s}  {ident}")

# first two time steps of the syndrome measurement
sm = jobs["steane_sm"].circuit
assert check_composition(sm, jobs["steane_sm"].protocol)
for frame in render_snapshots(sm)[:2]:
    print()
    print(frame)
