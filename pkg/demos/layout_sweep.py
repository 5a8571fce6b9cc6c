"""How the grid shape changes depth and KQ for the Steane syndrome measurement.

Fewer cells mean fewer qubits but more SWAPs; the KQ column shows the trade.
"""

from ftsynth import QubitLayout, SynthesisConfig, load_fixture, run_sabre, validate
from ftsynth.analysis import compute_kq
from ftsynth.ir import inject_moveback, moveback_targets
from ftsynth.mapper import SynthesisError

proto = load_fixture("steane_sm")
proto = inject_moveback(proto, moveback_targets(proto))
print(f"{'layout':>6s} {'cells':>5s} {'depth':>5s} {'KQ':>6s} {'swaps':>5s}")
for rows, cols in [(4, 4), (3, 6), (4, 5), (5, 5), (5, 7), (6, 7)]:
    g = QubitLayout(rows, cols)
    try:
        res = run_sabre(proto, g, SynthesisConfig(iterations=20, seed=3))
    except SynthesisError as exc:
        print(f"{rows}x{cols:<4d} {g.num_qubits:5d}  failed: {exc}")
        continue
    assert validate(res.circuit, proto, g).passed
    print(f"{rows}x{cols:<4d} {g.num_qubits:5d} {res.depth:5d} {compute_kq(res.depth, g.num_qubits):6d} "
          f"{res.circuit.inserted_swaps:5d}")
