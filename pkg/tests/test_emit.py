import json
import re
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from ftsynth.analysis import compute_kq
from ftsynth.emit import Circuit, Op, emit_json, load_circuit, parse_json, render_snapshots, schedule_steps
from ftsynth.ir import parse_protocol, static_analysis
from ftsynth.layout import QubitLayout
from ftsynth.library import load_fixture
from ftsynth.mapper import SynthesisConfig, run_sabre
from ftsynth.verify import replay_permutation, validate

GOLDEN = Path(__file__).parent / "golden"
G2x2 = QubitLayout(2, 2)


def small_circuit():
    ops = [Op("PrepZ", (2,)), Op("H", (0,)), Op("SWAP", (2, 3), True), Op("CNOT", (0, 1)),
           Op("CNOT", (1, 3), partition=1), Op("MeasZ", (3,), partition=1)]
    return schedule_steps(ops, G2x2, {"d[0]": 0, "d[1]": 1, "a[0]": 2}, name="small", num_partitions=2,
                          meta={"seed": 1, "dd_swaps": 0})


def test_disjoint_cnots_one_step():
    ops = [Op("CNOT", (i, i + 7)) for i in range(7)]
    assert schedule_steps(ops, QubitLayout(2, 7)).depth == 1


def test_same_qubit_serialises():
    assert schedule_steps([Op("H", (0,)), Op("H", (0,))], G2x2).depth == 2


def test_barrier_forces_later_step():
    c = schedule_steps([Op("CNOT", (0, 1)), Op("H", (2,), partition=1)], G2x2)
    assert c.depth == 2
    assert c.partitions == [0, 1]


def test_ops_must_be_partition_ordered():
    with pytest.raises(ValueError):
        schedule_steps([Op("H", (0,), partition=1), Op("H", (1,), partition=0)], G2x2)


def test_steps_are_disjoint():
    c = small_circuit()
    for step in c.steps:
        used = [q for o in step for q in o.qubits]
        assert len(used) == len(set(used))


def test_final_mapping_is_replayed():
    c = small_circuit()
    assert c.final_mapping == replay_permutation(c) == {"d[0]": 0, "d[1]": 1, "a[0]": 3}


@pytest.mark.parametrize("depth,qubits,kq", [(18, 15, 270), (44, 12, 528), (35, 35, 1225), (0, 5, 0)])
def test_kq(depth, qubits, kq):
    assert compute_kq(depth, qubits) == kq


def test_kq_rejects_negative():
    with pytest.raises(ValueError):
        compute_kq(-1, 3)


def test_empty_circuit_json():
    c = schedule_steps([], G2x2, {"q[0]": 0})
    d = json.loads(emit_json(c))
    assert d["steps"] == []
    assert d["analysis"]["depth"] == 0


def test_json_round_trip_is_canonical():
    c = small_circuit()
    text = emit_json(c)
    again = parse_json(text)
    assert again == c
    assert emit_json(again) == text


def test_golden_schema():
    assert emit_json(small_circuit()) == (GOLDEN / "small_circuit.json").read_text()


def test_load_golden():
    c = load_circuit(GOLDEN / "small_circuit.json")
    assert Op("SWAP", (2, 3), True, 0) in c.ops()
    assert c.analysis().to_dict()["inserted_swaps"] == 1


def test_malformed_circuit():
    with pytest.raises(ValueError):
        parse_json('{"layout": {"rows": 1}}')


@pytest.fixture(scope="module")
def sm_circuit():
    p = load_fixture("steane_sm")
    g = QubitLayout(5, 7)
    return p, g, run_sabre(p, g, SynthesisConfig(seed=2)).circuit


def test_protocol_gate_counts_preserved(sm_circuit):
    p, g, c = sm_circuit
    assert c.analysis().gate_counts == static_analysis(p).gate_counts
    assert c.analysis().barriers == 3


def test_depth_at_least_ideal(sm_circuit):
    p, g, c = sm_circuit
    assert c.depth >= static_analysis(p).depth


def test_swap_count_matches_verifier(sm_circuit):
    p, g, c = sm_circuit
    assert json.loads(emit_json(c))["analysis"]["inserted_swaps"] == validate(c, p, g).metrics["inserted_swaps"]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=12))
def test_depth_equals_ideal_for_local_gates(pairs):
    # on a fully connected toy (2x2 edges only) with no barriers, ASAP depth = DAG depth
    g = QubitLayout(2, 2)
    edges = set(g.edges())
    ops, text = [], ["qreg q[4];"]
    for a, b in pairs:
        if (min(a, b), max(a, b)) in edges:
            ops.append(Op("CNOT", (a, b)))
            text.append(f"cx q[{a}], q[{b}];")
        else:
            ops.append(Op("H", (a,)))
            text.append(f"h q[{a}];")
    c = schedule_steps(ops, g, {f"q[{i}]": i for i in range(4)})
    assert c.depth == static_analysis(parse_protocol("\n".join(text))).depth


def test_one_step_one_snapshot():
    c = schedule_steps([Op("H", (0,))], G2x2, {"q[0]": 0})
    assert len(render_snapshots(c)) == 1


def test_swap_glyph_pairs_cells():
    frames = render_snapshots(small_circuit())
    swap_frame = next(f for f in frames if "<" in f)
    tags = re.findall(r"<(\w)>", swap_frame)
    assert len(tags) == 2 and tags[0] == tags[1]
    assert "M" in frames[-1]


def test_final_snapshot_shows_anchors():
    p = load_fixture("steane_sm")
    from ftsynth.ir import inject_moveback, moveback_targets
    p = inject_moveback(p, moveback_targets(p))
    g = QubitLayout(5, 7)
    c = run_sabre(p, g, SynthesisConfig(seed=2)).circuit
    last = render_snapshots(c, g)[-1].splitlines()[1:]
    cells = [tok for line in last for tok in line.split()]
    for q, cell in c.initial_mapping.items():
        if q.startswith("data["):
            assert cells[cell].split(":")[0] == "d" + q[5:-1]


def test_svg_frames():
    frames = render_snapshots(small_circuit(), fmt="svg")
    assert len(frames) == small_circuit().depth
    assert all(f.startswith("<svg") for f in frames)
    assert "<polygon" in frames[-1]


def test_render_rejects_wrong_layout_and_format():
    with pytest.raises(ValueError):
        render_snapshots(small_circuit(), QubitLayout(3, 3))
    with pytest.raises(ValueError):
        render_snapshots(small_circuit(), fmt="png")
