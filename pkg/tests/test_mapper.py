import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_protocol
from ftsynth.dag import BACKWARD, FORWARD, build_dag
from ftsynth.emit import Op
from ftsynth.ir import Instruction, SymbolicDestination, inject_moveback, moveback_targets, parse_protocol
from ftsynth.layout import QubitLayout, distance_matrix
from ftsynth.library import load_fixture
from ftsynth.mapper import (DD, ND, NN, MappingTable, SwapCandidate, SynthesisConfig, SynthesisError, UsageTracker,
                            apply_swap, classify_pair, collect_swap_candidates, cost, is_executable,
                            iteration_seeds, postprocess, run_sabre, select_swap, traverse, update_usage)
from ftsynth.verify import replay_permutation, validate

LINE3 = QubitLayout(1, 3)


def table(mapping, n):
    return MappingTable.from_dict(mapping, n)


# -- executability -------------------------------------------------------------

def test_adjacent_cnot_executable():
    m = table({"a": 0, "b": 1}, 35)
    assert is_executable(Instruction("CNOT", ("a", "b")), m, QubitLayout(5, 7))


def test_far_cnot_not_executable():
    m = table({"a": 0, "b": 34}, 35)
    assert not is_executable(Instruction("CNOT", ("a", "b")), m, QubitLayout(5, 7))


def test_move_executable_in_place():
    m = table({"data[0]": 3}, 35)
    assert is_executable(Instruction("Move", ("data[0]",), 3), m, QubitLayout(5, 7))
    assert not is_executable(Instruction("Move", ("data[0]",), 4), m, QubitLayout(5, 7))


def test_symbolic_move_must_be_resolved():
    m = table({"q": 0}, 4)
    with pytest.raises(ValueError):
        is_executable(Instruction("Move", ("q",), SymbolicDestination("init", "q")), m, QubitLayout(2, 2))


def test_one_qubit_gates_always_executable():
    m = table({"a": 0}, 35)
    assert is_executable(Instruction("H", ("a",)), m, QubitLayout(5, 7))


# -- usage status --------------------------------------------------------------

@pytest.mark.parametrize("kind,direction,start,end", [
    ("PrepZ", FORWARD, False, True),
    ("MeasZ", FORWARD, True, False),
    ("MeasZ", BACKWARD, False, True),
    ("PrepZ", BACKWARD, True, False),
    ("H", FORWARD, True, True),
])
def test_update_usage(kind, direction, start, end):
    t = UsageTracker({"q": start})
    update_usage(t, Instruction(kind, ("q",)), direction)
    assert t.is_active("q") is end


def test_status_travels_with_state():
    m = table({"a": 0, "b": 1}, 3)
    t = UsageTracker({"a": True, "b": False})
    ops = []
    apply_swap(ops, m, t, (0, 2), 0)
    assert t.active_at(2, m) and not t.active_at(0, m)


def test_classify_pairs():
    m = table({"a": 0, "b": 1, "c": 2}, 4)
    t = UsageTracker({"a": True, "b": True, "c": False})
    assert classify_pair(0, 1, m, t) == DD
    assert classify_pair(1, 2, m, t) == ND
    assert classify_pair(2, 3, m, t) == NN


# -- candidate collection -------------------------------------------------------

def boxed_in():
    """data[0] in the middle of a 5x5 grid with four live neighbours."""
    g = QubitLayout(5, 5)
    names = {"data[0]": 12, "data[1]": 7, "data[2]": 11, "data[3]": 13, "data[4]": 17, "anc": 0}
    m = table(names, 25)
    t = UsageTracker({q: q != "anc" for q in names})
    fl = [Instruction("CNOT", ("data[0]", "anc"))]
    return g, m, t, fl


def test_jam_relief_without_dd_budget():
    g, m, t, fl = boxed_in()
    cands = collect_swap_candidates(fl, m, t, g, dd_used=0, dd_budget=0)
    pairs = {c.pair for c in cands}
    assert all(c.kind != DD for c in cands)
    # every live neighbour can step away to its free outer cells
    for nb, outer in ((7, 2), (11, 10), (13, 14), (17, 22)):
        assert (min(nb, outer), max(nb, outer)) in pairs
    assert not {(7, 12), (11, 12), (12, 13), (12, 17)} & pairs


def test_isolated_nd_pair():
    m = table({"a": 0, "b": 2}, 3)
    t = UsageTracker({"a": True, "b": False})
    cands = collect_swap_candidates([Instruction("CNOT", ("a", "b"))], m, t, LINE3, 0, 0)
    assert cands == [SwapCandidate(0, 1, ND), SwapCandidate(1, 2, NN)]


def test_dd_pair_offered_within_budget():
    g, m, t, fl = boxed_in()
    cands = collect_swap_candidates(fl, m, t, g, dd_used=0, dd_budget=1)
    assert SwapCandidate(7, 12, DD) in cands
    spent = collect_swap_candidates(fl, m, t, g, dd_used=1, dd_budget=1)
    assert all(c.kind != DD for c in spent)


# -- cost ---------------------------------------------------------------------

def test_cost_single_gate_on_line():
    m = table({"a": 0, "b": 2}, 3)
    d = distance_matrix(LINE3)
    fl = [Instruction("CNOT", ("a", "b"))]
    assert cost((0, 1), fl, [], m, d, W=0) == 1
    assert cost((1, 2), fl, [], m, d, W=0) == 1


def test_cost_of_move_is_distance_to_destination():
    g = QubitLayout(1, 5)
    m = table({"q": 0}, 5)
    assert cost((0, 1), [Instruction("Move", ("q",), 4)], [], m, distance_matrix(g), W=0) == 3


def brute_cost(pair, front, ext, mapping, dmat, decay, w):
    after = dict(mapping)
    inv = {p: q for q, p in after.items()}
    a, b = pair
    qa, qb = inv.get(a), inv.get(b)
    if qa is not None:
        after[qa] = b
    if qb is not None:
        after[qb] = a

    def d(instr):
        if instr.kind == "Move":
            return dmat[after[instr.qubits[0]]][instr.dest]
        return dmat[after[instr.qubits[0]]][after[instr.qubits[1]]]

    total = sum(d(i) for i in front) / len(front)
    if ext:
        total += w * sum(d(i) for i in ext) / len(ext)
    return max(decay[a], decay[b]) * total


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_cost_matches_direct_evaluation(seed, w):
    rng = random.Random(seed)
    g = QubitLayout(rng.randint(2, 4), rng.randint(2, 4))
    names = [f"q{i}" for i in range(rng.randint(2, g.num_qubits))]
    cells = rng.sample(range(g.num_qubits), len(names))
    mapping = dict(zip(names, cells))

    def gate():
        if rng.random() < 0.2:
            return Instruction("Move", (rng.choice(names),), rng.randrange(g.num_qubits))
        return Instruction("CNOT", tuple(rng.sample(names, 2)))

    front = [gate() for _ in range(rng.randint(1, 4))]
    ext = [gate() for _ in range(rng.randint(0, 5))]
    decay = [1 + rng.random() / 10 for _ in range(g.num_qubits)]
    dmat = distance_matrix(g)
    for pair in g.edges():
        got = cost(pair, front, ext, table(mapping, g.num_qubits), dmat, decay, W=w)
        assert got == pytest.approx(brute_cost(pair, front, ext, mapping, dmat, decay, w))


# -- selection ------------------------------------------------------------------

def test_select_argmin():
    c1, c2 = SwapCandidate(0, 1, ND), SwapCandidate(1, 2, ND)
    assert select_swap([c1, c2], {(0, 1): 2.0, (1, 2): 3.0}) == c1


def test_repeat_rejected():
    c1, c2, c3 = SwapCandidate(0, 1, ND), SwapCandidate(1, 2, ND), SwapCandidate(2, 3, NN)
    for seed in range(20):
        pick = select_swap([c1, c2, c3], {(0, 1): 1.0, (1, 2): 3.0, (2, 3): 4.0}, (1, 0), random.Random(seed))
        assert pick != c1


def test_repeat_kept_without_alternative():
    c1, dd = SwapCandidate(0, 1, ND), SwapCandidate(1, 2, DD)
    assert select_swap([c1, dd], {(0, 1): 1.0, (1, 2): 2.0}, (0, 1), random.Random(0)) == c1


def test_ties_are_deterministic():
    cands = [SwapCandidate(2, 3, ND), SwapCandidate(0, 1, ND), SwapCandidate(1, 2, ND)]
    picks = {select_swap(cands, lambda a, b: 1.0, None, random.Random(s)) for s in range(10)}
    assert picks == {SwapCandidate(0, 1, ND)}


def test_select_requires_candidates():
    with pytest.raises(ValueError):
        select_swap([], {})


# -- apply ------------------------------------------------------------------------

def test_apply_nd_keeps_counter():
    m = table({"a": 0, "b": 2}, 3)
    t = UsageTracker({"a": True, "b": False})
    ops = []
    assert apply_swap(ops, m, t, (0, 1), 0) == 0
    assert ops == [Op("SWAP", (0, 1), True)]
    assert m.physical("a") == 1


def test_apply_dd_increments_counter():
    m = table({"a": 0, "b": 1}, 3)
    t = UsageTracker({"a": True, "b": True})
    assert apply_swap([], m, t, (0, 1), 0) == 1


def test_double_swap_restores_mapping():
    m = table({"a": 0, "b": 1}, 3)
    before = m.copy()
    t = UsageTracker({"a": True, "b": False})
    ops = []
    apply_swap(ops, m, t, (0, 1), 0)
    apply_swap(ops, m, t, (0, 1), 0)
    assert m == before
    assert postprocess(ops) == []


# -- traversal ------------------------------------------------------------------

def test_local_protocol_needs_no_swaps():
    p = parse_protocol("qreg q[3] role=data;\ncx q[0], q[1];\ncx q[1], q[2];\nh q[0];")
    res = traverse(build_dag(p), {"q[0]": 0, "q[1]": 1, "q[2]": 2}, SynthesisConfig(), protocol=p, layout=LINE3)
    assert res.swaps == 0
    assert [o.kind for o in res.ops] == ["CNOT", "CNOT", "H"]


def test_distance_two_needs_one_swap():
    p = parse_protocol("qreg q[2] role=data;\ncx q[0], q[1];")
    res = traverse(build_dag(p), {"q[0]": 0, "q[1]": 2}, SynthesisConfig(), protocol=p, layout=LINE3)
    assert [o.kind for o in res.ops] == ["SWAP", "CNOT"]
    assert res.dd_used == 0


def test_satisfied_move_emits_nothing():
    p = parse_protocol("qreg q[1] role=data;\nh q[0];\nmove q[0] init(q[0]);")
    res = traverse(build_dag(p), {"q[0]": 1}, SynthesisConfig(), protocol=p, layout=LINE3)
    assert [o.kind for o in res.ops] == ["H"]


def test_displaced_qubit_is_moved_back():
    # a[0] and b[0] sit on both sides of d[0]; d[0] steps aside and must return
    p = parse_protocol("qreg d[1] role=data;\nqreg a[1] role=ancilla;\nqreg b[1] role=ancilla;\n"
                       "cx a[0], b[0];\nmove d[0] init(d[0]);")
    res = traverse(build_dag(p), {"a[0]": 0, "d[0]": 1, "b[0]": 2}, SynthesisConfig(), protocol=p, layout=LINE3)
    assert res.final_mapping.physical("d[0]") == 1
    assert [o.kind for o in res.ops].count("CNOT") == 1
    assert res.dd_used == 0


def test_backward_traversal_ignores_moves():
    p = parse_protocol("qreg q[2] role=data;\nmove q[0] 2;")
    res = traverse(build_dag(p, BACKWARD), {"q[0]": 0, "q[1]": 1}, SynthesisConfig(), BACKWARD,
                   protocol=p, layout=LINE3)
    assert res.ops == []


def test_direction_mismatch_rejected():
    p = parse_protocol("qreg q[2];\ncx q[0], q[1];")
    with pytest.raises(ValueError):
        traverse(build_dag(p, BACKWARD), {"q[0]": 0, "q[1]": 1}, SynthesisConfig(), FORWARD,
                 protocol=p, layout=LINE3)


# -- configuration ------------------------------------------------------------

@pytest.mark.parametrize("d,budget", [(1, 0), (3, 0), (5, 1), (7, 1), (9, 2), (13, 3)])
def test_budget_formula(d, budget):
    assert SynthesisConfig(distance=d).budget == budget


@pytest.mark.parametrize("kw", [{"iterations": 0}, {"dd_budget": -1}, {"lookahead_w": 1.5}, {"distance": 0},
                                {"time_limit": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SynthesisConfig(**kw)


def test_budget_override():
    assert SynthesisConfig(distance=3, dd_budget=2).budget == 2


# -- full runs -------------------------------------------------------------------

def sm():
    p = load_fixture("steane_sm")
    return inject_moveback(p, moveback_targets(p))


def test_run_is_deterministic():
    g = QubitLayout(5, 7)
    a = run_sabre(sm(), g, SynthesisConfig(seed=11, iterations=2))
    b = run_sabre(sm(), g, SynthesisConfig(seed=11, iterations=2))
    assert a.circuit == b.circuit


def test_pins_hold_in_every_iteration():
    g = QubitLayout(5, 7)
    pins = {f"data[{i}]": c for i, c in enumerate((8, 10, 12, 22, 24, 26, 16))}
    res = run_sabre(sm(), g, SynthesisConfig(seed=3, iterations=3), anchors=pins, pins=pins)
    assert {q: res.initial_mapping[q] for q in pins} == pins
    assert {q: res.final_mapping[q] for q in pins} == pins


def test_more_iterations_never_worse():
    g = QubitLayout(5, 7)
    kq = [run_sabre(sm(), g, SynthesisConfig(seed=5, iterations=n)).kq for n in (1, 2, 4)]
    assert kq[0] >= kq[1] >= kq[2]


def test_iteration_seeds_prefix_stable():
    assert iteration_seeds(9, 3) == iteration_seeds(9, 6)[:3]


def test_timeout_yields_nothing():
    with pytest.raises(SynthesisError, match="time limit"):
        run_sabre(sm(), QubitLayout(5, 7), SynthesisConfig(time_limit=1e-9, iterations=2))


def test_too_many_qubits():
    with pytest.raises(SynthesisError):
        run_sabre(sm(), QubitLayout(3, 3), SynthesisConfig())


def test_pin_conflict():
    with pytest.raises(SynthesisError):
        run_sabre(sm(), QubitLayout(5, 7), SynthesisConfig(), pins={"data[0]": 3, "data[1]": 3})


def test_parallel_workers_match_serial():
    g = QubitLayout(5, 7)
    serial = run_sabre(sm(), g, SynthesisConfig(seed=2, iterations=3))
    para = run_sabre(sm(), g, SynthesisConfig(seed=2, iterations=3, workers=2))
    assert serial.circuit == para.circuit


def test_reported_dd_matches_replay():
    res = run_sabre(sm(), QubitLayout(5, 7), SynthesisConfig(seed=1, distance=5))
    rep = validate(res.circuit, sm(), QubitLayout(5, 7), SynthesisConfig(distance=5))
    assert rep.passed
    assert res.dd_swaps_used == rep.metrics["dd_swaps"] <= 1
    assert replay_permutation(res.circuit) == res.final_mapping


# -- postprocess ---------------------------------------------------------------

def sw(a, b, inserted=True):
    return Op("SWAP", (a, b), inserted)


def test_pair_cancels():
    assert postprocess([sw(0, 1), sw(1, 0)]) == []


def test_intervening_use_blocks():
    ops = [sw(0, 1), Op("H", (0,)), sw(0, 1)]
    assert postprocess(ops) == ops


def test_t_is_not_self_inverse():
    ops = [Op("T", (0,)), Op("T", (0,))]
    assert postprocess(ops, inserted_only=False) == ops


def test_nested_pairs_cancel_to_fixpoint():
    ops = [sw(0, 1), sw(1, 2), sw(1, 2), sw(0, 1)]
    assert postprocess(ops) == []


def test_protocol_gates_kept_by_default():
    ops = [Op("H", (0,)), Op("H", (0,))]
    assert postprocess(ops) == ops
    assert postprocess(ops, inserted_only=False) == []


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.booleans()), max_size=30))
def test_postprocess_keeps_permutation(raw):
    ops = [sw(min(a, b), max(a, b)) if a != b else Op("H", (a,)) for a, b, _ in raw]
    start = {f"q{i}": i for i in range(4)}

    def final(seq):
        where = dict(start)
        for o in seq:
            if o.kind == "SWAP":
                a, b = o.qubits
                for q, p in where.items():
                    where[q] = b if p == a else a if p == b else p
        return where

    out = postprocess(ops)
    assert final(out) == final(ops)
    assert [o for o in out if o.kind == "H"] == [o for o in ops if o.kind == "H"]
    assert postprocess(out) == out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_protocols_route_and_validate(seed):
    rng = random.Random(seed)
    p = random_protocol(rng, max_qubits=5)
    g = QubitLayout(3, 3)
    res = run_sabre(p, g, SynthesisConfig(seed=seed, iterations=2))
    rep = validate(res.circuit, p, g)
    assert rep.passed, rep.to_dict()
    assert np.all(np.array(res.circuit.partitions[1:]) >= np.array(res.circuit.partitions[:-1]))
