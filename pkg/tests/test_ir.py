import pytest
from hypothesis import given, settings, strategies as st
import random

from conftest import random_protocol_text
from ftsynth.dag import build_dag
from ftsynth.ir import (Instruction, ProtocolError, SymbolicDestination, inject_moveback, moveback_targets,
                        parse_protocol, resolve_destinations, static_analysis)
from ftsynth.library import FIXTURE_NAMES, load_fixture

HEADER = "qreg data[7] role=data;\nqreg syndrome[7] role=ancilla;\n"


def test_parse_cnot():
    p = parse_protocol(HEADER + "cx data[0], syndrome[0];")
    assert p.instructions == (Instruction("CNOT", ("data[0]", "syndrome[0]")),)


def test_parse_symbolic_move():
    p = parse_protocol(HEADER + "move data[3] init(data[3]);")
    (m,) = p.instructions
    assert m.kind == "Move"
    assert m.dest == SymbolicDestination("init", "data[3]")


def test_parse_concrete_move_and_barrier():
    p = parse_protocol(HEADER + "barrier;\nmove data[0] 4;")
    assert p.instructions[0].kind == "Barrier"
    assert p.instructions[1].dest == 4


def test_qasm_style_tokens_accepted():
    text = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncreg c[2];\nreset q[0];\nmeasure q[1] -> c[1];\n'
    p = parse_protocol(text)
    assert [i.kind for i in p.instructions] == ["PrepZ", "MeasZ"]


def test_comments_ignored():
    p = parse_protocol("// header\nqreg q[2]; // two qubits\nh q[0];\n")
    assert len(p.instructions) == 1


@pytest.mark.parametrize("body,fragment", [
    ("foo data[0];", "unknown gate"),
    ("h data[9];", "undeclared"),
    ("cx data[0];", "expects 2"),
    ("cx data[0], data[0];", "distinct"),
    ("move data[0] somewhere;", "malformed move destination"),
    ("move data[0];", "move needs"),
    ("move data[0] init(other[0]);", "undeclared"),
])
def test_parse_errors(body, fragment):
    with pytest.raises(ProtocolError, match=fragment) as info:
        parse_protocol(HEADER + "\n" + body)
    assert info.value.line == 4


def test_error_position_reports_column():
    with pytest.raises(ProtocolError) as info:
        parse_protocol("qreg q[2];\nh q[0]; bogus q[1];")
    assert (info.value.line, info.value.col) == (2, 9)


def test_unknown_role_rejected():
    with pytest.raises(ProtocolError):
        parse_protocol("qreg q[2] role=wizard;")


def test_anchor_may_name_another_protocols_qubit():
    p = parse_protocol("qreg magic[1] role=magic;\nmove magic[0] anchor(data[0]);")
    assert p.instructions[0].dest == SymbolicDestination("anchor", "data[0]")


def test_moveback_appends_seven_moves_to_sm():
    sm = load_fixture("steane_sm")
    out = inject_moveback(sm, moveback_targets(sm))
    assert out.instructions[:len(sm.instructions)] == sm.instructions
    tail = out.instructions[-7:]
    assert [m.kind for m in tail] == ["Move"] * 7
    assert [m.qubits[0] for m in tail] == [f"data[{i}]" for i in range(7)]
    assert all(m.dest == SymbolicDestination("init", m.qubits[0]) for m in tail)


def test_moveback_empty_is_noop():
    sm = load_fixture("steane_sm")
    assert inject_moveback(sm, {}) is sm


def test_moveback_magic_to_data_anchor():
    msp = load_fixture("magic_state_prep")
    targets = {f"magic[{i}]": SymbolicDestination("anchor", f"data[{i}]") for i in range(7)}
    out = inject_moveback(msp, targets)
    assert [str(m) for m in out.moves][2] == "move magic[2] anchor(data[2]);"


def test_moveback_rejects_unknown_qubit():
    with pytest.raises(ProtocolError):
        inject_moveback(load_fixture("cnot"), {"data[0]": SymbolicDestination("init", "data[0]")})


def test_resolve_destinations():
    p = parse_protocol(HEADER + "move data[0] init(data[0]);\nmove data[1] 5;\n"
                       "qreg magic[3] role=magic;\nmove magic[2] anchor(data[2]);")
    r = resolve_destinations(p, {"data[0]": 1}, {"data[2]": 9})
    assert [m.dest for m in r.moves] == [1, 5, 9]
    again = resolve_destinations(r)
    assert again == r


def test_resolve_destinations_missing_symbol():
    p = parse_protocol(HEADER + "move data[0] init(data[0]);")
    with pytest.raises(ProtocolError):
        resolve_destinations(p, {})


def test_static_analysis_steane_sm():
    a = static_analysis(load_fixture("steane_sm"))
    assert a.gate_counts == {"CNOT": 36, "H": 15, "PrepZ": 16, "MeasZ": 16}
    assert a.qubits == 15
    assert a.barriers == 3


def test_static_analysis_single_instruction():
    a = static_analysis(parse_protocol("qreg q[1];\nh q[0];"))
    assert (a.depth, a.num_gates) == (1, 1)


def test_static_analysis_transversal_cnot():
    a = static_analysis(load_fixture("cnot"))
    assert a.depth == 1
    assert a.gate_counts == {"CNOT": 7}


def test_moves_and_barriers_not_counted():
    p = parse_protocol("qreg q[2];\nh q[0];\nbarrier;\nmove q[0] 1;")
    a = static_analysis(p)
    assert a.gate_counts == {"H": 1}
    assert a.barriers == 1


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_round_trip(name):
    p = load_fixture(name)
    assert parse_protocol(p.to_text()) == p


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_ideal_depth_is_dag_longest_path(name):
    p = load_fixture(name)
    assert static_analysis(p).depth == build_dag(p).longest_path()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_round_trip_and_depth(seed):
    p = parse_protocol(random_protocol_text(random.Random(seed)))
    again = parse_protocol(p.to_text())
    assert again == p
    assert parse_protocol(again.to_text()).to_text() == p.to_text()
    assert static_analysis(p).depth == build_dag(p).longest_path()


def test_initial_activity():
    p = parse_protocol("qreg d[2] role=data;\nqreg a[2] role=ancilla active;\nqreg c[1] role=checkup;\n"
                       "prepz d[1];\nh a[0];")
    assert p.initial_activity() == {"d[0]": True, "d[1]": False, "a[0]": True, "a[1]": True, "c[0]": False}


def test_unprepared_ancillas_flagged():
    p = parse_protocol("qreg d[1] role=data;\nqreg a[2] role=ancilla;\nqreg b[1] role=ancilla active;\n"
                       "cx d[0], a[0];\nprepz a[1];\ncx d[0], a[1];\ncx b[0], d[0];")
    assert p.unprepared_ancillas() == ["a[0]"]
