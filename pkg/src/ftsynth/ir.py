"""Protocol representation and the line-oriented protocol text format.

A protocol file looks like::

    protocol steane_sm distance=3;
    qreg data[7] role=data;
    qreg syndrome[7] role=ancilla;
    prepz syndrome[0];
    cx data[0], syndrome[0];
    barrier;
    move data[0] init(data[0]);
    move data[1] 12;

Comments start with ``//``. ``creg``, ``measure``-style OpenQASM headers
(``OPENQASM 2.0;``, ``include "...";``) are accepted and ignored.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace

from .analysis import StaticAnalysis

PREP_KINDS = frozenset({"PrepZ", "PrepX"})
MEAS_KINDS = frozenset({"MeasZ", "MeasX"})
ONE_QUBIT_KINDS = frozenset({"PrepZ", "PrepX", "MeasZ", "MeasX", "H", "X", "Z", "S", "Sdag", "T", "Tdag"})
TWO_QUBIT_KINDS = frozenset({"CNOT", "SWAP"})
KINDS = ONE_QUBIT_KINDS | TWO_QUBIT_KINDS | {"Barrier", "Move"}

ROLES = ("data", "ancilla", "syndrome", "checkup", "magic", "dummy")
# registers holding live encoded state unless their first operation is a preparation
ACTIVE_ROLES = frozenset({"data", "magic"})

_TEXT_TO_KIND = {
    "prepz": "PrepZ", "reset": "PrepZ", "prepx": "PrepX",
    "measz": "MeasZ", "measure": "MeasZ", "measx": "MeasX",
    "h": "H", "x": "X", "z": "Z", "s": "S", "sdg": "Sdag", "t": "T", "tdg": "Tdag",
    "cx": "CNOT", "cnot": "CNOT", "swap": "SWAP",
}
_KIND_TO_TEXT = {
    "PrepZ": "prepz", "PrepX": "prepx", "MeasZ": "measz", "MeasX": "measx",
    "H": "h", "X": "x", "Z": "z", "S": "s", "Sdag": "sdg", "T": "t", "Tdag": "tdg",
    "CNOT": "cx", "SWAP": "swap",
}


class ProtocolError(ValueError):
    """Invalid protocol text or structure, with an optional source position."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class SymbolicDestination:
    """``init(q)`` (initial position of q in this run) or ``anchor(q)``."""

    target: str
    qubit: str

    def __post_init__(self):
        if self.target not in ("init", "anchor"):
            raise ValueError(f"unknown symbolic destination {self.target!r}")

    def __str__(self):
        return f"{self.target}({self.qubit})"


@dataclass(frozen=True)
class Instruction:
    kind: str
    qubits: tuple = ()
    dest: object = None  # Move only: SymbolicDestination or physical index

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        n = len(self.qubits)
        if self.kind in ONE_QUBIT_KINDS and n != 1:
            raise ValueError(f"{self.kind} takes 1 qubit, got {n}")
        if self.kind in TWO_QUBIT_KINDS:
            if n != 2:
                raise ValueError(f"{self.kind} takes 2 qubits, got {n}")
            if self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} operands must be distinct")
        if self.kind == "Barrier" and n:
            raise ValueError("barrier takes no operands")
        if self.kind == "Move":
            if n != 1 or self.dest is None:
                raise ValueError("move takes one qubit and a destination")
        elif self.dest is not None:
            raise ValueError(f"{self.kind} does not take a destination")

    @property
    def is_concrete_move(self) -> bool:
        return self.kind == "Move" and not isinstance(self.dest, SymbolicDestination)

    def __str__(self):
        if self.kind == "Barrier":
            return "barrier;"
        if self.kind == "Move":
            return f"move {self.qubits[0]} {self.dest};"
        return f"{_KIND_TO_TEXT[self.kind]} {', '.join(self.qubits)};"


@dataclass(frozen=True)
class Register:
    name: str
    size: int
    role: str = "data"
    active: bool | None = None  # None: decided by role

    @property
    def qubits(self) -> list[str]:
        return [f"{self.name}[{i}]" for i in range(self.size)]

    @property
    def starts_active(self) -> bool:
        return self.role in ACTIVE_ROLES if self.active is None else self.active


@dataclass(frozen=True)
class Protocol:
    name: str
    registers: tuple
    instructions: tuple
    distance: int = 3

    def __post_init__(self):
        if self.distance < 1:
            raise ProtocolError(f"code distance must be >= 1, got {self.distance}")
        declared = set()
        for reg in self.registers:
            if reg.role not in ROLES:
                raise ProtocolError(f"register {reg.name}: unknown role {reg.role!r}")
            for q in reg.qubits:
                if q in declared:
                    raise ProtocolError(f"qubit {q} declared twice")
                declared.add(q)
        for instr in self.instructions:
            for q in instr.qubits:
                if q not in declared:
                    raise ProtocolError(f"undeclared qubit {q} in '{instr}'")
            dest = instr.dest
            if isinstance(dest, SymbolicDestination) and dest.target == "init" and dest.qubit not in declared:
                raise ProtocolError(f"undeclared qubit {instr.dest.qubit} in '{instr}'")

    @property
    def qubits(self) -> list[str]:
        return [q for reg in self.registers for q in reg.qubits]

    @property
    def num_qubits(self) -> int:
        return sum(reg.size for reg in self.registers)

    def role_of(self, qubit: str) -> str:
        return self.register_of(qubit).role

    def register_of(self, qubit: str) -> Register:
        name = qubit.split("[", 1)[0]
        for reg in self.registers:
            if reg.name == name:
                return reg
        raise KeyError(qubit)

    def qubits_with_role(self, *roles) -> list[str]:
        return [q for reg in self.registers if reg.role in roles for q in reg.qubits]

    @property
    def moves(self) -> list[Instruction]:
        return [i for i in self.instructions if i.kind == "Move"]

    @property
    def num_barriers(self) -> int:
        return sum(1 for i in self.instructions if i.kind == "Barrier")

    def initial_activity(self) -> dict:
        """Usage status of every qubit before the first instruction.

        A qubit starts activated when its register role (or explicit flag)
        says it holds live state and its first operation is not a preparation.
        """
        first = {}
        for instr in self.instructions:
            for q in instr.qubits:
                first.setdefault(q, instr.kind)
        return {q: self.register_of(q).starts_active and first.get(q) not in PREP_KINDS
                for q in self.qubits}

    def unprepared_ancillas(self) -> list:
        """Qubits that start inactive yet are gated on before any preparation."""
        first = {}
        for instr in self.instructions:
            if instr.kind in ("Move", "Barrier"):
                continue
            for q in instr.qubits:
                first.setdefault(q, instr.kind)
        return [q for q in self.qubits
                if not self.register_of(q).starts_active and q in first and first[q] not in PREP_KINDS]

    def final_activity(self) -> dict:
        status = self.initial_activity()
        for instr in self.instructions:
            if instr.kind in PREP_KINDS:
                status[instr.qubits[0]] = True
            elif instr.kind in MEAS_KINDS:
                status[instr.qubits[0]] = False
        return status

    def with_instructions(self, instructions) -> "Protocol":
        return replace(self, instructions=tuple(instructions))

    def to_text(self) -> str:
        lines = [f"protocol {self.name} distance={self.distance};"]
        for reg in self.registers:
            flag = ""
            if reg.active is not None:
                flag = " active" if reg.active else " inactive"
            lines.append(f"qreg {reg.name}[{reg.size}] role={reg.role}{flag};")
        lines.extend(str(i) for i in self.instructions)
        return "\n".join(lines) + "\n"


_QUBIT_RE = re.compile(r"^[A-Za-z_]\w*\[\d+\]$")
_QREG_RE = re.compile(r"^qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]((?:\s+\S+)*)$")
_DEST_RE = re.compile(r"^(init|anchor)\s*\(\s*([A-Za-z_]\w*\[\d+\])\s*\)$")


def _statements(text):
    """Yield (statement, line, col) for ';'-terminated statements."""
    buf, start = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0]
        for col, ch in enumerate(line, 1):
            if ch == ";":
                stmt = "".join(buf).strip()
                if stmt:
                    yield stmt, start[0], start[1]
                buf, start = [], None
            else:
                if start is None and not ch.isspace():
                    start = (lineno, col)
                if start is not None:
                    buf.append(ch)
        if start is not None:
            buf.append(" ")
    if "".join(buf).strip():
        raise ProtocolError("missing ';' at end of statement", *start)


def parse_protocol(text: str, name: str | None = None) -> Protocol:
    registers, instructions = [], []
    proto_name, distance = name or "protocol", 3
    declared = set()

    for stmt, line, col in _statements(text):
        head, _, rest = stmt.partition(" ")
        head = head.lower()
        rest = rest.strip()
        if head in ("openqasm", "include", "creg"):
            continue
        if head == "protocol":
            parts = rest.split()
            if not parts:
                raise ProtocolError("protocol statement needs a name", line, col)
            proto_name = name or parts[0]
            for opt in parts[1:]:
                key, _, val = opt.partition("=")
                if key != "distance" or not val.isdigit():
                    raise ProtocolError(f"bad protocol option {opt!r}", line, col)
                distance = int(val)
            continue
        if head == "qreg":
            m = _QREG_RE.match(stmt)
            if not m:
                raise ProtocolError(f"malformed register declaration {stmt!r}", line, col)
            role, active = "data", None
            for opt in m.group(3).split():
                if opt.startswith("role="):
                    role = opt[5:]
                elif opt in ("active", "inactive"):
                    active = opt == "active"
                else:
                    raise ProtocolError(f"bad register option {opt!r}", line, col)
            if role not in ROLES:
                raise ProtocolError(f"unknown role {role!r}", line, col)
            reg = Register(m.group(1), int(m.group(2)), role, active)
            registers.append(reg)
            declared.update(reg.qubits)
            continue
        if head == "barrier":
            # 'barrier q[0], q[1];' is accepted but treated as global
            instructions.append(Instruction("Barrier"))
            continue

        def qubit(tok, _line=line, _col=col):
            tok = tok.strip()
            if not _QUBIT_RE.match(tok):
                raise ProtocolError(f"malformed qubit reference {tok!r}", _line, _col)
            if tok not in declared:
                raise ProtocolError(f"undeclared qubit {tok}", _line, _col)
            return tok

        if head == "move":
            parts = rest.split(None, 1)
            if len(parts) != 2:
                raise ProtocolError("move needs a qubit and a destination", line, col)
            q = qubit(parts[0])
            dtext = parts[1].strip()
            m = _DEST_RE.match(dtext)
            if m:
                # anchor() may name a qubit of another protocol (magic -> data)
                ref = qubit(m.group(2)) if m.group(1) == "init" else m.group(2)
                dest = SymbolicDestination(m.group(1), ref)
            elif dtext.isdigit():
                dest = int(dtext)
            else:
                raise ProtocolError(f"malformed move destination {dtext!r}", line, col)
            instructions.append(Instruction("Move", (q,), dest))
            continue
        kind = _TEXT_TO_KIND.get(head)
        if kind is None:
            raise ProtocolError(f"unknown gate {head!r}", line, col)
        # 'measure q[0] -> c[0]' style: keep the qubit only
        operands = [t for t in rest.split("->", 1)[0].split(",") if t.strip()]
        want = 2 if kind in TWO_QUBIT_KINDS else 1
        if len(operands) != want:
            raise ProtocolError(f"{head} expects {want} operand(s), got {len(operands)}", line, col)
        qs = tuple(qubit(t) for t in operands)
        if want == 2 and qs[0] == qs[1]:
            raise ProtocolError(f"{head} operands must be distinct", line, col)
        instructions.append(Instruction(kind, qs))

    return Protocol(proto_name, tuple(registers), tuple(instructions), distance)


def format_protocol(protocol: Protocol) -> str:
    return protocol.to_text()


def inject_moveback(protocol: Protocol, targets: dict) -> Protocol:
    """Append one Move per entry of ``targets`` (qubit -> destination).

    Moves are appended in declaration order of the moved qubits.
    """
    if not targets:
        return protocol
    declared = protocol.qubits
    unknown = [q for q in targets if q not in declared]
    if unknown:
        raise ProtocolError(f"move-back target names undeclared qubit(s) {unknown}")
    moves = [Instruction("Move", (q,), targets[q]) for q in declared if q in targets]
    return protocol.with_instructions(protocol.instructions + tuple(moves))


def moveback_targets(protocol: Protocol, roles=("data",), target="init", qubits=None) -> dict:
    """``{q: target(q)}`` for every qubit of the given roles (or explicit list)."""
    chosen = qubits if qubits is not None else protocol.qubits_with_role(*roles)
    return {q: SymbolicDestination(target, q) for q in chosen}


def resolve_destinations(protocol: Protocol, initial_mapping: dict | None = None,
                         anchors: dict | None = None) -> Protocol:
    """Replace every symbolic Move destination with a physical index."""
    out = []
    for instr in protocol.instructions:
        if instr.kind == "Move" and isinstance(instr.dest, SymbolicDestination):
            table = initial_mapping if instr.dest.target == "init" else anchors
            if table is None or instr.dest.qubit not in table:
                raise ProtocolError(f"cannot resolve destination {instr.dest} of '{instr}'")
            instr = Instruction("Move", instr.qubits, int(table[instr.dest.qubit]))
        out.append(instr)
    return protocol.with_instructions(out)


def ideal_depth(instructions) -> int:
    """Longest dependency chain; barriers synchronise all qubits at zero cost."""
    level = {}
    floor = 0
    for instr in instructions:
        if instr.kind == "Barrier":
            floor = max([floor, *level.values()])
            level = {q: floor for q in level}
            continue
        if instr.kind == "Move":
            continue
        t = max(level.get(q, floor) for q in instr.qubits) + 1
        for q in instr.qubits:
            level[q] = t
    return max([floor, *level.values()])


def static_analysis(protocol: Protocol) -> StaticAnalysis:
    counts = Counter(i.kind for i in protocol.instructions if i.kind not in ("Barrier", "Move"))
    return StaticAnalysis(
        depth=ideal_depth(protocol.instructions),
        qubits=protocol.num_qubits,
        gate_counts=dict(counts),
        barriers=protocol.num_barriers,
    )
