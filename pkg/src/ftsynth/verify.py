"""Independent certification of synthesized circuits.

Nothing here reuses the router's state: the mapping evolution, usage
statuses and protocol dependencies are all recomputed from the circuit and
the protocol text.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

from .emit import Circuit, circuit_from_dict
from .ir import Protocol, SymbolicDestination

CHECKS = ("locality", "dd_budget", "self_contained", "partition_order", "equivalence", "mapping_consistency")
PASS, FAIL, NA = "pass", "fail", "n/a"


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)  # name -> {"status", "violations"}
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["status"] != FAIL for c in self.checks.values())

    def status(self, name: str) -> str:
        return self.checks[name]["status"]

    def violations(self, name: str) -> list:
        return self.checks[name]["violations"]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": self.checks, "metrics": self.metrics}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _as_circuit(circuit) -> Circuit:
    if isinstance(circuit, Circuit):
        return circuit
    if isinstance(circuit, (str, bytes)):
        try:
            circuit = json.loads(circuit)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed circuit JSON: {exc}") from None
    if isinstance(circuit, dict):
        return circuit_from_dict(circuit)
    raise ValueError("malformed circuit JSON")


def _ops(circuit: Circuit):
    """(step, op) pairs in step order."""
    for t, step in enumerate(circuit.steps):
        for op in step:
            yield t, op


def replay_permutation(circuit, initial_mapping: dict | None = None) -> dict:
    """Final logical -> physical map after applying every inserted SWAP.

    Dummy cells may take part in a SWAP; they carry no name.
    """
    circuit = _as_circuit(circuit)
    n = circuit.rows * circuit.cols
    mapping = dict(circuit.initial_mapping if initial_mapping is None else initial_mapping)
    at = {p: q for q, p in mapping.items()}
    for _, op in _ops(circuit):
        if op.kind != "SWAP" or not op.inserted:
            continue
        a, b = op.qubits
        if n and not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"SWAP on physical index outside the layout: {op.qubits}")
        qa, qb = at.pop(a, None), at.pop(b, None)
        if qa is not None:
            at[b] = qa
            mapping[qa] = b
        if qb is not None:
            at[a] = qb
            mapping[qb] = a
    return mapping


def check_composition(circuit, protocol: Protocol | None = None, data_qubits=None) -> bool:
    """True iff the circuit leaves every data qubit where it started."""
    circuit = _as_circuit(circuit)
    if data_qubits is None:
        if protocol is None:
            raise ValueError("need a protocol or an explicit list of data qubits")
        data_qubits = [q for r in protocol.registers if r.role == "data" for q in r.qubits]
    final = replay_permutation(circuit)
    return all(final[q] == circuit.initial_mapping[q] for q in data_qubits)


def _start_status(protocol: Protocol) -> dict:
    first = {}
    for instr in protocol.instructions:
        for q in instr.qubits:
            first.setdefault(q, instr.kind)
    status = {}
    for reg in protocol.registers:
        live = reg.active if reg.active is not None else reg.role in ("data", "magic")
        for q in reg.qubits:
            status[q] = live and first.get(q) not in ("PrepZ", "PrepX")
    return status


def _dependencies(protocol: Protocol):
    """Gate list, predecessor sets and barrier partition of each gate."""
    gates, preds, part = [], [], []
    last = {}
    partition = 0
    for instr in protocol.instructions:
        if instr.kind == "Barrier":
            partition += 1
            last = {}
            continue
        if instr.kind == "Move":
            continue
        idx = len(gates)
        gates.append(instr)
        preds.append({last[q] for q in instr.qubits if q in last})
        part.append(partition)
        for q in instr.qubits:
            last[q] = idx
    return gates, preds, part, partition + 1


def _resolve_move(instr, initial_mapping, anchors):
    d = instr.dest
    if isinstance(d, SymbolicDestination):
        table = initial_mapping if d.target == "init" else (anchors or {})
        return table.get(d.qubit)
    return int(d)


def validate(circuit, protocol: Protocol, layout=None, config=None, anchors: dict | None = None, *,
             distance: int | None = None, dd_budget: int | None = None) -> ValidationReport:
    """Run all checks of ``circuit`` against its source ``protocol``.

    ``config`` may be any object with ``distance`` and ``budget`` (or
    ``dd_budget``) attributes; explicit keywords take precedence.
    """
    circuit = _as_circuit(circuit)
    rows, cols = circuit.rows, circuit.cols
    n = rows * cols
    if distance is None:
        distance = getattr(config, "distance", None) or protocol.distance
    if dd_budget is None:
        dd_budget = getattr(config, "budget", None)
        if dd_budget is None:
            dd_budget = getattr(config, "dd_budget", None)
        if dd_budget is None:
            dd_budget = (distance - 1) // 4
    found = {c: [] for c in CHECKS}

    # mapping consistency
    init = dict(circuit.initial_mapping)
    if layout is not None:
        lr, lc = (layout.rows, layout.cols) if hasattr(layout, "rows") else layout
        if (lr, lc) != (rows, cols):
            found["mapping_consistency"].append({"reason": "layout mismatch", "circuit": f"{rows}x{cols}",
                                                 "expected": f"{lr}x{lc}"})
    declared = set(protocol.qubits)
    if set(init) != declared:
        found["mapping_consistency"].append({"reason": "initial mapping does not cover the declared qubits",
                                             "missing": sorted(declared - set(init)),
                                             "extra": sorted(set(init) - declared)})
    if len(set(init.values())) != len(init):
        found["mapping_consistency"].append({"reason": "initial mapping is not injective"})
    bad = sorted(q for q, p in init.items() if not 0 <= p < n)
    if bad:
        found["mapping_consistency"].append({"reason": "mapped outside the layout", "qubits": bad})
    if len(circuit.partitions) != len(circuit.steps):
        found["mapping_consistency"].append({"reason": "partition stamps do not match the step count"})
    if found["mapping_consistency"]:
        report = ValidationReport({c: {"status": FAIL if found[c] else NA, "violations": found[c]}
                                   for c in CHECKS})
        return report

    # one replay drives locality, budget and equivalence
    at = {p: q for q, p in init.items()}
    status = _start_status(protocol)
    gates, preds, gate_part, num_parts = _dependencies(protocol)
    by_sig = defaultdict(list)
    for i, g in enumerate(gates):
        by_sig[(g.kind, g.qubits)].append(i)
    matched = [False] * len(gates)
    dd = inserted = 0
    index = 0
    for t, step in enumerate(circuit.steps):
        used = set()
        for op in step:
            where = {"index": index, "step": t, "op": op.kind, "qubits": list(op.qubits)}
            index += 1
            if any(not 0 <= p < n for p in op.qubits):
                found["locality"].append({**where, "reason": "physical index outside the layout"})
                continue
            if used & set(op.qubits):
                found["locality"].append({**where, "reason": "qubit used twice in one step"})
            used.update(op.qubits)
            if len(op.qubits) == 2:
                (r1, c1), (r2, c2) = (divmod(p, cols) for p in op.qubits)
                if abs(r1 - r2) + abs(c1 - c2) != 1:
                    found["locality"].append({**where, "reason": "operands not adjacent"})
            if op.kind == "SWAP" and op.inserted:
                a, b = op.qubits
                qa, qb = at.get(a), at.get(b)
                inserted += 1
                if qa is not None and qb is not None and status[qa] and status[qb]:
                    dd += 1
                    found["dd_budget"].append({**where, "logical": [qa, qb], "reason": "data-data SWAP"})
                at.pop(a, None)
                at.pop(b, None)
                if qa is not None:
                    at[b] = qa
                if qb is not None:
                    at[a] = qb
                continue
            if op.inserted:
                found["equivalence"].append({**where, "reason": "only SWAPs may be inserted"})
                continue
            names = tuple(at.get(p) for p in op.qubits)
            if None in names:
                found["equivalence"].append({**where, "reason": "gate on a dummy qubit"})
                continue
            where["logical"] = list(names)
            pick = None
            for i in by_sig.get((op.kind, names), ()):
                if not matched[i]:
                    if all(matched[j] for j in preds[i]):
                        pick = i
                    break
            if pick is None:
                found["equivalence"].append({**where, "reason": "no matching ready protocol instruction"})
                continue
            matched[pick] = True
            if circuit.partitions[t] != gate_part[pick]:
                found["partition_order"].append({**where, "reason": "instruction emitted in partition "
                                                 f"{circuit.partitions[t]}, belongs to {gate_part[pick]}"})
            if op.kind in ("PrepZ", "PrepX"):
                status[names[0]] = True
            elif op.kind in ("MeasZ", "MeasX"):
                status[names[0]] = False
    missing = [str(gates[i]) for i, m in enumerate(matched) if not m]
    if missing:
        found["equivalence"].append({"reason": "protocol instructions never emitted", "instructions": missing})
    if any(b < a for a, b in zip(circuit.partitions, circuit.partitions[1:])):
        found["partition_order"].append({"reason": "partition stamps decrease"})
    if circuit.num_partitions != num_parts:
        found["partition_order"].append({"reason": f"{circuit.num_partitions} partitions, protocol has {num_parts}"})

    if dd <= dd_budget:
        found["dd_budget"] = []
    else:
        found["dd_budget"].insert(0, {"reason": f"{dd} data-data SWAPs exceed budget {dd_budget}"})
    claimed = circuit.meta.get("dd_swaps")
    if claimed is not None and claimed != dd:
        found["dd_budget"].append({"reason": f"circuit claims {claimed} data-data SWAPs, replay finds {dd}"})

    final = {q: p for p, q in at.items()}
    if final != dict(circuit.final_mapping):
        diff = sorted(q for q in final if circuit.final_mapping.get(q) != final[q])
        found["mapping_consistency"].append({"reason": "final mapping differs from replay", "qubits": diff})

    moves = [i for i in protocol.instructions if i.kind == "Move"]
    if moves:
        for m in moves:
            q = m.qubits[0]
            dest = _resolve_move(m, init, anchors)
            if dest is None:
                found["self_contained"].append({"qubit": q, "reason": f"cannot resolve destination {m.dest}"})
            elif final.get(q) != dest:
                found["self_contained"].append({"qubit": q, "expected": dest, "final": final.get(q)})

    checks = {}
    for c in CHECKS:
        if c == "self_contained" and not moves:
            checks[c] = {"status": NA, "violations": []}
        else:
            checks[c] = {"status": FAIL if found[c] else PASS, "violations": found[c]}
    metrics = {"dd_swaps": dd, "inserted_swaps": inserted, "depth": len(circuit.steps),
               "dd_budget": dd_budget, "partitions": circuit.num_partitions}
    return ValidationReport(checks, metrics)
