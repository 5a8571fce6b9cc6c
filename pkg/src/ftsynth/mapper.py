"""SABRE-style routing that keeps SWAPs between data-type qubits within budget.

A qubit is *data-type* while its usage status is activated (it holds live
state) and *non-data-type* otherwise. Routing SWAPs are filtered so that a
SWAP acting on two data-type qubits is only offered while the per-circuit
budget ``floor((d - 1) / 4)`` allows it.
"""

from __future__ import annotations

import heapq
import logging
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dag import BACKWARD, FORWARD, FrontLayer, build_dag
from .emit import Circuit, Op, schedule_steps
from .ir import MEAS_KINDS, PREP_KINDS, Instruction, Protocol, SymbolicDestination
from .layout import QubitLayout, distance_matrix

log = logging.getLogger(__name__)

NN, ND, DD = "NN", "ND", "DD"
SELF_INVERSE = frozenset({"SWAP", "CNOT", "H", "X", "Z"})


class RoutingFailure(RuntimeError):
    """A traversal could not finish; the iteration contributes nothing."""


class Jammed(RoutingFailure):
    pass


class TraversalTimeout(RoutingFailure):
    pass


class SynthesisError(RuntimeError):
    pass


@dataclass
class SynthesisConfig:
    distance: int = 3
    dd_budget: int | None = None  # None: floor((distance - 1) / 4)
    iterations: int = 1
    seed: int = 0
    time_limit: float | None = None  # wall-clock seconds per iteration
    lookahead_w: float = 0.5
    decay: float = 0.001
    decay_reset: int = 5
    extended_window: int = 20
    stall_limit: int | None = None
    max_swaps: int | None = None
    postprocess: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.distance < 1:
            raise ValueError("code distance must be >= 1")
        if self.dd_budget is not None and self.dd_budget < 0:
            raise ValueError("dd_budget must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.lookahead_w <= 1.0:
            raise ValueError("lookahead weight must lie in [0, 1]")
        if self.decay < 0:
            raise ValueError("decay increment must be >= 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")

    @property
    def budget(self) -> int:
        if self.dd_budget is not None:
            return self.dd_budget
        return (self.distance - 1) // 4


# -- mapping and usage state ------------------------------------------------

class MappingTable:
    """Bijection between declared qubit names and physical indices.

    Physical indices without a logical occupant hold dummies.
    """

    __slots__ = ("names", "index", "l2p", "p2l")

    def __init__(self, names, num_physical: int, l2p):
        self.names = list(names)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.l2p = list(l2p)
        if len(self.l2p) != len(self.names):
            raise ValueError("mapping must place every declared qubit")
        self.p2l = [-1] * num_physical
        for i, p in enumerate(self.l2p):
            if not 0 <= p < num_physical:
                raise ValueError(f"{self.names[i]} mapped outside the layout ({p})")
            if self.p2l[p] != -1:
                raise ValueError(f"physical qubit {p} assigned twice")
            self.p2l[p] = i

    @classmethod
    def from_dict(cls, mapping: dict, num_physical: int, names=None) -> "MappingTable":
        names = list(mapping) if names is None else list(names)
        return cls(names, num_physical, [int(mapping[n]) for n in names])

    def to_dict(self) -> dict:
        return {n: self.l2p[i] for i, n in enumerate(self.names)}

    def copy(self) -> "MappingTable":
        new = MappingTable.__new__(MappingTable)
        new.names, new.index = self.names, self.index
        new.l2p, new.p2l = list(self.l2p), list(self.p2l)
        return new

    def physical(self, name: str) -> int:
        return self.l2p[self.index[name]]

    def occupant(self, p: int):
        i = self.p2l[p]
        return None if i < 0 else self.names[i]

    def swap(self, a: int, b: int):
        ia, ib = self.p2l[a], self.p2l[b]
        self.p2l[a], self.p2l[b] = ib, ia
        if ia >= 0:
            self.l2p[ia] = b
        if ib >= 0:
            self.l2p[ib] = a

    def __eq__(self, other):
        return isinstance(other, MappingTable) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"MappingTable({self.to_dict()})"


class UsageTracker:
    """Activated/inactivated flag per held state.

    The flag belongs to the logical state, so it travels with it under SWAP;
    dummies are always inactivated.
    """

    __slots__ = ("names", "index", "status")

    def __init__(self, status: dict):
        self.names = list(status)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.status = [bool(status[n]) for n in self.names]

    def copy(self) -> "UsageTracker":
        new = UsageTracker.__new__(UsageTracker)
        new.names, new.index, new.status = self.names, self.index, list(self.status)
        return new

    def is_active(self, name: str) -> bool:
        return self.status[self.index[name]]

    def active_at(self, p: int, mapping: MappingTable) -> bool:
        i = mapping.p2l[p]
        return i >= 0 and self.status[self.index[mapping.names[i]]]

    def to_dict(self) -> dict:
        return dict(zip(self.names, self.status))


def update_usage(tracker: UsageTracker, instr: Instruction, direction: str = FORWARD) -> UsageTracker:
    """Preparation activates and measurement inactivates (reversed when backward)."""
    if instr.kind in PREP_KINDS:
        activate = direction == FORWARD
    elif instr.kind in MEAS_KINDS:
        activate = direction == BACKWARD
    else:
        return tracker
    tracker.status[tracker.index[instr.qubits[0]]] = activate
    return tracker


class SwapCandidate(NamedTuple):
    p1: int
    p2: int
    kind: str

    @property
    def pair(self):
        return (self.p1, self.p2)


def classify_pair(a: int, b: int, mapping: MappingTable, tracker: UsageTracker) -> str:
    n = tracker.active_at(a, mapping) + tracker.active_at(b, mapping)
    return (NN, ND, DD)[n]


# -- SWAP candidates and cost ---------------------------------------------------

def _touched_cells(instr: Instruction, mapping: MappingTable) -> list[int]:
    if instr.kind == "Barrier":
        return []
    cells = [mapping.physical(q) for q in instr.qubits]
    if instr.kind == "Move" and not isinstance(instr.dest, SymbolicDestination):
        cells.append(int(instr.dest))
    return cells


def collect_swap_candidates(fl, mapping: MappingTable, tracker: UsageTracker, layout: QubitLayout,
                            dd_used: int, dd_budget: int) -> list[SwapCandidate]:
    """SWAPs on the cells of front-layer operands, filtered by pair kind.

    ``fl`` is a :class:`FrontLayer` or an iterable of instructions. Pairs of two
    data-type qubits are offered only while ``dd_used < dd_budget``. Around each
    data-type neighbour of an operand cell, its NN/ND SWAPs are added too so a
    boxed-in qubit can be freed. A Move's destination cell counts as touched.
    """
    instrs = [fl.instruction(n) for n in fl.nodes] if isinstance(fl, FrontLayer) else list(fl)
    allow_dd = dd_used < dd_budget
    found = {}

    def offer(a, b, relief=False):
        key = (a, b) if a < b else (b, a)
        if key in found:
            return
        kind = classify_pair(a, b, mapping, tracker)
        if kind == DD and (relief or not allow_dd):
            return
        found[key] = SwapCandidate(key[0], key[1], kind)

    for instr in instrs:
        for p in _touched_cells(instr, mapping):
            for nb in layout.neighbors(p):
                offer(p, nb)
                if tracker.active_at(nb, mapping):
                    for nb2 in layout.neighbors(nb):
                        offer(nb, nb2, relief=True)
    return [found[k] for k in sorted(found)]


class _Gate(NamedTuple):
    a: int  # logical index
    b: int  # logical index, or -1 for a Move
    dest: int  # Move destination, or -1


class CostContext:
    """Distance sums over the front layer and the lookahead window.

    The cost of a candidate is
    ``decay * (sum_FL D / |FL| + W * sum_E D / |E|)`` evaluated on the
    mapping after the candidate SWAP; only gates touching the two swapped
    cells are re-evaluated.
    """

    def __init__(self, front, extended, mapping: MappingTable, dist, decay, weight):
        self.front = front
        self.extended = extended
        self.l2p = mapping.l2p
        self.dist = dist
        self.decay = decay
        self.weight = weight
        self.touching = defaultdict(list)
        self.base = [0.0, 0.0]
        for group, gates in enumerate((front, extended)):
            for g in gates:
                self.base[group] += self._d(g, self.l2p[g.a], None if g.b < 0 else self.l2p[g.b])
                self.touching[self.l2p[g.a]].append((group, g))
                if g.b >= 0:
                    self.touching[self.l2p[g.b]].append((group, g))

    def _d(self, g, pa, pb):
        return self.dist[pa][g.dest if g.b < 0 else pb]

    def cost(self, a: int, b: int) -> float:
        sums = list(self.base)
        seen = set()
        for cell in (a, b):
            for group, g in self.touching.get(cell, ()):
                if id(g) in seen:
                    continue
                seen.add(id(g))
                pa = self.l2p[g.a]
                pb = None if g.b < 0 else self.l2p[g.b]
                old = self._d(g, pa, pb)
                pa = b if pa == a else a if pa == b else pa
                if pb is not None:
                    pb = b if pb == a else a if pb == b else pb
                sums[group] += self._d(g, pa, pb) - old
        total = sums[0] / max(len(self.front), 1)
        if self.extended:
            total += self.weight * sums[1] / len(self.extended)
        return max(self.decay[a], self.decay[b]) * total


def _as_gate(instr: Instruction, mapping: MappingTable):
    if instr.kind in ("CNOT", "SWAP"):
        return _Gate(mapping.index[instr.qubits[0]], mapping.index[instr.qubits[1]], -1)
    if instr.kind == "Move" and not isinstance(instr.dest, SymbolicDestination):
        return _Gate(mapping.index[instr.qubits[0]], -1, int(instr.dest))
    return None


def cost(candidate, fl, extended_window, mapping: MappingTable, dmatrix, decay_state=None,
         W: float = 0.5, delta: float | None = None) -> float:
    """Cost of one candidate; see :class:`CostContext`.

    ``fl`` and ``extended_window`` are iterables of instructions. ``delta`` is
    accepted for signature symmetry; the decay state already carries it.
    """
    dist = dmatrix.tolist() if isinstance(dmatrix, np.ndarray) else dmatrix
    front = [g for g in (_as_gate(i, mapping) for i in fl) if g is not None]
    ext = [g for g in (_as_gate(i, mapping) for i in extended_window) if g is not None]
    decay = decay_state if decay_state is not None else [1.0] * len(dist)
    p1, p2 = candidate[0], candidate[1]
    return CostContext(front, ext, mapping, dist, decay, W).cost(p1, p2)


def select_swap(candidates, cost_context, last_selected=None, rng=None) -> SwapCandidate:
    """Minimum-cost candidate; a repeat of the previous SWAP is rejected.

    Ties go to the lexicographically smallest pair. When the winner repeats
    ``last_selected``, a uniformly random NN/ND candidate is taken instead;
    if there is none the winner stands.
    """
    if not candidates:
        raise ValueError("no SWAP candidates")
    if callable(cost_context):
        score = cost_context
    elif isinstance(cost_context, dict):
        def score(a, b):
            return cost_context[(a, b)]
    else:
        score = cost_context.cost
    best = min(candidates, key=lambda c: (round(score(c.p1, c.p2), 9), c.p1, c.p2))
    if last_selected is not None and tuple(sorted(last_selected[:2])) == best.pair:
        others = [c for c in candidates if c.pair != best.pair and c.kind != DD]
        if others:
            rng = rng or random.Random(0)
            return others[rng.randrange(len(others))]
        log.debug("repeated SWAP %s kept: no alternative candidate", best.pair)
    return best


def apply_swap(ops: list, mapping: MappingTable, tracker: UsageTracker, candidate, dd_used: int,
               partition: int = 0) -> int:
    """Append the SWAP, exchange the mapping entries and return the new DD count."""
    a, b = candidate[0], candidate[1]
    is_dd = classify_pair(a, b, mapping, tracker) == DD
    ops.append(Op("SWAP", (a, b), True, partition))
    mapping.swap(a, b)
    return dd_used + int(is_dd)


def is_executable(instr: Instruction, mapping: MappingTable, layout: QubitLayout) -> bool:
    if instr.kind == "Barrier":
        raise ValueError("barriers are handled by the front layer")
    if instr.kind == "Move":
        if isinstance(instr.dest, SymbolicDestination):
            raise ValueError(f"unresolved destination in '{instr}'")
        return mapping.physical(instr.qubits[0]) == int(instr.dest)
    if len(instr.qubits) == 1:
        return True
    return layout.adjacent(mapping.physical(instr.qubits[0]), mapping.physical(instr.qubits[1]))


# -- post-processing -----------------------------------------------------------

def _same_gate(a: Op, b: Op) -> bool:
    if a.kind != b.kind or a.inserted != b.inserted:
        return False
    if a.kind == "SWAP":
        return set(a.qubits) == set(b.qubits)
    return a.qubits == b.qubits


def _cancel_pairs(ops, inserted_only=True, kinds=SELF_INVERSE):
    stacks = defaultdict(list)
    kept = [True] * len(ops)
    for i, o in enumerate(ops):
        tops = {stacks[q][-1] if stacks[q] else None for q in o.qubits}
        j = tops.pop() if len(tops) == 1 else None
        if (j is not None and o.kind in kinds and (o.inserted or not inserted_only)
                and _same_gate(ops[j], o) and len(ops[j].qubits) == len(o.qubits)):
            kept[i] = kept[j] = False
            for q in o.qubits:
                stacks[q].pop()
            continue
        for q in o.qubits:
            stacks[q].append(i)
    return kept


def postprocess(circuit_or_ops, inserted_only: bool = True):
    """Cancel back-to-back identical self-inverse instructions on the same qubits.

    Only pairs with nothing in between on either qubit cancel; the scan is a
    bracket match, so the result is already a fixpoint. By default only
    routing SWAPs are cancelled, leaving protocol instructions untouched.
    """
    if isinstance(circuit_or_ops, Circuit):
        c = circuit_or_ops
        ops = c.ops()
        kept = _cancel_pairs(ops, inserted_only)
        new_ops = [o for o, k in zip(ops, kept) if k]
        return schedule_steps(new_ops, c.layout, c.initial_mapping, None, c.name, c.num_partitions, c.meta)
    ops = list(circuit_or_ops)
    kept = _cancel_pairs(ops, inserted_only)
    return [o for o, k in zip(ops, kept) if k]


# -- traversal ---------------------------------------------------------------

@dataclass
class TraversalResult:
    direction: str
    ops: list
    dd_flags: list
    initial_mapping: MappingTable
    final_mapping: MappingTable
    num_partitions: int
    swaps: int
    valve_calls: int = 0

    @property
    def dd_used(self) -> int:
        return sum(self.dd_flags)


@dataclass
class IterationResult:
    circuit: Circuit
    initial_mapping: dict
    final_mapping: dict
    dd_swaps_used: int
    seed: int
    index: int = 0
    elapsed: float = 0.0
    attempts: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return self.circuit.depth

    @property
    def swaps(self) -> int:
        return self.circuit.inserted_swaps

    @property
    def kq(self) -> int:
        return self.circuit.analysis().kq

    def rank(self):
        return (self.kq, self.depth, self.swaps, self.index)


class Router:
    """Routing state shared by all iterations of one protocol on one layout."""

    def __init__(self, protocol: Protocol, layout: QubitLayout, config: SynthesisConfig,
                 anchors: dict | None = None, pins: dict | None = None):
        if protocol.num_qubits > layout.num_qubits:
            raise SynthesisError(f"{protocol.num_qubits} qubits do not fit on {layout}")
        self.protocol = protocol
        self.layout = layout
        self.config = config
        self.anchors = dict(anchors or {})
        self.pins = dict(pins or {})
        for q, p in self.pins.items():
            if not layout.contains(p):
                raise SynthesisError(f"pinned position {p} of {q} is outside {layout}")
        if len(set(self.pins.values())) != len(self.pins):
            raise SynthesisError("anchor conflict: two qubits pinned to the same cell")
        self.names = protocol.qubits
        self.n_phys = layout.num_qubits
        self.dist = distance_matrix(layout).tolist()
        self.neighbors = [layout.neighbors(p) for p in range(self.n_phys)]
        self.dags = {FORWARD: build_dag(protocol, FORWARD), BACKWARD: build_dag(protocol, BACKWARD)}
        self.start_status = {FORWARD: protocol.initial_activity(), BACKWARD: protocol.final_activity()}
        loose = protocol.unprepared_ancillas()
        if loose:
            log.warning("%s gates on never-prepared ancillas %s; they are treated as inactive",
                        protocol.name, ", ".join(loose))
        self.stall_limit = config.stall_limit or 3 * (layout.rows + layout.cols)
        self.max_swaps = config.max_swaps or 50 * (len(protocol.instructions) + self.n_phys)

    # mapping helpers
    def random_mapping(self, rng: random.Random) -> MappingTable:
        l2p = {}
        for q, p in self.pins.items():
            l2p[q] = int(p)
        free = [p for p in range(self.n_phys) if p not in set(l2p.values())]
        rest = [q for q in self.names if q not in l2p]
        for q, p in zip(rest, rng.sample(free, len(rest))):
            l2p[q] = p
        return MappingTable(self.names, self.n_phys, [l2p[q] for q in self.names])

    def pin(self, mapping: MappingTable) -> MappingTable:
        """Move pinned qubits to their cells by relabeling (no gates emitted)."""
        m = mapping.copy()
        for q, p in self.pins.items():
            cur = m.physical(q)
            if cur != p:
                m.swap(cur, p)
        return m

    def _resolve(self, instr: Instruction, start: MappingTable) -> Instruction:
        d = instr.dest
        if isinstance(d, SymbolicDestination):
            if d.target == "init":
                return Instruction("Move", instr.qubits, start.physical(d.qubit))
            if d.qubit not in self.anchors:
                raise SynthesisError(f"no anchor for {d.qubit}")
            return Instruction("Move", instr.qubits, int(self.anchors[d.qubit]))
        return instr

    def traverse(self, direction: str, start: MappingTable, rng: random.Random,
                 deadline: float | None = None) -> TraversalResult:
        cfg = self.config
        layout = self.layout
        dag = self.dags[direction]
        forward = direction == FORWARD
        mapping = start.copy()
        tracker = UsageTracker(self.start_status[direction])
        budget = cfg.budget
        instrs = [self._resolve(i, start) if (i.kind == "Move" and forward) else i for i in dag.instructions]
        fl = FrontLayer.from_dag(dag)
        ops, dd_flags = [], []
        decay = [1.0] * self.n_phys
        satisfied = {}
        last_swap = None
        stall = since_reset = nswaps = 0

        def instr_of(node):
            return instrs[node] if node < len(instrs) else fl.instruction(node)

        def executable(instr):
            if instr.kind == "Move":
                return (not forward) or mapping.physical(instr.qubits[0]) == instr.dest
            if len(instr.qubits) == 1:
                return True
            return layout.adjacent(mapping.physical(instr.qubits[0]), mapping.physical(instr.qubits[1]))

        def do_swap(a, b):
            nonlocal dd_used, last_swap, nswaps, since_reset
            is_dd = tracker.active_at(a, mapping) and tracker.active_at(b, mapping)
            ops.append(Op("SWAP", (a, b) if a < b else (b, a), True, fl.partition))
            dd_flags.append(is_dd)
            dd_used += is_dd
            mapping.swap(a, b)
            decay[a] += cfg.decay
            decay[b] += cfg.decay
            since_reset += 1
            if since_reset >= cfg.decay_reset:
                decay[:] = [1.0] * self.n_phys
                since_reset = 0
            last_swap = (a, b) if a < b else (b, a)
            nswaps += 1
            if forward:
                for p in (a, b):
                    q = mapping.occupant(p)
                    if q is not None and q in satisfied and satisfied[q] != p:
                        fl.insert(Instruction("Move", (q,), satisfied.pop(q)))
            if nswaps > self.max_swaps:
                raise RoutingFailure(f"gave up after {nswaps} SWAPs")
            if deadline is not None and time.perf_counter() > deadline:
                raise TraversalTimeout("time limit exceeded")

        dd_used = 0
        valve_mode = False
        valve_calls = 0
        while not fl.is_empty():
            progressed = True
            executed_any = False
            while progressed:
                progressed = False
                for node in list(fl.nodes):
                    instr = instr_of(node)
                    if instr.kind == "Barrier" or not executable(instr):
                        continue
                    if instr.kind == "Move":
                        if forward:
                            satisfied[instr.qubits[0]] = instr.dest
                    else:
                        ops.append(Op(instr.kind, tuple(mapping.physical(q) for q in instr.qubits),
                                      False, fl.partition))
                        dd_flags.append(False)
                        update_usage(tracker, instr, direction)
                    # re-inserted Moves can chase each other; only DAG nodes count as progress
                    executed_any = executed_any or node < len(instrs)
                    fl.pop_executed(node)
                    progressed = True
            if executed_any:
                decay[:] = [1.0] * self.n_phys
                since_reset = 0
                stall = 0
            if fl.only_barrier:
                fl.flush_barrier()
                continue
            if not fl.nodes:
                break

            if valve_mode or stall >= self.stall_limit:
                valve_calls += 1
                if valve_calls > 4 * len(instrs) + 100:
                    raise Jammed("release valve keeps displacing routed qubits")
                if forward and all(instr_of(n).kind == "Move" for n in fl.nodes):
                    # finish the move-back without disturbing qubits already home
                    valve_mode = True
                self._release_valve(fl, instr_of, mapping, tracker, budget - dd_used, do_swap,
                                    set(satisfied.values()))
                stall = 0
                continue

            front = [instr_of(n) for n in fl.nodes]
            cands = collect_swap_candidates(front, mapping, tracker, layout, dd_used, budget)
            if not cands:
                raise Jammed("no fault-tolerant SWAP candidate")
            ctx = CostContext(
                [g for g in (self._gate(i, mapping, forward) for i in front) if g is not None],
                self._extended(fl, instr_of, mapping, forward),
                mapping, self.dist, decay, cfg.lookahead_w)
            choice = select_swap(cands, ctx, last_swap, rng)
            do_swap(choice.p1, choice.p2)
            stall += 1

        return TraversalResult(direction, ops, dd_flags, start.copy(), mapping, fl.partition + 1, nswaps,
                               valve_calls)

    @staticmethod
    def _gate(instr, mapping, forward):
        if instr.kind in ("CNOT", "SWAP"):
            return _Gate(mapping.index[instr.qubits[0]], mapping.index[instr.qubits[1]], -1)
        if instr.kind == "Move" and forward:
            return _Gate(mapping.index[instr.qubits[0]], -1, instr.dest)
        return None

    def _extended(self, fl, instr_of, mapping, forward):
        limit = self.config.extended_window
        if limit <= 0 or self.config.lookahead_w == 0:
            return []
        dag = fl.dag
        seen = set(fl.nodes)
        queue = [n for n in fl.nodes if n < len(dag)] + list(fl.holding)
        out = []
        qi = 0
        while qi < len(queue) and len(out) < limit:
            node = queue[qi]
            qi += 1
            if node in fl.holding and node not in seen:
                seen.add(node)
                g = self._gate(instr_of(node), mapping, forward)
                if g is not None:
                    out.append(g)
            for s in dag.succs[node]:
                if s in seen:
                    continue
                seen.add(s)
                queue.append(s)
                g = self._gate(instr_of(s), mapping, forward)
                if g is not None:
                    out.append(g)
                    if len(out) >= limit:
                        break
        return out

    # fallback when the heuristic stops making progress
    def _cheapest(self, src, goal, hard, soft, mapping, tracker):
        """Cheapest cell path from ``src`` to a cell satisfying ``goal``.

        Entering a data-type cell costs extra (it has to be cleared first) and
        entering a ``soft`` cell costs a lot; ``hard`` cells are never entered.
        """
        best = {src: 0}
        parent = {src: None}
        heap = [(0, src)]
        while heap:
            d, cell = heapq.heappop(heap)
            if d != best[cell]:
                continue
            if cell != src and goal(cell):
                path = []
                while cell is not None:
                    path.append(cell)
                    cell = parent[cell]
                return path[::-1]
            for nb in self.neighbors[cell]:
                if nb in hard:
                    continue
                step = 1 + 3 * tracker.active_at(nb, mapping) + 1000 * (nb in soft)
                if nb not in best or d + step < best[nb]:
                    best[nb] = d + step
                    parent[nb] = cell
                    heapq.heappush(heap, (d + step, nb))
        return None

    def _clear(self, cell, hard, soft, mapping, tracker, do_swap):
        """Pull the nearest non-data-type state into ``cell``; False if impossible.

        Every SWAP of the pull involves the pulled state, so none is data-data.
        """
        pull = self._cheapest(cell, lambda c: not tracker.active_at(c, mapping), hard, soft, mapping, tracker)
        if pull is None:
            return False
        pull.reverse()
        for u, v in zip(pull, pull[1:]):
            do_swap(u, v)
        return True

    def _walk(self, name, goal, hard, soft, mapping, tracker, dd_left, do_swap, keep=frozenset()):
        """Bring ``name`` to a cell satisfying ``goal`` without unbudgeted data-data SWAPs.

        A cell that cannot be cleared is avoided and the rest of the way is
        planned again from where the qubit stands.
        """
        banned = set()
        while True:
            path = self._cheapest(mapping.physical(name), goal, hard | banned, soft, mapping, tracker)
            if path is None:
                raise Jammed(f"no path for {name}")
            for y in path[1:]:
                x = mapping.physical(name)
                if tracker.active_at(x, mapping) and tracker.active_at(y, mapping):
                    if not self._clear(y, hard | keep | {x}, soft, mapping, tracker, do_swap):
                        if dd_left <= 0:
                            banned.add(y)
                            break
                        dd_left -= 1
                do_swap(x, y)
            else:
                return

    def _depths(self, cells):
        """Hop distance from each cell of ``cells`` to the nearest cell outside it."""
        depth = {}
        frontier = [c for c in range(self.n_phys) if c not in cells]
        for c in frontier:
            depth[c] = 0
        for c in frontier:
            for nb in self.neighbors[c]:
                if nb not in depth:
                    depth[nb] = depth[c] + 1
                    frontier.append(nb)
        return depth

    def _release_valve(self, fl, instr_of, mapping, tracker, dd_left, do_swap, placed=frozenset()):
        """Route one front-layer gate along a cheapest path.

        Normally the closest gate is taken. When only Moves remain, the
        destination deepest inside the region of destination cells goes first
        and qubits already home at least as deep are protected, so finished
        qubits do not wall in the ones still travelling.
        """
        dist = self.dist
        gates = [instr_of(n) for n in fl.nodes]
        gates = [i for i in gates if i.kind in ("CNOT", "SWAP", "Move")]
        if not gates:
            raise Jammed("stalled without a routable front-layer gate")
        if all(i.kind == "Move" for i in gates):
            depth = self._depths({i.dest for i in gates} | set(placed))
            instr = min(gates, key=lambda i: (-depth.get(i.dest, 0),
                                              dist[mapping.physical(i.qubits[0])][i.dest], i.qubits[0]))
            level = depth.get(instr.dest, 0)
            soft = {c for c in placed if depth.get(c, 0) >= level}
            t = instr.dest
            if tracker.active_at(t, mapping) and mapping.occupant(t) != instr.qubits[0]:
                if not self._clear(t, set(), soft, mapping, tracker, do_swap):
                    raise Jammed(f"cannot clear destination {t}")
            self._walk(instr.qubits[0], lambda c: c == t, set(), soft, mapping, tracker, dd_left,
                       do_swap, keep={t})
            return

        def key(i):
            a = mapping.physical(i.qubits[0])
            b = i.dest if i.kind == "Move" else mapping.physical(i.qubits[1])
            return (dist[a][b], str(i))
        instr = min(gates, key=key)
        soft = set(placed)
        if instr.kind == "Move":
            t = instr.dest
            self._walk(instr.qubits[0], lambda c: c == t, set(), soft, mapping, tracker, dd_left, do_swap)
            return
        failure = None
        for name, other in ((instr.qubits[0], instr.qubits[1]), (instr.qubits[1], instr.qubits[0])):
            partner = mapping.physical(other)
            near = self.neighbors[partner]
            try:
                self._walk(name, lambda c, _near=near: c in _near, {partner}, soft, mapping, tracker,
                           dd_left, do_swap)
                return
            except Jammed as exc:
                failure = exc
        raise failure

    # one SABRE round: forward, backward, forward
    def iteration(self, seed: int, index: int = 0) -> IterationResult:
        rng = random.Random(seed)
        t0 = time.perf_counter()
        deadline = t0 + self.config.time_limit if self.config.time_limit else None
        start = self.random_mapping(rng)
        first = self.traverse(FORWARD, start, rng, deadline)
        back = self.traverse(BACKWARD, first.final_mapping, rng, deadline)
        final_start = self.pin(back.final_mapping)
        last = self.traverse(FORWARD, final_start, rng, deadline)
        ops, flags = last.ops, last.dd_flags
        if self.config.postprocess:
            kept = _cancel_pairs(ops)
            ops = [o for o, k in zip(ops, kept) if k]
            flags = [f for f, k in zip(flags, kept) if k]
        dd = sum(flags)
        if dd > self.config.budget:
            raise RoutingFailure(f"{dd} data-data SWAPs exceed budget {self.config.budget}")
        init = last.initial_mapping.to_dict()
        final = last.final_mapping.to_dict()
        meta = {"seed": seed, "iteration": index, "dd_swaps": dd, "dd_budget": self.config.budget,
                "valve_calls": first.valve_calls + back.valve_calls + last.valve_calls}
        circuit = schedule_steps(ops, self.layout, init, final, self.protocol.name, last.num_partitions, meta)
        return IterationResult(circuit, init, final, dd, seed, index, time.perf_counter() - t0)


def iteration_seeds(seed: int, iterations: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(iterations)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _run_one(router, seed, index):
    try:
        return router.iteration(seed, index)
    except TraversalTimeout as exc:
        return ("timeout", index, str(exc))
    except RoutingFailure as exc:
        return ("failed", index, str(exc))


def run_sabre(protocol: Protocol, layout: QubitLayout, config: SynthesisConfig,
              anchors: dict | None = None, pins: dict | None = None) -> IterationResult:
    """Best of ``config.iterations`` independent rounds by (KQ, depth, #SWAP)."""
    router = Router(protocol, layout, config, anchors, pins)
    seeds = iteration_seeds(config.seed, config.iterations)
    if config.workers > 1 and config.iterations > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(config.workers) as pool:
            outcomes = list(pool.map(_run_one, [router] * len(seeds), seeds, range(len(seeds))))
    else:
        outcomes = [_run_one(router, s, i) for i, s in enumerate(seeds)]
    done = [o for o in outcomes if isinstance(o, IterationResult)]
    timeouts = sum(1 for o in outcomes if isinstance(o, tuple) and o[0] == "timeout")
    failed = sum(1 for o in outcomes if isinstance(o, tuple) and o[0] == "failed")
    if not done:
        reasons = sorted({o[2] for o in outcomes})
        raise SynthesisError(f"all {len(seeds)} iterations failed for {protocol.name}: {'; '.join(reasons)}")
    best = min(done, key=IterationResult.rank)
    best.attempts = {"iterations": len(seeds), "succeeded": len(done), "failed": failed, "timeouts": timeouts}
    best.circuit.meta.update(best.attempts)
    return best


def traverse(dag, initial_mapping, config: SynthesisConfig, direction: str = FORWARD, *,
             protocol: Protocol, layout: QubitLayout, anchors=None, rng=None) -> TraversalResult:
    """Single traversal of ``protocol`` from ``initial_mapping`` (a dict or MappingTable)."""
    router = Router(protocol, layout, config, anchors)
    if dag is not None and dag.direction != direction:
        raise ValueError("DAG direction does not match the traversal direction")
    if isinstance(initial_mapping, dict):
        initial_mapping = MappingTable(router.names, layout.num_qubits,
                                       [int(initial_mapping[q]) for q in router.names])
    return router.traverse(direction, initial_mapping, rng or random.Random(config.seed))
