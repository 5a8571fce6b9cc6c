"""Dependency graphs over protocol instructions and the Front Layer."""

from __future__ import annotations

from dataclasses import dataclass, field

FORWARD = "forward"
BACKWARD = "backward"


@dataclass
class Dag:
    """Node ``i`` is instruction ``i`` of the source list in both directions."""

    instructions: list
    preds: list
    succs: list
    direction: str = FORWARD

    def __len__(self):
        return len(self.instructions)

    @property
    def roots(self) -> list[int]:
        return [i for i, p in enumerate(self.preds) if not p]

    def edges(self) -> set[tuple[int, int]]:
        return {(a, b) for a, ss in enumerate(self.succs) for b in ss}

    def is_barrier(self, node: int) -> bool:
        return self.instructions[node].kind == "Barrier"

    def longest_path(self, weight=None) -> int:
        """Longest weighted chain (default weight 1 except barriers and moves)."""
        if weight is None:
            def weight(instr):
                return 0 if instr.kind in ("Barrier", "Move") else 1
        best = [0] * len(self)
        for node in self.topological_order():
            base = max((best[p] for p in self.preds[node]), default=0)
            best[node] = base + weight(self.instructions[node])
        return max(best, default=0)

    def topological_order(self) -> list[int]:
        indeg = [len(p) for p in self.preds]
        ready = sorted(self.roots)
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for s in self.succs[node]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
            ready.sort()
        if len(order) != len(self):
            raise ValueError("dependency graph has a cycle")
        return order

    def to_dot(self, name="protocol") -> str:
        lines = [f'digraph "{name}" {{', "  node [shape=box, fontname=monospace];"]
        for i, instr in enumerate(self.instructions):
            label = str(instr).rstrip(";").replace('"', r'\"')
            lines.append(f'  n{i} [label="{i}: {label}"];')
        for a, b in sorted(self.edges()):
            lines.append(f"  n{a} -> n{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_dag(protocol_or_instructions, direction: str = FORWARD) -> Dag:
    """Chain each instruction to the last earlier instruction on each of its qubits.

    Barriers depend on everything before them and precede everything after.
    The backward graph chains over the reversed instruction list.
    """
    instrs = list(getattr(protocol_or_instructions, "instructions", protocol_or_instructions))
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"unknown direction {direction!r}")
    n = len(instrs)
    preds = [[] for _ in range(n)]
    succs = [[] for _ in range(n)]
    order = range(n) if direction == FORWARD else range(n - 1, -1, -1)
    last = {}
    barrier = None

    def link(a, b):
        if a is not None and a not in preds[b]:
            preds[b].append(a)
            succs[a].append(b)

    for node in order:
        instr = instrs[node]
        if instr.kind == "Barrier":
            tails = set(last.values())
            if barrier is not None:
                tails.add(barrier)
            for t in sorted(tails):
                link(t, node)
            barrier = node
            last = {}
            continue
        for q in instr.qubits:
            link(last.get(q, barrier), node)
            last[q] = node
    for lst in preds:
        lst.sort()
    for lst in succs:
        lst.sort()
    return Dag(instrs, preds, succs, direction)


class FrontLayerError(RuntimeError):
    pass


@dataclass
class FrontLayer:
    """Roots of the not-yet-emitted part of a DAG.

    While a Barrier sits in the layer, newly ready successors are parked in
    ``holding`` and only released by :meth:`flush_barrier`.
    """

    dag: Dag
    nodes: list = field(default_factory=list)
    holding: list = field(default_factory=list)
    emitted: set = field(default_factory=set)
    partition: int = 0
    _missing: list = field(default_factory=list, repr=False)
    _extra: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dag(cls, dag: Dag) -> "FrontLayer":
        fl = cls(dag)
        fl._missing = [len(p) for p in dag.preds]
        fl.nodes = dag.roots
        return fl

    def __contains__(self, node):
        return node in self.nodes

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(list(self.nodes))

    def instruction(self, node):
        if node in self._extra:
            return self._extra[node]
        return self.dag.instructions[node]

    @property
    def barrier_active(self) -> bool:
        return any(self._is_barrier(n) for n in self.nodes)

    def _is_barrier(self, node):
        return node not in self._extra and self.dag.is_barrier(node)

    @property
    def only_barrier(self) -> bool:
        return len(self.nodes) == 1 and self._is_barrier(self.nodes[0])

    def is_empty(self) -> bool:
        return not self.nodes and not self.holding

    def insert(self, instruction) -> int:
        """Add a successor-free pseudo node (forced Move re-insertion)."""
        node = len(self.dag) + len(self._extra)
        while node in self._extra:
            node += 1
        self._extra[node] = instruction
        self.nodes.append(node)
        return node

    def pop_executed(self, node: int) -> "FrontLayer":
        if node not in self.nodes:
            raise FrontLayerError(f"node {node} is not in the front layer")
        if self._is_barrier(node):
            raise FrontLayerError("barrier nodes leave the front layer through flush_barrier")
        self.nodes.remove(node)
        if node in self._extra:
            del self._extra[node]
            return self
        self.emitted.add(node)
        target = self.holding if self.barrier_active else self.nodes
        for s in self.dag.succs[node]:
            self._missing[s] -= 1
            if self._missing[s] == 0:
                target.append(s)
        return self

    def flush_barrier(self) -> "FrontLayer":
        if not self.only_barrier:
            raise FrontLayerError("flush_barrier requires the barrier to be the only front-layer node")
        barrier = self.nodes.pop()
        self.emitted.add(barrier)
        released = self.holding
        self.holding = []
        for s in self.dag.succs[barrier]:
            self._missing[s] -= 1
            if self._missing[s] == 0:
                released.append(s)
        self.nodes = released
        self.partition += 1
        return self


def pop_executed(dag: Dag, fl: FrontLayer, node_id: int) -> FrontLayer:
    assert fl.dag is dag
    return fl.pop_executed(node_id)


def flush_barrier(fl: FrontLayer) -> FrontLayer:
    return fl.flush_barrier()
