"""Circuit-size metrics shared by protocol and circuit reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


def compute_kq(depth: int, qubits: int) -> int:
    """Circuit size: depth times number of physical qubits."""
    if depth < 0 or qubits < 0:
        raise ValueError("depth and qubit count must be nonnegative")
    return int(depth) * int(qubits)


@dataclass
class StaticAnalysis:
    depth: int
    qubits: int
    gate_counts: dict = field(default_factory=dict)
    inserted_swaps: int = 0
    barriers: int = 0

    @property
    def kq(self) -> int:
        return compute_kq(self.depth, self.qubits)

    @property
    def num_gates(self) -> int:
        return sum(self.gate_counts.values()) + self.inserted_swaps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gate_counts"] = dict(sorted(self.gate_counts.items()))
        d["kq"] = self.kq
        d["num_gates"] = self.num_gates
        return d
