"""Timestep-structured circuits: scheduling, canonical JSON and snapshots."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .analysis import StaticAnalysis, compute_kq  # noqa: F401  (re-exported)
from .layout import QubitLayout

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Op:
    """A physical instruction. ``inserted`` marks routing SWAPs."""

    kind: str
    qubits: tuple
    inserted: bool = False
    partition: int = 0

    def to_json(self) -> dict:
        return {"op": self.kind, "qubits": list(self.qubits), "inserted": self.inserted}


@dataclass
class Circuit:
    rows: int
    cols: int
    initial_mapping: dict
    steps: list
    partitions: list
    final_mapping: dict
    name: str = ""
    num_partitions: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def layout(self) -> QubitLayout:
        return QubitLayout(self.rows, self.cols)

    @property
    def depth(self) -> int:
        return len(self.steps)

    def ops(self) -> list[Op]:
        """All instructions in step order, stamped with their step's partition."""
        out = []
        for step, part in zip(self.steps, self.partitions):
            out.extend(Op(o.kind, o.qubits, o.inserted, part) for o in step)
        return out

    @property
    def inserted_swaps(self) -> int:
        return sum(1 for o in self.ops() if o.inserted)

    def analysis(self) -> StaticAnalysis:
        counts = Counter(o.kind for o in self.ops() if not o.inserted)
        return StaticAnalysis(
            depth=self.depth,
            qubits=self.rows * self.cols,
            gate_counts=dict(counts),
            inserted_swaps=self.inserted_swaps,
            barriers=self.num_partitions - 1,
        )

    def to_dict(self) -> dict:
        analysis = self.analysis().to_dict()
        if "dd_swaps" in self.meta:
            analysis["dd_swaps"] = self.meta["dd_swaps"]
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "layout": {"rows": self.rows, "cols": self.cols},
            "initial_mapping": dict(self.initial_mapping),
            "steps": [[o.to_json() for o in step] for step in self.steps],
            "partitions": list(self.partitions),
            "num_partitions": self.num_partitions,
            "final_mapping": dict(self.final_mapping),
            "analysis": analysis,
            "meta": dict(self.meta),
        }


def _replay_final(initial_mapping, ops):
    where = dict(initial_mapping)
    occupant = {p: q for q, p in where.items()}
    for o in ops:
        if o.kind == "SWAP" and o.inserted:
            a, b = o.qubits
            qa, qb = occupant.pop(a, None), occupant.pop(b, None)
            if qa is not None:
                occupant[b] = qa
                where[qa] = b
            if qb is not None:
                occupant[a] = qb
                where[qb] = a
    return where


def schedule_steps(ops, layout: QubitLayout | None = None, initial_mapping=None,
                   final_mapping=None, name="", num_partitions=None, meta=None) -> Circuit:
    """Greedy earliest-step placement.

    Each op goes to the first step after the previous op on any of its
    qubits, and never before the first step of its barrier partition.
    """
    steps, partitions = [], []
    ready = {}
    floor, current = 0, None
    for o in ops:
        if current is None or o.partition != current:
            if current is not None and o.partition < current:
                raise ValueError("ops must be ordered by partition")
            floor = len(steps)
            current = o.partition
            ready = {}
        t = max([floor, *(ready.get(q, floor) for q in o.qubits)])
        while len(steps) <= t:
            steps.append([])
            partitions.append(o.partition)
        steps[t].append(Op(o.kind, tuple(o.qubits), o.inserted))
        for q in o.qubits:
            ready[q] = t + 1
    steps = [sorted(s, key=lambda o: (o.qubits, o.kind)) for s in steps]
    initial_mapping = dict(initial_mapping or {})
    if final_mapping is None:
        final_mapping = _replay_final(initial_mapping, ops)
    if num_partitions is None:
        num_partitions = (max(partitions) + 1) if partitions else 1
    rows, cols = (layout.rows, layout.cols) if layout is not None else (0, 0)
    return Circuit(rows, cols, initial_mapping, steps, partitions, dict(final_mapping),
                   name, num_partitions, dict(meta or {}))


def emit_json(circuit: Circuit) -> str:
    return json.dumps(circuit.to_dict(), sort_keys=True, indent=1) + "\n"


def circuit_from_dict(d: dict) -> Circuit:
    try:
        steps = [[Op(o["op"], tuple(int(q) for q in o["qubits"]), bool(o.get("inserted", False)))
                  for o in step] for step in d["steps"]]
        return Circuit(
            rows=int(d["layout"]["rows"]),
            cols=int(d["layout"]["cols"]),
            initial_mapping={k: int(v) for k, v in d["initial_mapping"].items()},
            steps=steps,
            partitions=[int(p) for p in d["partitions"]],
            final_mapping={k: int(v) for k, v in d["final_mapping"].items()},
            name=d.get("name", ""),
            num_partitions=int(d.get("num_partitions", max(d["partitions"], default=0) + 1)),
            meta=dict(d.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed circuit JSON: {exc}") from exc


def parse_json(text: str) -> Circuit:
    return circuit_from_dict(json.loads(text))


def load_circuit(path) -> Circuit:
    with open(path) as fh:
        return parse_json(fh.read())


# -- snapshots -------------------------------------------------------------

_GLYPH = {"H": "H", "PrepZ": "P", "PrepX": "Px", "MeasZ": "M", "MeasX": "Mx",
          "X": "X", "Z": "Z", "S": "S", "Sdag": "S'", "T": "T", "Tdag": "T'"}


def _short_names(names):
    regs = {}
    for q in names:
        reg = q.split("[", 1)[0]
        regs.setdefault(reg[0], set()).add(reg)
    out = {}
    for q in names:
        reg, _, rest = q.partition("[")
        idx = rest.rstrip("]")
        prefix = reg[0] if len(regs[reg[0]]) == 1 else reg
        out[q] = f"{prefix}{idx}"
    return out


def _step_mappings(circuit):
    occupant = {p: q for q, p in circuit.initial_mapping.items()}
    for step in circuit.steps:
        for o in step:
            if o.kind == "SWAP" and o.inserted:
                a, b = o.qubits
                qa, qb = occupant.pop(a, None), occupant.pop(b, None)
                if qa is not None:
                    occupant[b] = qa
                if qb is not None:
                    occupant[a] = qb
        yield dict(occupant)


def _step_glyphs(step):
    glyph = {}
    tag = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ" * 100)
    for o in step:
        if o.kind == "SWAP":
            t = next(tag)
            glyph[o.qubits[0]] = f"<{t}>"
            glyph[o.qubits[1]] = f"<{t}>"
        elif o.kind == "CNOT":
            t = next(tag)
            glyph[o.qubits[0]] = f"*{t}"
            glyph[o.qubits[1]] = f"+{t}"
        else:
            glyph[o.qubits[0]] = _GLYPH.get(o.kind, o.kind)
    return glyph


def render_ascii(circuit: Circuit) -> list[str]:
    """One text grid per step showing the mapping after the step.

    Cells read ``name:glyph``; ``<a>`` marks both ends of a SWAP, ``*a``/``+a``
    the control/target of a CNOT, ``P`` PrepZ, ``M`` MeasZ, ``H`` Hadamard.
    """
    short = _short_names(circuit.initial_mapping)
    rows, cols = circuit.rows, circuit.cols
    frames = []
    for k, (step, occ) in enumerate(zip(circuit.steps, _step_mappings(circuit))):
        glyph = _step_glyphs(step)
        cells = []
        for p in range(rows * cols):
            name = short.get(occ.get(p), ".")
            cells.append(f"{name}:{glyph[p]}" if p in glyph else name)
        width = max(len(c) for c in cells)
        lines = [f"step {k + 1}/{len(circuit.steps)} partition {circuit.partitions[k]}"]
        for r in range(rows):
            lines.append(" ".join(c.ljust(width) for c in cells[r * cols:(r + 1) * cols]).rstrip())
        frames.append("\n".join(lines) + "\n")
    return frames


def render_svg(circuit: Circuit, cell=48) -> list[str]:
    """SVG frames: rectangles for H, rounded rectangles for PrepZ, hexagons for
    MeasZ, double-headed arrows for SWAP, dots/circles for CNOT."""
    short = _short_names(circuit.initial_mapping)
    rows, cols = circuit.rows, circuit.cols
    frames = []
    for k, (step, occ) in enumerate(zip(circuit.steps, _step_mappings(circuit))):
        w, h = cols * cell, rows * cell + 20
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="10">',
                 f'<text x="2" y="12">step {k + 1} partition {circuit.partitions[k]}</text>']

        def center(p):
            r, c = divmod(p, cols)
            return c * cell + cell / 2, 20 + r * cell + cell / 2

        for p in range(rows * cols):
            r, c = divmod(p, cols)
            x, y = c * cell, 20 + r * cell
            fill = "#ddd" if p in occ else "#fff"
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#999"/>')
        for o in step:
            cx, cy = center(o.qubits[0])
            s = cell * 0.35
            if o.kind == "H":
                parts.append(f'<rect x="{cx - s}" y="{cy - s}" width="{2 * s}" height="{2 * s}" fill="none" stroke="blue"/>')
            elif o.kind in ("PrepZ", "PrepX"):
                parts.append(f'<rect x="{cx - s}" y="{cy - s}" width="{2 * s}" height="{2 * s}" rx="6" fill="none" stroke="green"/>')
            elif o.kind in ("MeasZ", "MeasX"):
                pts = " ".join(f"{cx + s * dx:.1f},{cy + s * dy:.1f}" for dx, dy in
                               ((1, 0), (0.5, 0.87), (-0.5, 0.87), (-1, 0), (-0.5, -0.87), (0.5, -0.87)))
                parts.append(f'<polygon points="{pts}" fill="none" stroke="red"/>')
            elif o.kind == "SWAP":
                x2, y2 = center(o.qubits[1])
                parts.append(f'<line x1="{cx}" y1="{cy}" x2="{x2}" y2="{y2}" stroke="orange" stroke-width="3" '
                             f'marker-start="url(#arrow)" marker-end="url(#arrow)"/>')
            elif o.kind == "CNOT":
                x2, y2 = center(o.qubits[1])
                parts.append(f'<line x1="{cx}" y1="{cy}" x2="{x2}" y2="{y2}" stroke="black"/>')
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="4"/>')
                parts.append(f'<circle cx="{x2}" cy="{y2}" r="8" fill="none" stroke="black"/>')
            else:
                parts.append(f'<text x="{cx - 4}" y="{cy - 10}">{_GLYPH.get(o.kind, o.kind)}</text>')
        for p, q in sorted(occ.items()):
            x, y = center(p)
            parts.append(f'<text x="{x - 10}" y="{y + 4}">{short.get(q, q)}</text>')
        parts.insert(1, '<defs><marker id="arrow" viewBox="0 0 10 10" refX="5" refY="5" markerWidth="4" '
                        'markerHeight="4" orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" fill="orange"/></marker></defs>')
        parts.append("</svg>")
        frames.append("\n".join(parts) + "\n")
    return frames


def render_snapshots(circuit: Circuit, layout: QubitLayout | None = None, fmt="ascii") -> list[str]:
    if layout is not None and (layout.rows, layout.cols) != (circuit.rows, circuit.cols):
        raise ValueError(f"circuit is on {circuit.rows}x{circuit.cols}, not {layout}")
    if fmt == "ascii":
        return render_ascii(circuit)
    if fmt == "svg":
        return render_svg(circuit)
    raise ValueError(f"unknown snapshot format {fmt!r}")
