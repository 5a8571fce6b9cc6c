"""Synthesis of a whole protocol set around one logical-qubit configuration.

Pivot protocols (syndrome measurement, magic-state preparation) are routed
first and fix where the data qubits of a logical qubit live. Every other
protocol is anchored to that configuration so circuits compose. Two-qubit
logical operations run on a layout holding two blocks side by side.
"""

from __future__ import annotations

import json
import logging
import re
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .emit import Circuit, Op, schedule_steps
from .ir import Protocol, inject_moveback, moveback_targets
from .layout import HORIZONTAL, VERTICAL, QubitLayout, extend_layout, tile_layout
from .library import load_fixture
from .mapper import IterationResult, SynthesisConfig, SynthesisError, run_sabre

log = logging.getLogger(__name__)

ARRANGEMENTS = ("vertical(n,s)", "vertical(s,n)", "horizontal(e,w)", "horizontal(w,e)")
_ARR_RE = re.compile(r"^(vertical|horizontal)\((n|s|e|w),(n|s|e|w)\)$")


class AnchorConflict(SynthesisError):
    pass


@dataclass(frozen=True)
class LogicalQubitConfig:
    """Cell of each data qubit ``data[i]`` inside one ``rows x cols`` block."""

    rows: int
    cols: int
    positions: dict

    def __post_init__(self):
        cells = list(self.positions.values())
        if len(set(cells)) != len(cells):
            raise AnchorConflict("logical-qubit configuration places two data qubits on one cell")
        bad = [q for q, p in self.positions.items() if not 0 <= p < self.rows * self.cols]
        if bad:
            raise ValueError(f"anchors outside the {self.rows}x{self.cols} block: {bad}")

    @property
    def layout(self) -> QubitLayout:
        return QubitLayout(self.rows, self.cols)

    @staticmethod
    def _index(name: str) -> int:
        return int(name[name.index("[") + 1:-1])

    def anchors(self, register: str = "data", relabel: dict | None = None) -> dict:
        """Anchor table for ``register[i]``, optionally relabeled into a bigger layout."""
        out = {}
        for q, p in self.positions.items():
            out[f"{register}[{self._index(q)}]"] = relabel[p] if relabel is not None else p
        return out

    @classmethod
    def from_mapping(cls, layout: QubitLayout, mapping: dict, register: str = "data") -> "LogicalQubitConfig":
        pos = {f"data[{cls._index(q)}]": p for q, p in mapping.items() if q.startswith(register + "[")}
        return cls(layout.rows, layout.cols, dict(sorted(pos.items(), key=lambda kv: cls._index(kv[0]))))

    def to_dict(self) -> dict:
        return {"layout": {"rows": self.rows, "cols": self.cols}, "anchors": dict(self.positions)}

    @classmethod
    def from_dict(cls, d: dict) -> "LogicalQubitConfig":
        return cls(int(d["layout"]["rows"]), int(d["layout"]["cols"]),
                   {k: int(v) for k, v in d["anchors"].items()})


@dataclass(frozen=True)
class ExtendedLayoutPlan:
    gate: str
    arrangement: str
    direction: str
    first_block: int  # block holding the control (CNOT) or data (T) qubit
    second_block: int
    mirror_of: str | None = None  # reuse that arrangement's circuit, operands exchanged

    @property
    def synthesized(self) -> bool:
        return self.mirror_of is None

    @property
    def slug(self) -> str:
        d, a, b = _ARR_RE.match(self.arrangement).groups()
        return f"{d}_{a}{b}"


def plan_two_qubit(gate_kind: str, arrangement: str) -> ExtendedLayoutPlan:
    """Where the two logical qubits go and whether a circuit is routed at all.

    Block 0 is the top (vertical) or left (horizontal) block. A CNOT needs
    only two routed circuits; the other two arrangements reuse them mirrored.
    """
    m = _ARR_RE.match(arrangement.replace(" ", ""))
    if not m or arrangement.replace(" ", "") not in ARRANGEMENTS:
        raise ValueError(f"unknown arrangement {arrangement!r}; choose from {', '.join(ARRANGEMENTS)}")
    arrangement = arrangement.replace(" ", "")
    direction, first, _ = m.groups()
    first_block = 0 if first in ("n", "w") else 1
    gate = gate_kind.lower()
    if gate not in ("cnot", "t"):
        raise ValueError(f"no two-qubit plan for {gate_kind!r}")
    mirror = None
    if gate == "cnot":
        mirror = {"vertical(s,n)": "vertical(n,s)", "horizontal(w,e)": "horizontal(e,w)"}.get(arrangement)
    return ExtendedLayoutPlan(gate, arrangement, VERTICAL if direction == "vertical" else HORIZONTAL,
                              first_block, 1 - first_block, mirror)


def two_qubit_jobs(gate_kind: str) -> list[ExtendedLayoutPlan]:
    return [p for p in (plan_two_qubit(gate_kind, a) for a in ARRANGEMENTS) if p.synthesized]


def job_config(config: SynthesisConfig, name: str) -> SynthesisConfig:
    """Per-job config whose seed depends only on the master seed and the job name."""
    seed = int(np.random.SeedSequence([config.seed, zlib.crc32(name.encode())]).generate_state(1)[0])
    return replace(config, seed=seed)


# -- protocol set -------------------------------------------------------------

@dataclass
class ProtocolEntry:
    """One protocol plus how it is synthesized.

    ``kind`` is ``sm`` or ``msp`` for pivots, ``single`` for one-block
    non-pivots, ``cnot`` or ``t`` for two-block ones. ``moveback`` is
    ``init``, ``anchor`` or None.
    """

    name: str
    protocol: Protocol
    role: str = "non-pivot"
    kind: str = "single"
    moveback: str | None = "init"
    arrangements: tuple = ARRANGEMENTS
    iterations: int | None = None

    def __post_init__(self):
        if self.role not in ("pivot", "non-pivot"):
            raise ValueError(f"role must be pivot or non-pivot, got {self.role!r}")
        if self.kind not in ("sm", "msp", "single", "cnot", "t"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.moveback not in (None, "init", "anchor"):
            raise ValueError(f"unknown move-back target {self.moveback!r}")


@dataclass
class ProtocolSet:
    entries: list

    def __post_init__(self):
        sms = [e for e in self.entries if e.kind == "sm"]
        if len(sms) != 1 or sms[0].role != "pivot":
            raise ValueError("a protocol set needs exactly one pivot syndrome-measurement entry")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate protocol names in set")

    @property
    def pivots(self) -> list:
        return [e for e in self.entries if e.role == "pivot"]

    @property
    def nonpivots(self) -> list:
        return [e for e in self.entries if e.role == "non-pivot"]

    def get(self, kind: str):
        return next((e for e in self.entries if e.kind == kind), None)

    @classmethod
    def steane(cls) -> "ProtocolSet":
        return cls([
            ProtocolEntry("steane_sm", load_fixture("steane_sm"), "pivot", "sm", "init"),
            ProtocolEntry("magic_state_prep", load_fixture("magic_state_prep"), "pivot", "msp", None),
            ProtocolEntry("encoder", load_fixture("encoder"), "non-pivot", "single", "anchor"),
            ProtocolEntry("measz", load_fixture("measz"), "non-pivot", "single", "init"),
            ProtocolEntry("h", load_fixture("h"), "non-pivot", "single", "init"),
            ProtocolEntry("s", load_fixture("s"), "non-pivot", "single", "init"),
            ProtocolEntry("cnot", load_fixture("cnot"), "non-pivot", "cnot", "init"),
            ProtocolEntry("t_gate", load_fixture("t_gate"), "non-pivot", "t", "init"),
        ])


@dataclass
class Job:
    """A synthesized (or mirrored) circuit with what is needed to check it."""

    name: str
    protocol: Protocol  # with Move-Back instructions
    layout: QubitLayout
    result: IterationResult
    anchors: dict = field(default_factory=dict)
    pins: dict = field(default_factory=dict)
    mirror_of: str | None = None

    @property
    def circuit(self) -> Circuit:
        return self.result.circuit


@dataclass
class PivotResult:
    config: LogicalQubitConfig
    jobs: dict
    magic_final: dict | None = None


def _with_moveback(protocol: Protocol, target: str | None, registers=None) -> Protocol:
    if target is None:
        return protocol
    if registers is None:
        qubits = protocol.qubits_with_role("data")
    else:
        qubits = [q for r in protocol.registers if r.name in registers for q in r.qubits]
    return inject_moveback(protocol, moveback_targets(protocol, target=target, qubits=qubits))


def _run(name, protocol, layout, config, anchors=None, pins=None, iterations=None) -> Job:
    cfg = job_config(config, name)
    if iterations:
        cfg = replace(cfg, iterations=iterations)
    result = run_sabre(protocol, layout, cfg, anchors=anchors, pins=pins)
    result.circuit.name = name
    return Job(name, protocol, layout, result, dict(anchors or {}), dict(pins or {}))


def synthesize_pivots(pset: ProtocolSet, layout: QubitLayout, config: SynthesisConfig) -> PivotResult:
    """Route the syndrome measurement unanchored and derive the configuration.

    The data positions of its initial mapping become the logical-qubit
    configuration. The magic-state preparation is routed next and its final
    mapping kept for the T gate.
    """
    sm = pset.get("sm")
    sm_protocol = _with_moveback(sm.protocol, sm.moveback)
    job = _run(sm.name, sm_protocol, layout, config, iterations=sm.iterations)
    data = [r.name for r in sm.protocol.registers if r.role == "data"]
    lqc = LogicalQubitConfig.from_mapping(layout, job.result.initial_mapping, data[0])
    jobs = {sm.name: job}
    magic_final = None
    msp = pset.get("msp")
    if msp is not None:
        mjob = _run(msp.name, _with_moveback(msp.protocol, msp.moveback), layout, config,
                    iterations=msp.iterations)
        jobs[msp.name] = mjob
        magic_final = {q: p for q, p in mjob.result.final_mapping.items()
                       if msp.protocol.role_of(q) == "magic"}
    return PivotResult(lqc, jobs, magic_final)


def synthesize_nonpivot(protocol: Protocol, anchors: dict, layout: QubitLayout, config: SynthesisConfig,
                        name: str | None = None, pin_roles=("data",), iterations=None) -> Job:
    """Route with the qubits of ``pin_roles`` pinned to their anchors in every iteration."""
    pins = {q: anchors[q] for q in protocol.qubits_with_role(*pin_roles) if q in anchors}
    if len(set(pins.values())) != len(pins):
        raise AnchorConflict("two qubits pinned to the same cell")
    missing = [m.dest.qubit for m in protocol.moves
               if getattr(m.dest, "target", None) == "anchor" and m.dest.qubit not in anchors]
    if missing:
        raise SynthesisError(f"no anchor for {missing}")
    return _run(name or protocol.name, protocol, layout, config, anchors=anchors, pins=pins,
                iterations=iterations)


def _block_anchors(lqc: LogicalQubitConfig, plan: ExtendedLayoutPlan):
    ext, ext_plan = extend_layout(lqc.layout, plan.direction)
    return ext, ext_plan.relabel[plan.first_block], ext_plan.relabel[plan.second_block]


def synthesize_two_qubit(protocol: Protocol, lqc: LogicalQubitConfig, plan: ExtendedLayoutPlan,
                         config: SynthesisConfig, first: str, second: str, name: str | None = None,
                         second_positions: dict | None = None, iterations=None) -> Job:
    """Route a two-block protocol: ``first`` register in one block, ``second`` in the other.

    ``second_positions`` overrides the anchors of the second register (in base
    block coordinates), e.g. the magic-state preparation's final mapping.
    """
    ext, rel_first, rel_second = _block_anchors(lqc, plan)
    pins = lqc.anchors(first, rel_first)
    if second_positions is None:
        pins.update(lqc.anchors(second, rel_second))
    else:
        pins.update({q: rel_second[p] for q, p in second_positions.items()})
    name = name or f"{protocol.name}_{plan.slug}"
    job = _run(name, protocol, ext, config, anchors=pins, pins=pins, iterations=iterations)
    return job


def synthesize_t_gate(data_anchor: LogicalQubitConfig, magic_final_mapping: dict, arrangement: str,
                      config: SynthesisConfig, protocol: Protocol | None = None, iterations=None) -> Job:
    """T gate as one routed circuit; only data qubits move back."""
    plan = plan_two_qubit("t", arrangement)
    protocol = protocol or load_fixture("t_gate")
    protocol = _with_moveback(protocol, "init", registers=("data",))
    return synthesize_two_qubit(protocol, data_anchor, plan, config, "data", "magic",
                                second_positions=magic_final_mapping, iterations=iterations)


def mirror_cnot_circuit(circuit: Circuit, first: str = "ctrl", second: str = "trgt", name: str = "") -> Circuit:
    """Exchange the roles of the two registers and flip every protocol CNOT."""
    def rename(q):
        reg, _, rest = q.partition("[")
        reg = second if reg == first else first if reg == second else reg
        return f"{reg}[{rest}"

    ops = []
    for t, step in enumerate(circuit.steps):
        for op in step:
            qubits = op.qubits
            if op.kind == "CNOT" and not op.inserted:
                qubits = (qubits[1], qubits[0])
            ops.append(Op(op.kind, qubits, op.inserted, circuit.partitions[t]))
    meta = dict(circuit.meta, mirror_of=circuit.name)
    return schedule_steps(ops, circuit.layout, {rename(q): p for q, p in circuit.initial_mapping.items()},
                          {rename(q): p for q, p in circuit.final_mapping.items()},
                          name or circuit.name, circuit.num_partitions, meta)


def synthesize_cnot(protocol: Protocol, lqc: LogicalQubitConfig, config: SynthesisConfig,
                    arrangements=ARRANGEMENTS, iterations=None) -> dict:
    protocol = _with_moveback(protocol, "init")
    jobs = {}
    plans = [plan_two_qubit("cnot", a) for a in arrangements]
    needed = {p.mirror_of or p.arrangement for p in plans}
    routed = {}
    for arr in ARRANGEMENTS:
        if arr in needed:
            plan = plan_two_qubit("cnot", arr)
            routed[arr] = synthesize_two_qubit(protocol, lqc, plan, config, "ctrl", "trgt",
                                               name=f"{protocol.name}_{plan.slug}", iterations=iterations)
    for plan in plans:
        name = f"{protocol.name}_{plan.slug}"
        if plan.synthesized:
            jobs[name] = routed[plan.arrangement]
            continue
        src = routed[plan.mirror_of]
        circuit = mirror_cnot_circuit(src.circuit, name=name)
        res = replace(src.result, circuit=circuit, initial_mapping=dict(circuit.initial_mapping),
                      final_mapping=dict(circuit.final_mapping))
        anchors = {k: v for k, v in ((q, circuit.initial_mapping[q]) for q in protocol.qubits)}
        jobs[name] = Job(name, protocol, src.layout, res, anchors, anchors, mirror_of=src.name)
    return jobs


def synthesize_set(pset: ProtocolSet, layout: QubitLayout, config: SynthesisConfig):
    """Pivots first, then every non-pivot anchored to the derived configuration."""
    pivots = synthesize_pivots(pset, layout, config)
    lqc = pivots.config
    jobs = dict(pivots.jobs)
    for entry in pset.nonpivots:
        if entry.kind == "single":
            proto = _with_moveback(entry.protocol, entry.moveback)
            regs = [r.name for r in entry.protocol.registers if r.role == "data"]
            anchors = {}
            for reg in regs:
                anchors.update(lqc.anchors(reg))
            jobs[entry.name] = synthesize_nonpivot(proto, anchors, layout, config, entry.name,
                                                   iterations=entry.iterations)
        elif entry.kind == "cnot":
            jobs.update(synthesize_cnot(entry.protocol, lqc, config, entry.arrangements, entry.iterations))
        elif entry.kind == "t":
            if pivots.magic_final is None:
                raise SynthesisError("the T gate needs a magic-state preparation pivot")
            for arr in entry.arrangements:
                plan = plan_two_qubit("t", arr)
                job = synthesize_t_gate(lqc, pivots.magic_final, arr, config, entry.protocol, entry.iterations)
                job.name = job.result.circuit.name = f"{entry.name}_{plan.slug}"
                jobs[job.name] = job
    return lqc, jobs


# -- Golay pipeline -------------------------------------------------------------

@dataclass
class GolayStage:
    name: str
    layout: QubitLayout
    dd_budget: int
    job: Job


@dataclass
class GolayResult:
    stages: list
    lq_mapping: dict  # stage-1 final mapping of the prepared block

    def stage(self, name: str) -> GolayStage:
        return next(s for s in self.stages if s.name == name)


def _rename(mapping: dict, src: str, dst: str) -> dict:
    return {q.replace(src + "[", dst + "[", 1): p for q, p in mapping.items() if q.startswith(src + "[")}


def golay_pipeline(protocols: dict | None, config: SynthesisConfig, block: QubitLayout | None = None,
                   budgets=(0, 0, 1), iterations=None) -> GolayResult:
    """Three stages: non-FT preparation, verification on 4 blocks, syndrome measurement.

    ``protocols`` maps ``prep``, ``verify`` and ``sm`` to Protocols (the
    shipped fixtures when None). ``iterations`` may be a single count or one
    per stage.
    """
    protocols = protocols or {}
    prep = protocols.get("prep") or load_fixture("golay_prep")
    verify = protocols.get("verify") or load_fixture("golay_verify")
    sm = protocols.get("sm") or load_fixture("golay_sm")
    block = block or QubitLayout(7, 7)
    its = iterations if isinstance(iterations, (tuple, list)) else (iterations,) * 3
    stages = []
    base_cfg = replace(config, distance=max(config.distance, prep.distance))

    # stage 1
    cfg = replace(base_cfg, dd_budget=budgets[0])
    j1 = _run("golay_prep", prep, block, cfg, iterations=its[0])
    stages.append(GolayStage("prep", block, budgets[0], j1))
    prep_reg = prep.registers[0].name
    lq = _rename(j1.result.final_mapping, prep_reg, "q")

    # stage 2: four copies of the prepared block, partial move-back of block 1
    big, relabels = tile_layout(block, 2, 2)
    pins = {}
    for k, reg in enumerate(r.name for r in verify.registers[:4]):
        pins.update({q.replace("q[", f"{reg}[", 1): relabels[k][p] for q, p in lq.items()})
    first = verify.registers[0].name
    vproto = _with_moveback(verify, "init", registers=(first,))
    cfg = replace(base_cfg, dd_budget=budgets[1])
    j2 = _run("golay_verify", vproto, big, cfg, anchors=pins, pins=pins, iterations=its[1])
    stages.append(GolayStage("verify", big, budgets[1], j2))

    # stage 3: data block on top, ancilla block below
    ext, plan = extend_layout(block, VERTICAL)
    data_reg = [r.name for r in sm.registers if r.role == "data"][0]
    anc_reg = [r.name for r in sm.registers if r.role != "data"][0]
    pins3 = {q.replace("q[", f"{data_reg}[", 1): plan.relabel[0][p] for q, p in lq.items()}
    pins3.update({q.replace("q[", f"{anc_reg}[", 1): plan.relabel[1][p] for q, p in lq.items()})
    sproto = _with_moveback(sm, "init")
    cfg = replace(base_cfg, dd_budget=budgets[2])
    j3 = _run("golay_sm", sproto, ext, cfg, anchors=pins3, pins=pins3, iterations=its[2])
    stages.append(GolayStage("sm", ext, budgets[2], j3))
    return GolayResult(stages, lq)


def load_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
