"""Command-line front end: ``ftsynth <subcommand> ...``.

Subcommands: synthesize, validate, analyze, render, sweep, golay-pipeline.
The default output directory comes from ``$FTSYNTH_OUT`` (else ``ftsynth-out``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dag import build_dag
from .emit import emit_json, load_circuit, render_snapshots
from .ir import ProtocolError, inject_moveback, moveback_targets, parse_protocol, static_analysis
from .layout import parse_layout
from .library import FIXTURE_NAMES, load_fixture
from .mapper import SynthesisConfig, SynthesisError, run_sabre
from .verify import validate
from .workflow import (ARRANGEMENTS, LogicalQubitConfig, ProtocolEntry, ProtocolSet, golay_pipeline,
                       synthesize_set)

OUT_ENV = "FTSYNTH_OUT"
log = logging.getLogger("ftsynth")


class UsageError(Exception):
    """Bad input; exit code 2."""


def _layout_arg(text):
    try:
        return parse_layout(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _default_out():
    return os.environ.get(OUT_ENV, "ftsynth-out")


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_protocol(ref: str, base: Path | None = None):
    """A protocol file path, or the name of a shipped fixture."""
    path = Path(ref) if base is None else base / ref
    if path.is_file():
        try:
            return parse_protocol(path.read_text())
        except ProtocolError as exc:
            raise UsageError(f"{path}:{exc.line}:{exc.col}: {exc}") from None
    if ref in FIXTURE_NAMES:
        return load_fixture(ref)
    raise UsageError(f"no protocol file or fixture named {ref!r}")


_CONFIG_KEYS = {
    "distance": "distance", "iterations": "iterations", "seed": "seed", "time_limit_secs": "time_limit",
    "dd_budget": "dd_budget", "lookahead_w": "lookahead_w", "decay": "decay", "decay_reset": "decay_reset",
    "extended_window": "extended_window", "stall_limit": "stall_limit", "max_swaps": "max_swaps",
    "workers": "workers", "postprocess": "postprocess",
}


def _config_values(d: dict) -> dict:
    out = {}
    for key, value in d.items():
        key = key.replace("-", "_")
        if key in _CONFIG_KEYS and value is not None:
            out[_CONFIG_KEYS[key]] = value
    return out


def build_config(args, base: dict | None = None) -> SynthesisConfig:
    """Manifest / config-file values, overridden by explicit command-line flags."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            values.update(_config_values(tomllib.load(fh)))
    values.update(_config_values(base or {}))
    values.update(_config_values({k: getattr(args, k, None) for k in _CONFIG_KEYS}))
    known = {f.name for f in fields(SynthesisConfig)}
    try:
        return SynthesisConfig(**{k: v for k, v in values.items() if k in known})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _add_config_flags(p):
    g = p.add_argument_group("synthesis configuration")
    g.add_argument("--config", help="TOML file of key = value settings (flags win)")
    g.add_argument("--distance", type=int, help="code distance d (DD budget floor((d-1)/4))")
    g.add_argument("--iterations", type=int, help="independent routing iterations")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--time-limit-secs", type=float, help="wall-clock limit per iteration")
    g.add_argument("--dd-budget", type=int, help="override the data-data SWAP budget")
    g.add_argument("--lookahead-w", type=float, help="lookahead weight W in [0, 1]")
    g.add_argument("--decay", type=float, help="decay increment per SWAP")
    g.add_argument("--workers", type=int, help="parallel worker processes per synthesis")


def _report_for(job, config):
    return validate(job.circuit, job.protocol, job.layout, config, anchors=job.anchors)


def _write_job(out: Path, job, report):
    write_atomic(out / f"{job.name}.json", emit_json(job.circuit))
    write_atomic(out / f"{job.name}.qasm", job.protocol.to_text())
    write_atomic(out / f"{job.name}.report.json", report.to_json())


def _entries_from_manifest(manifest: dict, base: Path):
    entries = []
    for e in manifest.get("protocols", []):
        ref = e.get("path") or e.get("fixture") or e.get("name")
        proto = load_protocol(ref, base if e.get("path") else None)
        kind = e.get("kind", "single")
        role = e.get("role", "pivot" if kind in ("sm", "msp") else "non-pivot")
        moveback = e.get("moveback", None if kind == "msp" else "init")
        moveback = None if moveback in (None, "none") else moveback
        arrangements = tuple(e.get("arrangements", ARRANGEMENTS))
        try:
            entries.append(ProtocolEntry(e.get("name", proto.name), proto, role, kind, moveback, arrangements,
                                         e.get("iterations")))
        except ValueError as exc:
            raise UsageError(f"manifest entry {e!r}: {exc}") from None
    return entries


def cmd_synthesize(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    try:
        layout = parse_layout(args.layout or manifest.get("layout", "5x7"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = build_config(args, manifest)
    entries = _entries_from_manifest(manifest, path.parent)
    try:
        pset = ProtocolSet(entries) if entries else ProtocolSet.steane()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out or manifest.get("output") or _default_out())
    if args.dump_dag:
        for e in pset.entries:
            write_atomic(out / f"{e.name}.dot", build_dag(e.protocol).to_dot(e.name))
    lqc, jobs = synthesize_set(pset, layout, config)
    write_atomic(out / "logical_qubit_config.json", json.dumps(lqc.to_dict(), sort_keys=True, indent=1) + "\n")
    summary, ok = {}, True
    for name, job in jobs.items():
        report = _report_for(job, config)
        _write_job(out, job, report)
        ok &= report.passed
        a = job.circuit.analysis()
        summary[name] = {"passed": report.passed, "depth": a.depth, "kq": a.kq, "swaps": a.inserted_swaps,
                         "layout": str(job.layout), "dd_swaps": report.metrics["dd_swaps"],
                         "timeouts": job.circuit.meta.get("timeouts", 0)}
        if not report.passed:
            failed = [c for c, v in report.checks.items() if v["status"] == "fail"]
            print(f"{name}: validation failed ({', '.join(failed)})", file=sys.stderr)
    write_atomic(out / "summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")
    print(json.dumps({"output": str(out), "circuits": len(jobs), "passed": ok}, sort_keys=True))
    return 0 if ok else 1


def _load_anchors(path):
    if not path:
        return None
    d = json.loads(Path(path).read_text())
    if "anchors" in d and "layout" in d:
        return LogicalQubitConfig.from_dict(d).anchors()
    return {k: int(v) for k, v in d.items()}


def cmd_validate(args) -> int:
    try:
        text = Path(args.circuit).read_text()
        circuit = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed circuit JSON {args.circuit}: {exc}") from None
    protocol = load_protocol(args.protocol)
    try:
        report = validate(circuit, protocol, args.layout, anchors=_load_anchors(args.anchors),
                          distance=args.distance, dd_budget=args.dd_budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(report.to_json())
    return 0 if report.passed else 1


def cmd_analyze(args) -> int:
    if args.target.endswith(".json") and Path(args.target).is_file():
        try:
            circuit = load_circuit(args.target)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(json.dumps(circuit.analysis().to_dict(), sort_keys=True, indent=1))
        return 0
    protocol = load_protocol(args.target)
    if args.dump_dag:
        sys.stdout.write(build_dag(protocol).to_dot(protocol.name))
        return 0
    out = static_analysis(protocol).to_dict()
    out["unprepared_ancillas"] = protocol.unprepared_ancillas()
    print(json.dumps(out, sort_keys=True, indent=1))
    return 0


def cmd_render(args) -> int:
    try:
        circuit = load_circuit(args.circuit)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    frames = render_snapshots(circuit, fmt=args.format)
    if args.out is None:
        if args.format != "ascii":
            raise UsageError("--out is required for svg output")
        sys.stdout.write("\n".join(frames))
        return 0
    out = Path(args.out)
    ext = "txt" if args.format == "ascii" else "svg"
    for k, frame in enumerate(frames):
        write_atomic(out / f"step_{k:03d}.{ext}", frame)
    print(f"wrote {len(frames)} snapshots to {out}")
    return 0


def cmd_sweep(args) -> int:
    protocol = load_protocol(args.protocol)
    if args.moveback != "none":
        protocol = inject_moveback(protocol, moveback_targets(protocol, target=args.moveback))
    try:
        layouts = [parse_layout(t) for t in args.layouts.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not layouts:
        raise UsageError("sweep needs at least one layout")
    config = build_config(args)
    ideal = static_analysis(protocol)
    cols = ["layout", "qubits", "depth", "num_gates", "kq", "swaps", "ideal_depth", "ideal_kq",
            "failed", "timeouts"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for layout in layouts:
            row = {"layout": str(layout), "qubits": layout.num_qubits, "ideal_depth": ideal.depth,
                   "ideal_kq": ideal.kq, "failed": 0, "timeouts": 0}
            try:
                res = run_sabre(protocol, layout, config)
                a = res.circuit.analysis()
                row.update(depth=a.depth, num_gates=a.num_gates, kq=a.kq, swaps=a.inserted_swaps,
                           timeouts=res.attempts.get("timeouts", 0))
            except SynthesisError as exc:
                log.warning("%s on %s: %s", protocol.name, layout, exc)
                row.update(failed=1)
            w.writerow([row.get(c, "") for c in cols])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_golay(args) -> int:
    config = build_config(args, {"distance": 7})
    out = Path(args.out or _default_out())
    result = golay_pipeline(None, config, args.block)
    ok = True
    summary = {}
    for stage in result.stages:
        job = stage.job
        report = validate(job.circuit, job.protocol, job.layout, anchors=job.anchors, dd_budget=stage.dd_budget)
        _write_job(out, job, report)
        ok &= report.passed
        summary[stage.name] = {"layout": str(stage.layout), "dd_budget": stage.dd_budget, "passed": report.passed,
                               "depth": job.circuit.depth, "swaps": job.circuit.inserted_swaps,
                               "dd_swaps": report.metrics["dd_swaps"]}
    write_atomic(out / "golay_lq_mapping.json", json.dumps(result.lq_mapping, sort_keys=True, indent=1) + "\n")
    write_atomic(out / "summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ftsynth", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="route a protocol set described by a JSON manifest")
    p.add_argument("manifest")
    p.add_argument("--layout", help="ROWSxCOLS, overrides the manifest")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ftsynth-out)")
    p.add_argument("--dump-dag", action="store_true", help="also write each protocol DAG as DOT")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("validate", help="check a circuit against its protocol; exit 0 iff all checks pass")
    p.add_argument("circuit")
    p.add_argument("protocol", help="protocol file or fixture name")
    p.add_argument("--layout", type=_layout_arg, help="expected ROWSxCOLS")
    p.add_argument("--distance", type=int)
    p.add_argument("--dd-budget", type=int)
    p.add_argument("--anchors", help="anchor table JSON for anchor() destinations")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="static analysis of a protocol or a circuit JSON")
    p.add_argument("target")
    p.add_argument("--dump-dag", action="store_true", help="print the forward DAG as DOT")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("render", help="per-step grid snapshots")
    p.add_argument("circuit")
    p.add_argument("--format", choices=("ascii", "svg"), default="ascii")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep", help="best result per layout as CSV")
    p.add_argument("protocol")
    p.add_argument("--layouts", required=True, help="comma-separated ROWSxCOLS list")
    p.add_argument("--moveback", choices=("init", "none"), default="init")
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("golay-pipeline", help="three-stage Golay preparation, verification and SM")
    p.add_argument("--block", type=_layout_arg, default=parse_layout("7x7"))
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_golay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ftsynth: error: {exc}", file=sys.stderr)
        return 2
    except SynthesisError as exc:
        print(f"ftsynth: synthesis failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
