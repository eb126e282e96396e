"""Command-line driver: parse, validate, analyze, emit and verify.

Exit codes: 0 when every check passes, 1 when a finding needs attention
(violated or inconclusive query, uncovered root attack), 2 for usage, input,
parse or validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import BUNDLED_MODELS, __version__, bundled_path
from .diagnostics import Diagnostic, has_errors
from .dsl import DslError, load_model
from .dyverifier import SATISFIED, Bounds, verify
from .model import Model
from .partition import PartitionError, estimate
from .piexport import AbstractionError, EmitError, abstract_design, emit_proverif, run_proverif
from .threats import AttackGraph, ThreatError, coverage, enumerate_traces
from .validate import trace_requirements, validate

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2
COMMANDS = ("check", "attacks", "verify", "emit-pv", "estimate", "report")
BUNDLED_PREFIX = "bundled:"


@dataclass
class RunConfig:
    command: str
    inputs: list[str]
    sessions: int | None = None
    steps: int | None = None
    depth: int | None = None
    max_states: int | None = None
    injective: bool = False
    json: bool = False
    output: str | None = None
    external_proverif: str | None = None
    max_traces: int = 10


class UsageError(Exception):
    pass


@dataclass
class Outcome:
    code: int = EXIT_OK
    payload: dict = field(default_factory=dict)
    text: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def worsen(self, code: int) -> None:
        self.code = max(self.code, code)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="secmodel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"secmodel {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp):
        sp.add_argument(
            "inputs", nargs="+", metavar="FILE", help=".ssec model files merged in order, or bundled:NAME"
        )
        sp.add_argument("--json", action="store_true", help="machine-readable output on stdout")
        sp.add_argument("-o", "--output", metavar="PATH", help="also write the result to PATH")

    def bounds(sp):
        sp.add_argument("--sessions", type=int, help="protocol sessions (default 2)")
        sp.add_argument("--steps", type=int, help="transitions per block instance (default 40)")
        sp.add_argument("--depth", type=int, help="attacker term depth (default 6)")
        sp.add_argument("--max-states", type=int, help="state budget before giving up")
        sp.add_argument("--injective", action="store_true", help="replay-sensitive authenticity")
        sp.add_argument("--external-proverif", metavar="PATH", help="also run this ProVerif binary")

    common(sub.add_parser("check", help="parse and validate"))
    sp = sub.add_parser("attacks", help="attack coverage and traces")
    common(sp)
    sp.add_argument("--max-traces", type=int, default=10, help="traces listed per root")
    sp = sub.add_parser("verify", help="bounded Dolev-Yao verification")
    common(sp)
    bounds(sp)
    sp = sub.add_parser("emit-pv", help="write a ProVerif specification")
    common(sp)
    sp.add_argument("--injective", action="store_true", help="injective correspondence queries")
    common(sub.add_parser("estimate", help="bus load, CPU utilization and latency"))
    sp = sub.add_parser("report", help="run everything and write one report (default <model>.report.json)")
    common(sp)
    bounds(sp)
    sp.add_argument("--max-traces", type=int, default=10, help="traces listed per root")
    return p


def parse_args(argv: list[str]) -> RunConfig:
    ns = _parser().parse_args(argv)
    cfg = RunConfig(command=ns.command, inputs=list(ns.inputs), json=ns.json, output=ns.output)
    for k in ("sessions", "steps", "depth", "max_states", "external_proverif", "max_traces"):
        if getattr(ns, k, None) is not None:
            setattr(cfg, k, getattr(ns, k))
    cfg.injective = bool(getattr(ns, "injective", False))
    if cfg.command == "emit-pv" and cfg.json and cfg.output == "-":
        raise UsageError("--json and '-o -' both claim stdout")
    if cfg.max_traces < 1:
        raise UsageError("--max-traces must be positive")
    return cfg


def resolve_input(arg: str) -> str:
    """File path for ``arg``; ``bundled:NAME`` names a model shipped with the package."""
    if not arg.startswith(BUNDLED_PREFIX):
        return arg
    name = arg[len(BUNDLED_PREFIX) :]
    if name not in BUNDLED_MODELS and f"{name}.ssec" in BUNDLED_MODELS:
        name += ".ssec"
    if name not in BUNDLED_MODELS:
        raise UsageError(f"unknown bundled model '{name}' (available: {', '.join(BUNDLED_MODELS)})")
    return str(bundled_path(name))


def _stem(cfg: RunConfig) -> str:
    return Path(cfg.inputs[0].removeprefix(BUNDLED_PREFIX)).stem


def _bounds(cfg: RunConfig) -> Bounds:
    try:
        return Bounds.from_env(sessions=cfg.sessions, steps=cfg.steps, depth=cfg.depth, max_states=cfg.max_states)
    except ValueError as exc:
        raise UsageError(f"invalid bounds: {exc}") from None


# --- phases -----------------------------------------------------------------


def _load(cfg: RunConfig, out: Outcome) -> Model | None:
    try:
        model = load_model([resolve_input(a) for a in cfg.inputs])
    except DslError as exc:
        out.diagnostics.extend(exc.diagnostics)
        out.worsen(EXIT_ERROR)
        return None
    diags = validate(model)
    out.diagnostics.extend(diags)
    if has_errors(diags):
        out.worsen(EXIT_ERROR)
        return None
    return model


def _check(model: Model, out: Outcome) -> None:
    try:
        design = abstract_design(model)
    except AbstractionError as exc:
        out.diagnostics.extend(exc.diagnostics)
        out.worsen(EXIT_ERROR)
        return
    tr = trace_requirements(model)
    out.payload["traceability"] = tr.to_json()
    out.payload["abstraction_notes"] = list(design.notes)
    out.text.append(f"model OK: {len(model.decls)} declarations")
    for rid in tr.untraced_requirements:
        out.text.append(f"  untraced security requirement: {rid}")
    for label in tr.untraced_properties:
        out.text.append(f"  property without requirement: {label}")


def _attacks(model: Model, out: Outcome, max_traces: int) -> None:
    rep = coverage(model)
    graph = AttackGraph.from_model(model)
    data = rep.to_json()
    for entry in data["roots"]:
        try:
            traces = enumerate_traces(graph, entry["root"], max_traces)
        except ThreatError as exc:
            traces = []
            entry["error"] = str(exc)
        entry["traces"] = [list(t.leaves) for t in traces]
    out.payload["attacks"] = data
    out.text.append(
        f"attack coverage: {len(rep.covered)} of {len(rep.roots)} root attack(s) linked to requirements"
    )
    for entry in data["roots"]:
        status = "covered" if entry["covered"] else "UNCOVERED"
        out.text.append(f"  {entry['root']}: {status}")
        for t in entry["traces"]:
            out.text.append("    trace: " + " -> ".join(t))
    if not rep.ok:
        out.worsen(EXIT_FINDINGS)


def _verify(model: Model, cfg: RunConfig, out: Outcome) -> None:
    bounds = _bounds(cfg)
    try:
        verdicts = verify(model, bounds, injective=cfg.injective)
    except AbstractionError as exc:
        out.diagnostics.extend(exc.diagnostics)
        out.worsen(EXIT_ERROR)
        return
    out.payload["verification"] = {"bounds": bounds.to_json(), "verdicts": [v.to_json() for v in verdicts]}
    out.text.append(f"verification ({len(verdicts)} quer{'y' if len(verdicts) == 1 else 'ies'}, sessions={bounds.sessions}, depth={bounds.depth}):")
    for v in verdicts:
        out.text.append(f"  {v.query}: {v.status}")
        for w in v.witness or []:
            out.text.append(f"    {w}")
        for n in v.notes:
            out.text.append(f"    note: {n}")
        if v.status != SATISFIED:
            out.worsen(EXIT_FINDINGS)
    if cfg.external_proverif:
        _external(model, cfg, out)


def _external(model: Model, cfg: RunConfig, out: Outcome) -> None:
    try:
        res = run_proverif(cfg.external_proverif, emit_proverif(model=model, injective=cfg.injective))
    except (OSError, EmitError) as exc:
        out.payload["proverif"] = {"binary": cfg.external_proverif, "error": str(exc)}
        out.text.append(f"external ProVerif not run: {exc}")
        return
    out.payload["proverif"] = res.to_json()
    out.text.append(f"external ProVerif ({res.binary}):")
    for q, r in res.results:
        out.text.append(f"  {q}: {r}")


def _estimate(model: Model, out: Outcome) -> None:
    try:
        rep = estimate(model)
    except PartitionError as exc:
        out.text.append(f"partitioning estimate failed: {exc}")
        out.worsen(EXIT_ERROR)
        return
    out.diagnostics.extend(rep.diagnostics)
    out.payload["partitioning"] = rep.to_json()
    if not (rep.bus_loads or rep.utilizations or rep.latencies):
        out.text.append("partitioning: no mapping declared")
        return
    out.text.append(f"partitioning ({rep.assumption}):")
    for k, v in rep.bus_loads.items():
        out.text.append(f"  bus {k}: load {v:.6g}")
    for k, v in rep.utilizations.items():
        out.text.append(f"  node {k}: utilization {v:.6g}")
    for k, v in rep.latencies.items():
        out.text.append(f"  channel {k}: latency {v:.6g} s")


def _emit(model: Model, cfg: RunConfig, out: Outcome) -> None:
    try:
        text = emit_proverif(model=model, injective=cfg.injective)
    except (AbstractionError, EmitError) as exc:
        out.diagnostics.extend(getattr(exc, "diagnostics", []))
        if not getattr(exc, "diagnostics", None):
            out.text.append(str(exc))
        out.worsen(EXIT_ERROR)
        return
    target = cfg.output or f"{_stem(cfg)}.pv"
    if target == "-":
        out.payload["pv_text"] = text
        out.text.append(text.rstrip("\n"))
        return
    Path(target).write_text(text, encoding="utf-8")
    out.payload["output"] = target
    out.text.append(f"wrote {target}")


def execute(cfg: RunConfig) -> Outcome:
    out = Outcome()
    out.payload.update(schema_version=SCHEMA_VERSION, command=cfg.command, inputs=list(cfg.inputs))
    if cfg.command in ("verify", "report"):
        _bounds(cfg)  # fail fast on bad bounds before any work
    model = _load(cfg, out)
    if model is not None:
        if cfg.command in ("check", "report"):
            _check(model, out)
        if cfg.command in ("attacks", "report") and out.code < EXIT_ERROR:
            _attacks(model, out, cfg.max_traces)
        if cfg.command in ("estimate", "report") and out.code < EXIT_ERROR:
            _estimate(model, out)
        if cfg.command in ("verify", "report") and out.code < EXIT_ERROR:
            _verify(model, cfg, out)
        if cfg.command == "emit-pv":
            _emit(model, cfg, out)
    out.payload["diagnostics"] = [d.to_json() for d in out.diagnostics]
    out.payload["exit_code"] = out.code
    return out


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse_args(argv)
        out = execute(cfg)
    except UsageError as exc:
        print(f"secmodel: error: {exc}", file=stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # argparse: --help, --version, bad usage
        return int(exc.code or 0)
    for d in out.diagnostics:
        print(d, file=stderr)
    if cfg.json:
        print(json.dumps(out.payload, indent=2, sort_keys=True), file=stdout)
    else:
        for line in out.text:
            print(line, file=stdout)
    report_path = cfg.output
    if cfg.command == "report" and not report_path:
        report_path = f"{_stem(cfg)}.report.json"
    if report_path and report_path != "-" and cfg.command != "emit-pv":
        Path(report_path).write_text(json.dumps(out.payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out.code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
