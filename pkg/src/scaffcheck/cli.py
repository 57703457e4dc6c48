"""Command-line driver: lint, check, simulate, vcgen, serve.

Exit codes: 0 all checks passed, 1 at least one fail/error verdict (or lint
error), 2 usage or configuration failure. Option precedence: defaults, then
config file, then SCAFFCHECK_* environment variables, then flags.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .api import (
    ApiError, CheckRequest, LintRequest, SimulateRequest, ToleranceModel,
    VcgenRequest, run_check, run_lint, run_simulate, run_vcgen,
)

ENV_PREFIX = "SCAFFCHECK_"

CONFIG_KEYS = {
    "epsilon_eq": float,
    "epsilon_prob": float,
    "epsilon_pure": float,
    "phase": str,
    "entry": str,
    "seed": int,
    "random": int,
    "check_gates": bool,
    "format": str,
    "jobs": int,
}


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    """Read a key=value config file; unknown keys are usage errors."""
    if path is None:
        return {}
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key '{key}'")
        values[key] = _convert(key, value)
    return values


def _convert(key: str, value: str):
    typ = CONFIG_KEYS[key]
    try:
        if typ is bool:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        return typ(value)
    except ValueError:
        raise UsageError(f"bad value for '{key}': {value!r}")


def env_overrides() -> dict:
    values: dict = {}
    for key in CONFIG_KEYS:
        env_name = ENV_PREFIX + key.upper()
        if env_name in os.environ:
            values[key] = _convert(key, os.environ[env_name])
    return values


def effective(settings_chain: list[dict], key: str, default=None):
    for layer in reversed(settings_chain):
        if layer.get(key) is not None:
            return layer[key]
    return default


def parse_init(text: str | None) -> dict[str, int]:
    if not text:
        return {}
    out: dict[str, int] = {}
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "=" not in piece:
            raise UsageError(f"bad --init entry {piece!r} (expected q[i]=0|1)")
        key, _, bit = piece.partition("=")
        if bit.strip() not in ("0", "1"):
            raise UsageError(f"initial bit must be 0 or 1 in {piece!r}")
        out[key.strip()] = int(bit)
    return out


def parse_kv_floats(entries: list[str] | None, what: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for entry in entries or []:
        if "=" not in entry:
            raise UsageError(f"bad {what} {entry!r} (expected name=value)")
        name, _, value = entry.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"bad {what} value in {entry!r}")
    return out


def parse_kv_ints(entries: list[str] | None, what: str) -> dict[str, int]:
    return {k: int(v) for k, v in parse_kv_floats(entries, what).items()}


def _write_output(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _read_source(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")


# -- command implementations ------------------------------------------------------

def cmd_lint(args, settings) -> int:
    worst = 0
    blocks: list[str] = []
    payload = []
    for path in args.files:
        response = run_lint(LintRequest(source=_read_source(path), path=path))
        payload.append(response)
        for d in response.diagnostics:
            blocks.append(d.render())
        if not response.ok:
            worst = 1
    fmt = effective(settings, "format", "text")
    if fmt == "json":
        doc = json.dumps([r.model_dump() for r in payload], indent=2,
                         sort_keys=False)
        _write_output(doc + "\n", args.output)
    else:
        summary = (f"{len(args.files)} file(s): "
                   f"{sum(r.errors for r in payload)} error(s), "
                   f"{sum(r.warnings for r in payload)} warning(s)")
        text = "\n".join(blocks + [summary]) + "\n"
        _write_output(text, args.output)
    return worst


def _tolerances(settings) -> ToleranceModel:
    return ToleranceModel(
        epsilon_eq=effective(settings, "epsilon_eq", 1e-9),
        epsilon_prob=effective(settings, "epsilon_prob", 1e-9),
        epsilon_pure=effective(settings, "epsilon_pure", 1e-9),
        phase=effective(settings, "phase", "shared"),
    )


def cmd_check(args, settings) -> int:
    entry = effective(settings, "entry")
    if not entry:
        raise UsageError("check needs --entry <module>")
    state = None
    if args.state_file:
        state = _parse_state_file(args.state_file)
    request = CheckRequest(
        source=_read_source(args.file), path=args.file, entry=entry,
        init=parse_init(args.init), state=state,
        random=effective(settings, "random", None),
        seed=effective(settings, "seed"),
        params=parse_kv_floats(args.param, "--param"),
        regs=parse_kv_ints(args.reg, "--reg"),
        tolerances=_tolerances(settings),
        check_gates=bool(effective(settings, "check_gates", False)),
        jobs=effective(settings, "jobs", 1) or 1,
    )
    response = run_check(request)
    fmt = effective(settings, "format", "text")
    if fmt == "json":
        _write_output(response.model_dump_json(indent=2, by_alias=True) + "\n",
                      args.output)
    else:
        _write_output(_render_check_text(response), args.output)
    return 0 if response.ok else 1


def _parse_state_file(path: str) -> list[list[float]]:
    entries: dict[int, list[float]] = {}
    top = -1
    for lineno, line in enumerate(_read_source(path).splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise UsageError(f"{path}:{lineno}: expected 'index re im'")
        idx = int(parts[0])
        entries[idx] = [float(parts[1]), float(parts[2])]
        top = max(top, idx)
    size = 1
    while size <= top:
        size *= 2
    return [entries.get(i, [0.0, 0.0]) for i in range(size)]


def _render_check_text(response) -> str:
    lines: list[str] = []
    cfg = response.config
    lines.append(f"{response.program.path}: entry {response.program.entry}")
    lines.append(f"  config: epsilon_eq={cfg['epsilon_eq']} "
                 f"epsilon_prob={cfg['epsilon_prob']} "
                 f"epsilon_pure={cfg['epsilon_pure']} "
                 f"phase={cfg['phase_mode']} check_gates={cfg['check_gates']} "
                 f"seed={cfg['seed']}")
    by_module: dict[str, dict[str, list]] = {}
    module_order: list[str] = []
    for clause in response.clauses:
        if clause.module not in by_module:
            by_module[clause.module] = {}
            module_order.append(clause.module)
        group = by_module[clause.module]
        key = f"{clause.kind}: {clause.label}" if clause.label else clause.kind
        group.setdefault(key, []).append(clause)
    for module in module_order:
        lines.append(f"  module {module}:")
        for key, clauses in by_module[module].items():
            counts: dict[str, int] = {}
            for c in clauses:
                counts[c.verdict] = counts.get(c.verdict, 0) + 1
            breakdown = ", ".join(f"{n} {v}" for v, n in sorted(counts.items()))
            lines.append(f"    {key}: {breakdown}")
            shown = 0
            for c in clauses:
                if c.verdict in ("fail", "error") and shown < 3:
                    where = f"input {c.input_index}"
                    if c.span.line:
                        where += f", line {c.span.line}:{c.span.col}"
                    lines.append(f"      [{c.verdict}] ({where}) {c.detail}")
                    shown += 1
    s = response.summary
    lines.append(f"summary: {s.total} clause check(s): {s.passed} pass, "
                 f"{s.fail} fail, {s.vacuous} vacuous, {s.error} error")
    return "\n".join(lines) + "\n"


def cmd_simulate(args, settings) -> int:
    entry = effective(settings, "entry")
    if not entry:
        raise UsageError("simulate needs --entry <module>")
    request = SimulateRequest(
        source=_read_source(args.file), path=args.file, entry=entry,
        init=parse_init(args.init),
        params=parse_kv_floats(args.param, "--param"),
        regs=parse_kv_ints(args.reg, "--reg"),
    )
    response = run_simulate(request)
    fmt = effective(settings, "format", "text")
    if fmt == "json":
        _write_output(response.model_dump_json(indent=2) + "\n", args.output)
    else:
        _write_output(response.dump, args.output)
    return 0


def cmd_vcgen(args, settings) -> int:
    any_docs = False
    skipped_all: list[tuple[str, str]] = []
    payload = []
    out_dir = Path(args.out_dir or ".")
    for path in args.files:
        response = run_vcgen(VcgenRequest(source=_read_source(path), path=path,
                                          module=args.module))
        payload.append(response)
        for doc in response.documents:
            any_docs = True
            target = out_dir / doc.filename
            target.write_text(doc.text, encoding="utf-8")
            print(f"wrote {target}")
        skipped_all.extend((s.module, s.reason) for s in response.skipped)
    fmt = effective(settings, "format", "text")
    if fmt == "json":
        doc = json.dumps([r.model_dump() for r in payload], indent=2)
        _write_output(doc + "\n", args.output)
    else:
        for module, reason in skipped_all:
            print(f"skipped {module}: {reason}")
    if not any_docs and not skipped_all:
        print("no annotated declarations found")
    return 0


def cmd_serve(args, settings) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scaffcheck",
        description="Contract checker and VC emitter for Scaffold programs "
                    "with ScaffML annotations.")
    parser.add_argument("--version", action="version",
                        version=f"scaffcheck {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi_file=False):
        if multi_file:
            p.add_argument("files", nargs="+", help="source file(s)")
        else:
            p.add_argument("file", help="source file")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--format", choices=["text", "json"], default=None,
                       help="output format (default text)")
        p.add_argument("--output", help="write the report to a file")

    p_lint = sub.add_parser("lint", help="parse and lint source files")
    common(p_lint, multi_file=True)

    p_check = sub.add_parser("check", help="simulate and check contracts")
    common(p_check)
    p_check.add_argument("--entry", help="entry module or gate")
    p_check.add_argument("--init", help="initial bits, e.g. q[0]=1,b[0]=0")
    p_check.add_argument("--state-file",
                         help="initial statevector ('index re im' lines)")
    p_check.add_argument("--random", type=int, default=None,
                         help="number of random product-state inputs")
    p_check.add_argument("--seed", type=int, default=None,
                         help="seed for --random")
    p_check.add_argument("--param", action="append",
                         help="classical entry argument name=value")
    p_check.add_argument("--reg", action="append",
                         help="width for a symbolic-width register name=width")
    p_check.add_argument("--epsilon-eq", dest="epsilon_eq", type=float,
                         default=None)
    p_check.add_argument("--epsilon-prob", dest="epsilon_prob", type=float,
                         default=None)
    p_check.add_argument("--epsilon-pure", dest="epsilon_pure", type=float,
                         default=None)
    p_check.add_argument("--phase", choices=["shared", "exact"], default=None,
                         help="amplitude comparison phase mode")
    p_check.add_argument("--check-gates", dest="check_gates",
                         action="store_true", default=None,
                         help="also check gate contracts at call sites")
    p_check.add_argument("--jobs", type=int, default=None,
                         help="parallel input checking")

    p_sim = sub.add_parser("simulate", help="run a module and dump the state")
    common(p_sim)
    p_sim.add_argument("--entry", help="entry module or gate")
    p_sim.add_argument("--init", help="initial bits, e.g. q[0]=1")
    p_sim.add_argument("--param", action="append")
    p_sim.add_argument("--reg", action="append")

    p_vc = sub.add_parser("vcgen", help="emit SMT-LIB verification conditions")
    common(p_vc, multi_file=True)
    p_vc.add_argument("--module", help="only this declaration")
    p_vc.add_argument("--out-dir", help="directory for .vc.smt2 files")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(getattr(args, "config", None))
        env = env_overrides()
        flags = {k: v for k, v in vars(args).items()
                 if k in CONFIG_KEYS and v is not None}
        settings = [config, env, flags]
        handler = {
            "lint": cmd_lint,
            "check": cmd_check,
            "simulate": cmd_simulate,
            "vcgen": cmd_vcgen,
            "serve": cmd_serve,
        }[args.command]
        return handler(args, settings)
    except UsageError as exc:
        print(f"scaffcheck: error: {exc}", file=sys.stderr)
        return 2
    except ApiError as exc:
        # bad request: unusable source, missing entry, bad tolerances
        for line in exc.diagnostics:
            print(line, file=sys.stderr)
        print(f"scaffcheck: {exc.message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
