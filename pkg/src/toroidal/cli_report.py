"""Command-line interface.

Four subcommands over the same configuration surface:

* ``verify`` — run the relation suite and print a report (text or JSON);
* ``ope``    — bracket two quadratic field expressions and print the result;
* ``table``  — dump the lattice data and generator fields of a configuration;
* ``states`` — enumerate basis states up to an energy bound.

Flags may also be supplied through ``--config FILE`` holding ``key=value``
lines (``#`` starts a comment); explicit command-line flags win.  Exit code
0 means every check passed, 1 means some relation failed, and 2 signals a
configuration or expression error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from .fock_space import dump_state, enumerate_states, state_e2
from .root_data import ConfigError, build_lattice
from .toroidal_rep import build_generators, strip_generators, verify
from .wick_engine import (
    ExprError,
    bracket,
    format_field,
    is_null,
    mod_null,
    parse_field,
)

_ENERGY_FLAG = "-E"
_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    typ: str
    rank: int
    mode: str
    K: int
    e2max: int
    output: str
    seed: int
    out: str | None
    threads: int | None
    sweep: bool
    exprs: tuple[str, str] | None = None


def _parse_energy(text: str) -> int:
    """Half-integer energy bound ("7/2", "3.5", "2") -> twice the energy."""
    try:
        value = Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"energy bound must be a half-integer, got {text!r}")
    doubled = 2 * value
    if doubled.denominator != 1 or doubled < 0:
        raise ConfigError(f"energy bound must be a nonnegative half-integer, got {text!r}")
    return int(doubled)


def _parse_bool(text: str, key: str) -> bool:
    word = str(text).strip().lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise ConfigError(f"{key} must be a boolean, got {text!r}")


def _parse_int(text, key: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}")


def read_config_file(path: str) -> dict:
    """key=value option file; '#' comments and blank lines are skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    opts = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        opts[key.strip()] = value.strip()
    return opts


_CONFIG_KEYS = {"type", "rank", "mode", "K", "E", "output", "seed", "out",
                "threads", "sweep"}


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset options from the config file; explicit flags keep priority."""
    if not getattr(args, "config", None):
        return
    opts = read_config_file(args.config)
    unknown = set(opts) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, value in opts.items():
        dest = "type_" if key == "type" else key
        # options a subcommand does not define (e.g. "sweep" outside verify)
        # still land on the namespace; the config builder ignores the extras
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toroidal",
        description="exact checks for two-variable current algebras over "
                    "a fermionic Fock space",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, energy_default=None):
        p.add_argument("--type", dest="type_", choices=("A", "B", "C", "D"),
                       help="lattice type")
        p.add_argument("--rank", type=int, help="lattice rank")
        p.add_argument("--mode", choices=("strict", "full"),
                       help="strict quotients the null pair away first (default full)")
        p.add_argument("--config", help="key=value option file")
        p.add_argument("--output", choices=("text", "json"),
                       help="report format (default text)")
        p.add_argument("--out", help="write the report to this file")
        p.add_argument(_ENERGY_FLAG, dest="E", metavar="ENERGY",
                       help=f"energy bound as a half-integer "
                            f"(default {energy_default or '7/2'})")

    p_verify = sub.add_parser("verify", help="run the relation suite")
    common(p_verify)
    p_verify.add_argument("-K", type=int, help="mode window bound (default 3)")
    p_verify.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p_verify.add_argument("--threads", type=int,
                          help="worker threads (default TOROIDAL_THREADS or 1)")
    p_verify.add_argument("--no-sweep", action="store_true",
                          help="skip the exhaustive mode-pair sweep")

    p_ope = sub.add_parser("ope", help="bracket two field expressions")
    common(p_ope)
    p_ope.add_argument("left", help="first field expression")
    p_ope.add_argument("right", help="second field expression")

    p_table = sub.add_parser("table", help="dump lattice data and generators")
    common(p_table)

    p_states = sub.add_parser("states", help="enumerate basis states")
    common(p_states, energy_default="7/2")

    return parser


def _to_config(args: argparse.Namespace) -> CliConfig:
    _apply_config_file(args)
    if args.type_ is None:
        raise ConfigError("missing lattice type (--type or config file)")
    if args.rank is None:
        raise ConfigError("missing lattice rank (--rank or config file)")
    mode = args.mode or "full"
    if mode not in ("strict", "full"):
        raise ConfigError(f"unknown mode {mode!r}")
    output = args.output or "text"
    if output not in ("text", "json"):
        raise ConfigError(f"unknown output format {output!r}")

    K = getattr(args, "K", None)
    K = 3 if K is None else _parse_int(K, "K")
    if K < 1:
        raise ConfigError(f"K must be a positive integer, got {K}")
    e2max = _parse_energy(args.E) if args.E is not None else 7

    seed = getattr(args, "seed", None)
    seed = 0 if seed is None else _parse_int(seed, "seed")
    threads = getattr(args, "threads", None)
    if threads is not None:
        threads = _parse_int(threads, "threads")

    sweep = True
    if getattr(args, "no_sweep", False):
        sweep = False
    elif getattr(args, "sweep", None) is not None:
        sweep = _parse_bool(args.sweep, "sweep")

    exprs = None
    if args.subcommand == "ope":
        exprs = (args.left, args.right)

    return CliConfig(
        subcommand=args.subcommand,
        typ=args.type_,
        rank=_parse_int(args.rank, "rank"),
        mode=mode,
        K=K,
        e2max=e2max,
        output=output,
        seed=seed,
        out=args.out,
        threads=threads,
        sweep=sweep,
        exprs=exprs,
    )


def _emit(cfg: CliConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
        print(f"wrote {cfg.out}", file=sys.stderr)
    else:
        print(text)


def _format_params(params: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in params.items())


def _render_report_text(report: dict) -> str:
    header = report["header"]
    lines = [
        f"type {header['type']} rank {header['rank']} mode {header['mode']} "
        f"K={header['K']} E={header['E']} engine {header['engine']}",
        "cartan: " + "; ".join(" ".join(f"{a:3d}" for a in row)
                               for row in header["cartan"]),
        "d:      " + " ".join(header["d"]),
        "marks:  " + " ".join(str(m) for m in header["marks"]),
    ]
    for note in header["notes"]:
        lines.append(f"note: {note}")
    for e in report["entries"]:
        line = f"{e['id']}[{_format_params(e['params'])}] {e['status']}"
        if e["status"] == "pass_mod_null":
            line += f" residue {e['residue']}"
        elif e["status"] == "fail":
            line += f" :: {e['residue']}"
        lines.append(line)
    s = report["summary"]
    lines.append(f"summary: pass={s['pass']} pass_mod_null={s['pass_mod_null']} "
                 f"fail={s['fail']} total={s['total']} ok={s['ok']}")
    return "\n".join(lines)


def run_verify(cfg: CliConfig) -> int:
    report = verify(cfg.typ, cfg.rank, mode=cfg.mode, K=cfg.K,
                    e2max=cfg.e2max, sweep=cfg.sweep, seed=cfg.seed,
                    threads=cfg.threads)
    if cfg.output == "json":
        _emit(cfg, json.dumps(report, indent=2))
    else:
        _emit(cfg, _render_report_text(report))
    return 0 if report["summary"]["ok"] else 1


def run_ope(cfg: CliConfig) -> int:
    ctx = build_lattice(cfg.typ, cfg.rank)
    left = parse_field(ctx, cfg.exprs[0])
    right = parse_field(ctx, cfg.exprs[1])
    if cfg.mode == "strict":
        left, right = mod_null(left), mod_null(right)
    res = bracket(left, right)
    null_flag = (cfg.mode == "full" and not res.delta_part.is_zero()
                 and is_null(res.delta_part))
    if cfg.output == "json":
        payload = {
            "left": cfg.exprs[0],
            "right": cfg.exprs[1],
            "mode": cfg.mode,
            "delta": str(res.delta_part),
            "d_delta": str(res.ddelta_part),
            "null": null_flag,
        }
        _emit(cfg, json.dumps(payload, indent=2))
    else:
        lines = [f"delta = {res.delta_part}", f"d_delta = {res.ddelta_part}"]
        if null_flag:
            lines.append("[NULL] delta lies in the null ideal")
        _emit(cfg, "\n".join(lines))
    return 0


def run_table(cfg: CliConfig) -> int:
    ctx = build_lattice(cfg.typ, cfg.rank)
    gens = build_generators(ctx)
    if cfg.mode == "strict":
        gens = strip_generators(gens)
    simple = [str(a) for a in ctx.simple]
    generators = {name: format_field(f) for name, f in gens.all_fields()}
    if cfg.output == "json":
        payload = {
            "type": ctx.typ,
            "rank": ctx.n,
            "mode": cfg.mode,
            "cartan": [list(row) for row in ctx.cartan],
            "d": [str(d) for d in ctx.dvec],
            "marks": list(ctx.marks),
            "simple": simple,
            "generators": generators,
        }
        _emit(cfg, json.dumps(payload, indent=2))
        return 0
    lines = [f"type {ctx.typ} rank {ctx.n} ({ctx.num_nodes} nodes)"]
    lines.append("cartan:")
    for row in ctx.cartan:
        lines.append("  " + " ".join(f"{a:3d}" for a in row))
    lines.append("d:     " + " ".join(str(d) for d in ctx.dvec))
    lines.append("marks: " + " ".join(str(m) for m in ctx.marks))
    for i, a in enumerate(simple):
        lines.append(f"alpha({i}) = {a}")
    for name, text in generators.items():
        lines.append(f"{name} = {text}")
    _emit(cfg, "\n".join(lines))
    return 0


def run_states(cfg: CliConfig) -> int:
    ctx = build_lattice(cfg.typ, cfg.rank)
    include_null = cfg.mode != "strict"
    states = enumerate_states(ctx, cfg.e2max, include_null=include_null)
    by_energy: dict[int, int] = {}
    for st in states:
        by_energy[state_e2(st)] = by_energy.get(state_e2(st), 0) + 1

    def energy_name(e2: int) -> str:
        return str(e2 // 2) if e2 % 2 == 0 else f"{e2}/2"

    if cfg.output == "json":
        payload = {
            "type": ctx.typ,
            "rank": ctx.n,
            "mode": cfg.mode,
            "E": energy_name(cfg.e2max),
            "by_energy": {energy_name(e2): n
                          for e2, n in sorted(by_energy.items())},
            "total": len(states),
            "states": [dump_state(st) for st in states],
        }
        _emit(cfg, json.dumps(payload, indent=2))
        return 0
    lines = [dump_state(st) for st in states]
    for e2, n in sorted(by_energy.items()):
        lines.append(f"energy {energy_name(e2)}: {n} states")
    lines.append(f"total: {len(states)}")
    _emit(cfg, "\n".join(lines))
    return 0


_DISPATCH = {
    "verify": run_verify,
    "ope": run_ope,
    "table": run_table,
    "states": run_states,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _to_config(args)
        return _DISPATCH[cfg.subcommand](cfg)
    except (ConfigError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
