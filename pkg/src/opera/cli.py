"""Command-line entry point: ``opera {gen,analyze,simulate,faults,cost}``.

Every command reads one JSON config (``--config``), lets ``--seed`` override
its seed, writes its outputs under ``--out`` and records a ``manifest.json``
holding the resolved config, its SHA-256, the seed and the tool version.
Passing a manifest back as ``--config`` reproduces the directory.

Exit codes: 0 success, 1 runtime failure, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analysis import (
    FailureSet,
    direct_coverage,
    failure_sweep,
    generate_expanding_opera,
    inject_and_measure,
    metrics_to_csv,
    ruleset_size,
    schedule_metrics,
)
from .costmodel import alpha_from_parts, clos_sizing, parts_from_csv, parts_to_csv, DEFAULT_PART_COSTS
from .errors import OperaError
from .schedule import TimingParams, build_schedule, compute_epsilon, guard_band_loss, schedule_to_csv
from .simulate import SimParams, run
from .topology import (
    build_baseline,
    build_opera,
    eight_rack_topology,
    load_topology,
    opera_racks_for_radix,
    save_topology,
    validate_topology,
)
from .workload import (
    WorkloadSpec,
    builtin_cdf,
    gen_pattern,
    gen_poisson,
    gen_shuffle,
    load_cdf,
    trace_from_csv,
    trace_to_csv,
)

log = logging.getLogger("opera")

COMMANDS = ("gen", "analyze", "simulate", "faults", "cost")
STOCHASTIC = {"gen", "simulate", "faults"}


class ConfigError(Exception):
    """Raised for malformed or inconsistent configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

_NUM = (int, float)
_OPT_INT = (int, type(None))


def _field_types(cls) -> dict[str, Any]:
    """Accepted JSON types per dataclass field (annotations are strings here)."""
    table = {"int": int, "float": _NUM, "bool": bool, "float | None": (int, float, type(None))}
    return {f.name: table[f.type] for f in fields(cls)}


SCHEMA: dict[str, Any] = {
    "command": str,
    "seed": int,
    "network": str,
    "topology_file": str,
    "topology": {
        "k": int,
        "num_racks": int,
        "eight_rack": bool,
        "group_size": int,
        "max_diameter": _OPT_INT,
        "attempts": int,
    },
    "timing": _field_types(TimingParams),
    "workload": {
        "pattern": str,
        "load": _NUM,
        "duration": (int, float, type(None)),
        "num_flows": _OPT_INT,
        "flow_size": int,
        "cdf": str,
        "cdf_file": str,
        "trace_file": str,
        "tagging": str,
        "skew": _NUM,
        "stagger": _NUM,
        "bulk_threshold": int,
    },
    "baseline": {"alpha": _NUM, "k": int},
    "sim": _field_types(SimParams),
    "faults": {
        "kind": str,
        "counts": list,
        "fractions": list,
        "seeds": int,
        "paths": bool,
        "exhaustive_limit": int,
    },
    "cost": {"k": int, "alpha": _NUM, "parts_file": str, "T": int, "F": _NUM},
}

DEFAULTS: dict[str, Any] = {
    "topology": {"k": 12, "eight_rack": False, "group_size": 1, "max_diameter": None, "attempts": 3},
    "workload": {"pattern": "poisson_cdf", "load": 0.1, "cdf": "websearch", "tagging": "by_size",
                 "skew": 0.2, "stagger": 0.0, "flow_size": 1_000_000},
    "baseline": {"alpha": 1.3},
    "faults": {"kind": "switch", "seeds": 10, "paths": False, "exhaustive_limit": 64},
    "cost": {"k": 12, "alpha": 4 / 3, "T": 3},
}


def _check(section: str, value: Any, spec: Any) -> None:
    if isinstance(spec, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{section}: expected an object")
        for key, v in value.items():
            if key not in spec:
                raise ConfigError(f"{section}.{key}: unknown field" if section else f"{key}: unknown field")
            _check(f"{section}.{key}" if section else key, v, spec[key])
        return
    types = spec if isinstance(spec, tuple) else (spec,)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{section}: expected {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{section}: expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "config_sha256" in doc and "config" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check("", doc, SCHEMA)
    return doc


def resolve(cfg: dict, command: str, seed: int | None) -> dict:
    if "command" in cfg and cfg["command"] != command:
        raise ConfigError(f"command: config is for {cfg['command']!r}, not {command!r}")
    out = json.loads(json.dumps(cfg))
    out["command"] = command
    for section, dflt in DEFAULTS.items():
        merged = dict(dflt)
        merged.update(out.get(section, {}))
        out[section] = merged
    if seed is not None:
        out["seed"] = seed
    if command in STOCHASTIC and "seed" not in out:
        raise ConfigError("seed: required for this command (use --seed or the config's seed field)")
    for ref in ("topology_file",):
        if ref in out and not Path(out[ref]).exists():
            raise ConfigError(f"{ref}: {out[ref]} does not exist")
    for section, ref in (("workload", "cdf_file"), ("workload", "trace_file"), ("cost", "parts_file")):
        if ref in out[section] and not Path(out[section][ref]).exists():
            raise ConfigError(f"{section}.{ref}: {out[section][ref]} does not exist")
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _write(out: Path, name: str, text: str, written: list[str]) -> None:
    (out / name).write_text(text)
    written.append(name)


def _manifest(out: Path, cfg: dict, written: list[str]) -> None:
    doc = {
        "tool": "opera",
        "version": __version__,
        "command": cfg["command"],
        "seed": cfg.get("seed"),
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "outputs": sorted(written),
    }
    (out / "manifest.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------------------
# Builders shared by several commands
# ---------------------------------------------------------------------------


def _timing(cfg: dict) -> TimingParams:
    try:
        return TimingParams(**cfg.get("timing", {}))
    except OperaError as exc:
        raise ConfigError(f"timing: {exc}") from exc


def _topology(cfg: dict):
    if "topology_file" in cfg:
        return load_topology(cfg["topology_file"])
    tc = cfg["topology"]
    if tc["eight_rack"]:
        return eight_rack_topology()
    k = tc["k"]
    n = tc.get("num_racks", opera_racks_for_radix(k) if k % 2 == 0 else 0)
    if "seed" not in cfg:
        raise ConfigError("seed: required to generate a topology")
    if tc["max_diameter"] is not None or tc["attempts"] != 3:
        t, used = generate_expanding_opera(k, n, cfg["seed"], max_diameter=tc["max_diameter"],
                                           attempts=tc["attempts"], timing=_timing(cfg),
                                           group_size=tc["group_size"])
        if used != cfg["seed"]:
            log.warning("seed %d gave a poorly expanding realization; used seed %d", cfg["seed"], used)
        return t
    return build_opera(k, n, cfg["seed"])


def _schedule(cfg: dict, t):
    return build_schedule(t, _timing(cfg), group_size=cfg["topology"]["group_size"])


def _trace(cfg: dict, hosts: int, racks: int):
    w = cfg["workload"]
    seed = cfg["seed"]
    if "trace_file" in w:
        return trace_from_csv(Path(w["trace_file"]).read_text())
    pattern = w["pattern"]
    if pattern == "empty":
        return []
    if pattern == "shuffle":
        return gen_shuffle(w["flow_size"], hosts, w["stagger"], seed)
    if pattern == "poisson_cdf":
        dist = load_cdf(w["cdf_file"]) if "cdf_file" in w else builtin_cdf(w["cdf"])
        kw = {k: w[k] for k in ("load", "duration", "num_flows", "tagging", "bulk_threshold") if k in w}
        return gen_poisson(WorkloadSpec(seed=seed, **kw), dist, hosts)
    if pattern in ("hotrack", "skew", "permutation", "uniform"):
        tag = {"all_bulk": "bulk", "all_low_latency": "low_latency"}.get(w["tagging"], "bulk")
        return gen_pattern(pattern, w["load"], hosts, racks, seed, skew=w["skew"], flow_size=w["flow_size"],
                           duration=w.get("duration"), tag=tag)
    raise ConfigError(f"workload.pattern: unknown pattern {pattern!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen(cfg: dict, out: Path) -> int:
    t = _topology(cfg)
    sched = _schedule(cfg, t)
    report = validate_topology(t)
    written: list[str] = []
    save_topology(t, out / "topology.json")
    written.append("topology.json")
    _write(out, "schedule.csv", schedule_to_csv(sched), written)
    _write(out, "validation.txt", report.summary() + "\n", written)
    _manifest(out, cfg, written)
    print(report.summary())
    print(f"racks={t.N} switches={len(t.switches)} slices={sched.num_slices} "
          f"slice_duration_s={sched.slice_duration:.6g} cycle_time_s={sched.cycle_time:.6g}")
    return 0 if report.ok else 1


def cmd_analyze(cfg: dict, out: Path) -> int:
    t = _topology(cfg)
    p = _timing(cfg)
    sched = _schedule(cfg, t)
    rows = schedule_metrics(sched)
    cov = direct_coverage(sched)
    ll_loss, bulk_loss = guard_band_loss(p, sched)
    summary = {
        "racks": t.N,
        "uplinks": t.u,
        "slices": sched.num_slices,
        "all_slices_connected": all(r.connected for r in rows),
        "max_diameter": max(r.diameter for r in rows),
        "mean_avg_path_length": sum(r.avg_path_length for r in rows) / len(rows),
        "min_spectral_gap": min(r.spectral_gap for r in rows),
        "direct_pairs": len(cov),
        "epsilon": compute_epsilon(p).terms(),
        "slice_duration_s": sched.slice_duration,
        "cycle_time_s": sched.cycle_time,
        "duty_cycle": sched.duty_cycle,
        "guard_band_loss": {"low_latency": ll_loss, "bulk": bulk_loss},
        "ruleset_entries": ruleset_size(t.N, t.u),
    }
    written: list[str] = []
    _write(out, "slice_metrics.csv", metrics_to_csv(rows), written)
    _write(out, "analysis.json", _dump(summary), written)
    _manifest(out, cfg, written)
    print(f"slices={sched.num_slices} connected={summary['all_slices_connected']} "
          f"max_diameter={summary['max_diameter']} duty_cycle={sched.duty_cycle:.4f}")
    return 0


def _network(cfg: dict, t_or_none=None):
    kind = cfg.get("network", "opera")
    if kind == "opera":
        t = t_or_none or _topology(cfg)
        return t, _schedule(cfg, t), t.num_hosts, t.N
    if kind in ("expander", "clos"):
        b = cfg["baseline"]
        k = b.get("k", cfg["topology"]["k"])
        if kind == "expander":
            hosts = opera_racks_for_radix(k) * (k // 2)
            net = build_baseline("static_expander", k, b["alpha"], hosts=hosts, seed=cfg["seed"])
        else:
            net = build_baseline("folded_clos", k, b["alpha"])
        return net, None, net.num_hosts, net.num_tors
    raise ConfigError(f"network: unknown network {kind!r} (opera, expander, clos)")


def cmd_simulate(cfg: dict, out: Path) -> int:
    net, sched, hosts, racks = _network(cfg)
    trace = _trace(cfg, hosts, racks)
    try:
        params = SimParams(**cfg.get("sim", {}))
    except OperaError as exc:
        raise ConfigError(f"sim: {exc}") from exc
    rep = run(net, sched, None, trace, params, cfg["seed"])
    written: list[str] = []
    _write(out, "trace.csv", trace_to_csv(trace), written)
    _write(out, "flows.csv", rep.flows_csv(), written)
    _write(out, "timeseries.csv", rep.timeseries_csv(), written)
    _write(out, "summary.json", rep.to_json(), written)
    _manifest(out, cfg, written)
    s = rep.summary()
    print(f"flows={s['flows']} completed={s['completed']} tax={s['tax']:.4f} events={rep.counters['events']}")
    return 0


def cmd_faults(cfg: dict, out: Path) -> int:
    t = _topology(cfg)
    sched = _schedule(cfg, t)
    fc = cfg["faults"]
    kind = fc["kind"]
    total = {"link": t.N * t.u, "tor": t.N, "switch": t.u}.get(kind)
    if total is None:
        raise ConfigError(f"faults.kind: unknown kind {kind!r} (link, tor, switch)")
    lines = ["kind,failed,trials,mean_worst_slice_loss,max_worst_slice_loss,mean_integrated_loss,max_integrated_loss"]
    if "counts" in fc:
        counts = fc["counts"]
        if not all(isinstance(c, int) and 0 <= c <= total for c in counts):
            raise ConfigError(f"faults.counts: entries must be integers in [0, {total}]")
        rng = np.random.default_rng(cfg["seed"])
        elems = {"link": [(r, sw.id) for r in range(t.N) for sw in t.switches],
                 "tor": list(range(t.N)), "switch": [sw.id for sw in t.switches]}[kind]
        for c in counts:
            if math.comb(total, c) <= fc["exhaustive_limit"]:
                combos = [frozenset(x) for x in itertools.combinations(elems, c)]
            else:
                combos = [frozenset(elems[i] for i in rng.choice(total, c, replace=False)) for _ in range(fc["seeds"])]
            reports = []
            for chosen in combos:
                f = {"link": FailureSet(failed_links=chosen), "tor": FailureSet(failed_tors=chosen),
                     "switch": FailureSet(failed_switches=chosen)}[kind]
                reports.append(inject_and_measure(sched, f, paths=fc["paths"]))
            w = [r.worst_slice_loss for r in reports]
            g = [r.integrated_loss for r in reports]
            lines.append(f"{kind},{c},{len(reports)},{np.mean(w):.6f},{max(w):.6f},{np.mean(g):.6f},{max(g):.6f}")
    else:
        fractions = fc.get("fractions", [i / 100 for i in range(0, 21)])
        if not all(isinstance(x, (int, float)) and 0 <= x <= 1 for x in fractions):
            raise ConfigError("faults.fractions: entries must be numbers in [0, 1]")
        seeds = list(range(cfg["seed"], cfg["seed"] + fc["seeds"]))
        for p in failure_sweep(sched, kind, fractions, seeds, paths=fc["paths"]):
            lines.append(f"{kind},{p.failed},{len(seeds)},{p.mean_worst_slice_loss:.6f},{p.max_worst_slice_loss:.6f},"
                         f"{p.mean_integrated_loss:.6f},{p.max_integrated_loss:.6f}")
    written: list[str] = []
    _write(out, "faults.csv", "\n".join(lines) + "\n", written)
    _manifest(out, cfg, written)
    print("\n".join(lines))
    return 0


def cmd_cost(cfg: dict, out: Path) -> int:
    cc = cfg["cost"]
    parts = parts_from_csv(cc["parts_file"]) if "parts_file" in cc else dict(DEFAULT_PART_COSTS)
    alpha_parts = alpha_from_parts(parts)
    sizing = clos_sizing(cc["k"], cc["alpha"])
    doc = {
        "alpha_from_parts": alpha_parts,
        "alpha_from_parts_rounded": round(alpha_parts, 1),
        "k": cc["k"],
        "alpha": cc["alpha"],
        "F_exact": sizing.F_exact,
        "hosts_exact": sizing.hosts_exact,
        "F": sizing.F,
        "hosts": sizing.hosts,
        "integral": sizing.integral,
    }
    written: list[str] = []
    _write(out, "parts.csv", parts_to_csv(parts), written)
    _write(out, "cost.json", _dump(doc), written)
    _manifest(out, cfg, written)
    print(f"alpha_from_parts={alpha_parts:.3f} F={sizing.F} hosts={sizing.hosts}")
    return 0


HANDLERS = {"gen": cmd_gen, "analyze": cmd_analyze, "simulate": cmd_simulate, "faults": cmd_faults, "cost": cmd_cost}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opera", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"opera {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config or a manifest.json from an earlier run")
        sp.add_argument("--seed", type=int, help="overrides the config's seed")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(load_config(args.config), args.command, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OperaError, ValueError, OSError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
