"""Command-line runner: configure a net or scenario, run, emit a report.

Configuration is a JSON file; a handful of flags override its fields.
Reports are deterministic functions of (config, seed): canonical JSON with
sorted keys, no timestamps, no wall-clock data (timings go to stderr).
Complex matrices serialize as row-major [re, im] pairs.

Exit codes: 0 success, 1 configuration problems, 2 numeric failures
(including a commutation abort), 3 resource caps.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import (
    CapExceededError,
    CommutationError,
    ConfigError,
    EigengapError,
    EventNetError,
    NullBranchError,
    ResolutionError,
)
from .histories import enumerate_tree, sample_paths
from .measurement import recording_check
from .opalg import State
from .policy import DEFAULT_POLICY, NumericPolicy
from .scenarios import (SCENARIO_BUILDERS, Scenario, build_scenario,
                        evaluate_expected)
from .spacetime import (CausalLattice, Point, build_full_net, build_tensor_net,
                        derive_causal_order, foliate, verify_nesting)

__all__ = [
    "RunConfig",
    "load_config",
    "run",
    "serialize_report",
    "parse_report",
    "emit_report",
    "main",
]

_MODES = ("enumerate", "sample", "record")
_FORMATS = ("structured", "csv")
_COMMUTATION = ("warn", "abort")

_CONFIG_FIELDS = {
    "scenario", "scenario_params", "net", "initial_state", "mode", "samples",
    "seed", "epsilon", "commutation", "record", "format", "out",
    "max_branches", "policy",
}


@dataclass
class RunConfig:
    """Validated run description; every field has a serializable echo."""

    scenario: str | None = None
    scenario_params: dict = field(default_factory=dict)
    net: dict | None = None
    initial_state: dict | None = None
    mode: str = "enumerate"
    samples: int = 1000
    seed: object = None
    epsilon: float = 0.05
    commutation: str = "warn"
    record: dict = field(default_factory=dict)
    format: str = "structured"
    out: str | None = None
    max_branches: int | None = None
    policy: NumericPolicy = DEFAULT_POLICY

    def echo(self) -> dict:
        return {
            "scenario": self.scenario,
            "scenario_params": self.scenario_params,
            "net": self.net,
            "initial_state": self.initial_state,
            "mode": self.mode,
            "samples": self.samples,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "commutation": self.commutation,
            "record": self.record,
            "format": self.format,
            "max_branches": self.max_branches,
        }


def _validate_config(raw: Mapping[str, Any]) -> RunConfig:
    problems = []
    unknown = set(raw) - _CONFIG_FIELDS
    if unknown:
        problems.append(f"unknown fields {sorted(unknown)}")
    cfg = RunConfig()
    if "scenario" in raw and raw["scenario"] is not None:
        if not isinstance(raw["scenario"], str):
            problems.append("scenario: must be a string")
        elif raw["scenario"] not in SCENARIO_BUILDERS:
            problems.append(f"scenario: unknown name {raw['scenario']!r}; "
                            f"known: {sorted(SCENARIO_BUILDERS)}")
        else:
            cfg.scenario = raw["scenario"]
    if "scenario_params" in raw and raw["scenario_params"] is not None:
        if not isinstance(raw["scenario_params"], dict):
            problems.append("scenario_params: must be an object")
        else:
            cfg.scenario_params = dict(raw["scenario_params"])
    if "net" in raw and raw["net"] is not None:
        if not isinstance(raw["net"], dict):
            problems.append("net: must be an object")
        else:
            cfg.net = dict(raw["net"])
    if cfg.scenario and cfg.net:
        problems.append("scenario and net are mutually exclusive")
    if not cfg.scenario and not cfg.net:
        problems.append("one of scenario or net is required")
    if "initial_state" in raw and raw["initial_state"] is not None:
        if not isinstance(raw["initial_state"], dict) or "kind" not in raw["initial_state"]:
            problems.append("initial_state: must be an object with a 'kind'")
        else:
            cfg.initial_state = dict(raw["initial_state"])
    mode = raw.get("mode", cfg.mode)
    if mode not in _MODES:
        problems.append(f"mode: {mode!r} is not one of {_MODES}")
    else:
        cfg.mode = mode
    if "samples" in raw and raw["samples"] is not None:
        try:
            cfg.samples = int(raw["samples"])
            if cfg.samples < 1:
                problems.append("samples: must be at least 1")
        except (TypeError, ValueError):
            problems.append(f"samples: {raw['samples']!r} is not an integer")
    if "seed" in raw:
        seed = raw["seed"]
        if seed is not None and not isinstance(seed, int):
            problems.append("seed: must be an integer or null")
        else:
            cfg.seed = seed
    if "epsilon" in raw and raw["epsilon"] is not None:
        try:
            cfg.epsilon = float(raw["epsilon"])
            if not 0.0 < cfg.epsilon < 1.0:
                problems.append("epsilon: must lie strictly between 0 and 1")
        except (TypeError, ValueError):
            problems.append(f"epsilon: {raw['epsilon']!r} is not a number")
    commutation = raw.get("commutation", cfg.commutation)
    if commutation not in _COMMUTATION:
        problems.append(f"commutation: {commutation!r} is not one of {_COMMUTATION}")
    else:
        cfg.commutation = commutation
    if "record" in raw and raw["record"] is not None:
        if not isinstance(raw["record"], dict):
            problems.append("record: must be an object")
        else:
            cfg.record = dict(raw["record"])
    fmt = raw.get("format", cfg.format)
    if fmt not in _FORMATS:
        problems.append(f"format: {fmt!r} is not one of {_FORMATS}")
    else:
        cfg.format = fmt
    if "out" in raw and raw["out"] is not None:
        if not isinstance(raw["out"], str):
            problems.append("out: must be a path string")
        else:
            cfg.out = raw["out"]
    if "max_branches" in raw and raw["max_branches"] is not None:
        try:
            cfg.max_branches = int(raw["max_branches"])
            if cfg.max_branches < 1:
                problems.append("max_branches: must be positive")
        except (TypeError, ValueError):
            problems.append(f"max_branches: {raw['max_branches']!r} is not an integer")
    if "policy" in raw and raw["policy"] is not None:
        if not isinstance(raw["policy"], dict):
            problems.append("policy: must be an object of tolerance overrides")
        else:
            known = set(DEFAULT_POLICY.as_dict())
            bad = set(raw["policy"]) - known
            if bad:
                problems.append(f"policy: unknown tolerances {sorted(bad)}")
            else:
                cfg.policy = NumericPolicy(**{**DEFAULT_POLICY.as_dict(), **raw["policy"]})
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def load_config(path: str | None, overrides: Mapping[str, Any]) -> RunConfig:
    """Read the JSON config (if any) and apply command-line overrides."""
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return _validate_config(raw)


# ---------------------------------------------------------------------------
# serialization helpers


def _pairs(mat: np.ndarray) -> list:
    """Row-major [re, im] pairs for a complex matrix."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat)]


def _state_from_config(desc: Mapping[str, Any] | None, dim: int,
                       policy: NumericPolicy) -> State:
    if desc is None:
        return State.maximally_mixed(dim, policy=policy)
    kind = desc.get("kind")
    try:
        if kind == "maximally-mixed":
            return State.maximally_mixed(dim, policy=policy)
        if kind == "diagonal":
            return State.diagonal(desc["weights"], policy=policy)
        if kind == "vector":
            vec = [complex(p[0], p[1]) for p in desc["entries"]]
            return State.from_vector(vec, policy=policy)
        if kind == "matrix":
            rows = [[complex(p[0], p[1]) for p in row] for row in desc["entries"]]
            return State(rows, policy=policy)
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"initial_state is malformed: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"initial_state is not a valid state: {exc}") from exc
    raise ConfigError(f"initial_state kind {kind!r} is not recognized")


def _net_from_config(desc: Mapping[str, Any], policy: NumericPolicy):
    try:
        lattice = CausalLattice(int(desc.get("extent_tau", 1)),
                                int(desc.get("extent_x", 1)),
                                int(desc.get("speed", 1)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"net lattice is malformed: {exc}") from exc
    cell_dim = int(desc.get("cell_dim", 2))
    kind = desc.get("kind", "cone")
    if kind == "cone":
        return build_tensor_net(lattice, cell_dim, policy=policy)
    if kind == "full":
        return build_full_net(lattice, cell_dim, int(desc.get("n_cells", 1)),
                              policy=policy)
    raise ConfigError(f"net kind {kind!r} is not one of ('cone', 'full')")


def _tree_to_dict(node) -> dict:
    return {
        "point": list(node.point) if node.point is not None else None,
        "label": node.actual.label if node.actual is not None else None,
        "cond_prob": node.cond_prob,
        "cum_prob": node.cum_prob,
        "event_dim": node.event_dim,
        "children_prob_sum": node.children_prob_sum,
        "children": [_tree_to_dict(c) for c in node.children],
    }


def _detection_summary(tree) -> list[dict]:
    agg: dict[tuple[int, Point], dict] = {}
    stack = [tree.root]
    while stack:
        node = stack.pop()
        stack.extend(node.children)
        if node.point is None:
            continue
        key = (node.leaf_index, node.point)
        entry = agg.setdefault(key, {"leaf": node.leaf_index,
                                     "point": list(node.point),
                                     "nodes": 0, "event_dim": node.event_dim})
        entry["nodes"] += 1
    return [agg[k] for k in sorted(agg)]


def _path_key(events) -> list:
    return [[e.point.tau, e.point.x, e.label] for e in events]


def _nesting_section(net, policy) -> dict:
    order = derive_causal_order(net, policy=policy)
    pts = net.lattice.points()
    pairs = []
    for p in pts:
        for q in pts:
            if p == q:
                continue
            rep = verify_nesting(net, p, q, policy=policy)
            pairs.append({"p": list(p), "q": list(q),
                          "strict_inclusion": rep.strict_inclusion,
                          "rel_commutant_dim": rep.rel_commutant_dim,
                          "rel_commutant_abelian": rep.rel_commutant_abelian,
                          "holds": rep.holds})
    return {
        "pairs": pairs,
        "future_pairs": len(order.future_pairs),
        "geometric_pairs": len(order.geometric_pairs),
        "matches_geometric": order.matches_geometric,
        "mismatches": len(order.mismatches),
    }


def run(cfg: RunConfig) -> tuple[dict, dict]:
    """Execute the configured run; returns (report, timings in seconds)."""
    policy = cfg.policy
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    scenario: Scenario | None = None
    if cfg.scenario:
        scenario = build_scenario(cfg.scenario, cfg.scenario_params, policy=policy)
        net = scenario.net
        foliation = scenario.foliation
        initial = (scenario.initial if cfg.initial_state is None
                   else _state_from_config(cfg.initial_state, net.dim, policy))
        imposed = scenario.imposed
    else:
        net = _net_from_config(cfg.net, policy)
        foliation = foliate(net.lattice)
        initial = _state_from_config(cfg.initial_state, net.dim, policy)
        imposed = None
    timings["setup"] = time.perf_counter() - t0

    report: dict[str, Any] = {
        "tool": "eventnet",
        "config": cfg.echo(),
        "policy": policy.as_dict(),
        "lattice": {
            "extent_tau": net.lattice.extent_tau,
            "extent_x": net.lattice.extent_x,
            "speed": net.lattice.speed,
            "cell_dim": net.cell_dim,
            "n_cells": net.n_cells,
            "ambient_dim": net.dim,
        },
    }
    if net.dim <= 64:
        report["initial_state"] = _pairs(initial.rho)
    else:
        report["initial_state"] = None

    t0 = time.perf_counter()
    report["nesting"] = _nesting_section(net, policy)
    timings["nesting"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.mode == "enumerate":
        tree = enumerate_tree(net, foliation, initial, cfg.max_branches,
                              policy=policy, imposed=imposed,
                              commutation=cfg.commutation)
        leaf_rows = sorted(
            ({"path": _path_key(events), "probability": prob}
             for events, prob in tree.leaf_paths()),
            key=lambda r: json.dumps(r["path"]))
        report["tree"] = {
            "root": _tree_to_dict(tree.root),
            "n_leaves": len(tree.leaves()),
            "pruned_mass": tree.pruned_mass,
            "leaves": leaf_rows,
        }
        report["detections"] = _detection_summary(tree)
        report["spectrum_dims"] = tree.spectrum_dims
        report["commutation"] = {
            "policy": cfg.commutation,
            "max_norm": tree.max_commutator,
            "entries": [{"leaf": li, "p": list(pa), "q": list(pb), "norm": n}
                        for li, pa, pb, n in tree.commutation_norms],
        }
    elif cfg.mode == "sample":
        summary = sample_paths(net, foliation, initial, cfg.samples, cfg.seed,
                               policy=policy, imposed=imposed,
                               commutation=cfg.commutation)
        rows = [{"path": [list(step) for step in key], "count": count,
                 "frequency": count / summary.n_samples}
                for key, count in summary.counts.items()]
        rows.sort(key=lambda r: json.dumps(r["path"]))
        report["samples"] = {
            "n": summary.n_samples,
            "seed": cfg.seed,
            "paths": rows,
        }
        report["spectrum_dims"] = summary.spectrum_dims
        report["commutation"] = {
            "policy": cfg.commutation,
            "max_norm": summary.max_commutator,
            "entries": [],
        }
    else:  # record
        if scenario is None or not scenario.quantities:
            raise ConfigError("record mode needs a scenario that declares quantities")
        qname = cfg.record.get("quantity", scenario.params.get("default_quantity"))
        if qname not in scenario.quantities:
            raise ConfigError(
                f"record quantity {qname!r} not in {sorted(scenario.quantities)}")
        pt_raw = cfg.record.get("point", scenario.params.get("record_point"))
        if pt_raw is None:
            raise ConfigError("record mode needs a point")
        point = Point(int(pt_raw[0]), int(pt_raw[1]))
        rep = recording_check(net, point, initial, scenario.quantities[qname],
                              cfg.epsilon, policy=policy)
        report["recording"] = {
            "point": list(rep.point),
            "quantity": rep.quantity,
            "epsilon": rep.epsilon,
            "retained": rep.retained,
            "eigenvalues": rep.eigenvalues,
            "weights": rep.weights,
            "alignment_norms": rep.alignment_norms,
            "passes": rep.passes,
            "mixture_residual": rep.mixture_residual,
            "mixture_constant": rep.mixture_constant,
            "matches": [[k, lbl, dist] for k, lbl, dist in rep.matches],
            "event_weights": rep.event_weights,
        }
        report["spectrum_dims"] = []
        report["commutation"] = {"policy": cfg.commutation, "max_norm": 0.0,
                                 "entries": []}
    timings["run"] = time.perf_counter() - t0

    if scenario is not None and scenario.expected and cfg.initial_state is None:
        t0 = time.perf_counter()
        report["expected"] = [
            {"name": r.name, "expected": r.expected, "actual": r.actual,
             "tol": r.tol, "ok": r.ok, "derivation": r.derivation}
            for r in evaluate_expected(scenario, policy=policy)]
        timings["expected"] = time.perf_counter() - t0
    return report, timings


def serialize_report(report: dict) -> str:
    """Canonical bytes: sorted keys, stable float repr, trailing newline."""
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def parse_report(text: str) -> dict:
    return json.loads(text)


def _csv_rows(report: dict) -> tuple[list[str], list[list]]:
    if "tree" in report:
        header = ["path", "probability"]
        rows = [["|".join(f"{t},{x}={lbl}" for t, x, lbl in row["path"]),
                 repr(row["probability"])]
                for row in report["tree"]["leaves"]]
        return header, rows
    if "samples" in report:
        header = ["path", "count", "frequency"]
        rows = [["|".join(f"{t},{x}={lbl}" for t, x, lbl in row["path"]),
                 row["count"], repr(row["frequency"])]
                for row in report["samples"]["paths"]]
        return header, rows
    if "recording" in report:
        rec = report["recording"]
        header = ["k", "eigenvalue", "weight", "alignment_norm",
                  "matched_label", "distance"]
        rows = []
        for k in range(rec["retained"]):
            _, lbl, dist = rec["matches"][k]
            rows.append([k, repr(rec["eigenvalues"][k]), repr(rec["weights"][k]),
                         repr(rec["alignment_norms"][k]),
                         "" if lbl is None else lbl, repr(dist)])
        return header, rows
    raise ValueError("report has no tabular section")


def emit_report(report: dict, fmt: str, out: str | None):
    """Write the report; returns the text when no path was given."""
    if fmt == "structured":
        text = serialize_report(report)
    else:
        header, rows = _csv_rows(report)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    if out is None:
        return text
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)
    return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eventnet",
        description="Run an operator-algebra event simulation and emit a report.")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--scenario", choices=sorted(SCENARIO_BUILDERS),
                        help="shipped scenario name")
    parser.add_argument("--mode", choices=_MODES, help="what to compute")
    parser.add_argument("--samples", type=int, help="sample count for sample mode")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=_FORMATS, dest="fmt",
                        help="report format")
    args = parser.parse_args(argv)
    overrides = {"scenario": args.scenario, "mode": args.mode,
                 "samples": args.samples, "seed": args.seed, "out": args.out,
                 "format": args.fmt}
    try:
        cfg = load_config(args.config, overrides)
        report, timings = run(cfg)
        text = emit_report(report, cfg.format, cfg.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CommutationError, EigengapError, ResolutionError, NullBranchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EventNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for phase, secs in timings.items():
        print(f"timing {phase}: {secs:.3f}s", file=sys.stderr)
    if text is not None:
        sys.stdout.write(text)
    else:
        print(f"wrote {cfg.format} report to {cfg.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
