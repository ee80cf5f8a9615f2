"""Command-line front end: ``wander-lab <command> --scenario FILE [--config FILE] [--out DIR]``.

Scenarios and configs are JSON documents.  Reports are JSON (sorted keys);
plot data goes to tab-separated tables next to the report.  Exit codes:
0 on success, 2 when the mathematics answers Undetermined/NonConvergent/Unknown,
1 when the software fails.
"""

from __future__ import annotations

import argparse
import cmath
import copy
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, _kernels, innerseq, linearize, orbitrel, powertower, teichreport
from .errors import HypothesisError, NonConvergentError, ScenarioError, WanderLabError

log = logging.getLogger("wander_lab")

SCHEMA_VERSION = 1
COMMANDS = ("classify", "linearize", "quotient", "tower-verify", "orbit", "inj-decay", "teich-dim", "all")
PAYLOAD_KINDS = ("inner_sequence", "covering_tower", "component_list")
CONFIG_KEYS = {"tolerance", "max_m", "horizon", "grid", "seed"}

EXIT_OK, EXIT_ERROR, EXIT_UNDETERMINED = 0, 1, 2


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


@dataclass
class ComponentList:
    components: list[teichreport.ComponentReport]
    infinitely_many: bool = False

    def to_dict(self) -> dict:
        return {
            "components": [c.to_dict() for c in self.components],
            "infinitely_many": self.infinitely_many,
        }


@dataclass
class Scenario:
    name: str
    kind: str
    payload: Any
    options: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def payload_dict(self) -> dict:
        if self.kind == "inner_sequence":
            return self.payload.to_description()
        return self.payload.to_dict()

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return serialize(self) == serialize(other)

    @property
    def digest(self) -> str:
        text = json.dumps(serialize(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def serialize(s: Scenario) -> dict:
    return {
        "schema_version": s.schema_version,
        "name": s.name,
        "payload": {s.kind: s.payload_dict()},
        "options": copy.deepcopy(s.options),
    }


def _validate_payload(kind: str, body: Any):
    if not isinstance(body, dict):
        raise ScenarioError(f"payload.{kind}: expected an object")
    try:
        if kind == "inner_sequence":
            return innerseq.MapSequence.from_description(body)
        if kind == "covering_tower":
            return powertower.CoveringTower.from_dict(body)
        comps = body.get("components")
        if not isinstance(comps, list):
            raise ScenarioError("payload.component_list.components: expected a list")
        out = []
        for i, c in enumerate(comps):
            try:
                out.append(teichreport.ComponentReport.from_dict(c))
            except (WanderLabError, KeyError, ValueError) as exc:
                raise ScenarioError(f"payload.component_list.components[{i}]: {exc}") from exc
        return ComponentList(out, bool(body.get("infinitely_many", False)))
    except ScenarioError:
        raise
    except KeyError as exc:
        raise ScenarioError(f"payload.{kind}: missing field {exc}") from exc
    except (WanderLabError, ValueError, TypeError) as exc:
        raise ScenarioError(f"payload.{kind}: {exc}") from exc


def from_document(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported value {version!r} (expected {SCHEMA_VERSION})")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("name: expected a non-empty string")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or len(payload) != 1:
        raise ScenarioError(f"payload: expected exactly one of {', '.join(PAYLOAD_KINDS)}")
    (kind, body), = payload.items()
    if kind not in PAYLOAD_KINDS:
        raise ScenarioError(f"payload: unknown kind {kind!r}")
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise ScenarioError("options: expected an object")
    return Scenario(name, kind, _validate_payload(kind, body), dict(options), version)


def _load_json(path: Path, what: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{what} {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def ingest(path) -> Scenario:
    doc = _load_json(Path(path), "scenario")
    try:
        return from_document(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def load_config(path) -> dict:
    if path is None:
        return {}
    cfg = _load_json(Path(path), "config")
    if not isinstance(cfg, dict):
        raise ScenarioError(f"{path}: config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ScenarioError(f"{path}: unknown config key(s) {sorted(unknown)}")
    return cfg


def bundled_scenarios() -> list[str]:
    root = resources.files("wander_lab") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    with resources.as_file(resources.files("wander_lab") / "scenarios" / name) as p:
        return Path(p)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    results: dict
    exit_code: int = EXIT_OK
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)


def _settings(scenario: Scenario, config: dict) -> dict:
    s = {
        "tolerance": linearize.DEFAULT_TOL,
        "max_m": linearize.DEFAULT_MAX_M,
        "horizon": 8,
        "grid": {},
        "seed": 0,
    }
    s.update({k: v for k, v in scenario.options.items()})
    grid = dict(scenario.options.get("grid", {}))
    grid.update(config.get("grid", {}))
    s.update({k: v for k, v in config.items() if k != "grid"})
    s["grid"] = grid
    return s


def _need(scenario: Scenario, *kinds: str):
    if scenario.kind not in kinds:
        raise ScenarioError(f"command needs a {' or '.join(kinds)} payload, scenario has {scenario.kind}")


def _complex(v, default):
    if v is None:
        return complex(default)
    if isinstance(v, (list, tuple)):
        return complex(*v)
    return complex(v)


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _finite(x):
    return x if x is None or math.isfinite(x) else None


def cmd_classify(scenario: Scenario, s: dict) -> Outcome:
    _need(scenario, "inner_sequence")
    report = innerseq.classify(scenario.payload, s.get("classify_horizon"))
    code = EXIT_UNDETERMINED if report.verdict == innerseq.Verdict.UNDETERMINED else EXIT_OK
    return Outcome({"classification": report.to_dict()}, code)


def cmd_linearize(scenario: Scenario, s: dict) -> Outcome:
    _need(scenario, "inner_sequence")
    seq = scenario.payload
    n = int(s.get("n", 0))
    grid = None
    if "radius" in s["grid"]:
        grid = linearize.disc_grid(float(s["grid"]["radius"]), int(s["grid"].get("count", 400)))
    res = linearize.koenigs_limit(
        seq, n, grid, tol=float(s["tolerance"]), max_m=int(s["max_m"]),
        grid_count=int(s["grid"].get("count", 400)),
    )
    rows = [
        [float(z.real), float(z.imag), float(p.real), float(p.imag), float(r)]
        for z, p, r in zip(res.grid, res.phi_values, res.residuals)
    ]
    table = (["z_re", "z_im", "phi_re", "phi_im", "residual"], rows)
    out = {"linearization": res.to_dict()}
    out["linearization"]["cauchy_gap"] = _finite(res.cauchy_gap)
    code = EXIT_OK if res.converged else EXIT_UNDETERMINED
    return Outcome(out, code, {"linearize": table})


def cmd_quotient(scenario: Scenario, s: dict) -> Outcome:
    _need(scenario, "inner_sequence")
    if innerseq.classify(scenario.payload).verdict == innerseq.Verdict.UNDETERMINED:
        note = "classification is Undetermined; the quotient surface is not identified"
        return Outcome({"quotient": {"kind": "Undetermined", "reason": note}}, EXIT_UNDETERMINED)
    model = linearize.quotient_surface_model(
        scenario.payload, int(s["horizon"]), s.get("c"), float(s["tolerance"]), int(s["max_m"])
    )
    code = EXIT_UNDETERMINED if model.warnings else EXIT_OK
    return Outcome({"quotient": model.to_dict()}, code)


def _tower_point(tower: powertower.CoveringTower, s: dict) -> powertower.TowerPoint:
    if "point" in s:
        return powertower.TowerPoint.from_complex(0, _complex(s["point"], 0.5))
    if tower.kind == powertower.ANNULUS:
        return powertower.TowerPoint(0, -math.pi * float(tower.mu0), 0.0)
    return powertower.TowerPoint(0, math.log(0.5), 0.0)


def cmd_tower_verify(scenario: Scenario, s: dict) -> Outcome:
    _need(scenario, "covering_tower")
    tower = scenario.payload
    levels = int(s["horizon"])
    p = _tower_point(tower, s)
    results: dict[str, Any] = {"kind": tower.kind, "levels": levels}

    degrees = [tower.degree(k) for k in range(levels)]
    results["degrees"] = degrees
    results["total_degree"] = str(tower.total_degree(levels))
    if tower.kind == powertower.ANNULUS:
        results["moduli"] = [str(tower.modulus_exact(k)) for k in range(levels + 1)]
        q = p
        inside = True
        for _ in range(levels):
            q = powertower.tower_map(tower, q)
            try:
                powertower.check_point(tower, q)
            except WanderLabError:
                inside = False
        results["orbit_stays_in_model"] = inside

    rng = np.random.default_rng(int(s["seed"]))
    alphas = s.get("alphas")
    if alphas is None:
        alphas = list(rng.uniform(-math.pi, math.pi, size=levels))
    maps = [powertower.RotatedPower(float(a), d) for a, d in zip(alphas, degrees)]
    radius = math.exp(p.log_radius)
    grid = [cmath.rect(radius, 2.0 * math.pi * j / 64) for j in range(64)]
    residual = powertower.conjugacy_residual(tower, maps, grid)
    wrong = powertower.conjugacy_residual(tower, maps, grid, phis=[0.0] * (len(maps) + 1))
    results["conjugacy_residual"] = residual
    results["uncorrected_residual"] = wrong
    results["alphas"] = [float(a) for a in alphas]
    gaps = [powertower.indiscreteness_witness(tower, p, k) for k in range(levels + 1)]
    results["witness_gaps"] = gaps
    table = (["k", "D_k", "angular_gap"], [[k, tower.total_degree(k), g] for k, g in enumerate(gaps)])
    return Outcome({"tower": results}, EXIT_OK, {"witness": table})


def cmd_inj_decay(scenario: Scenario, s: dict) -> Outcome:
    _need(scenario, "covering_tower")
    tower = scenario.payload
    p = _tower_point(tower, s)
    n_max = int(s.get("n_max", 20))
    decay = powertower.inj_decay(tower, p, n_max)
    monotone = all(b <= a + 1e-12 for a, b in zip(decay.values, decay.values[1:]))
    results = {
        "values": decay.values,
        "truncated": decay.truncated,
        "monotone": monotone,
        "outside_collar": decay.outside_collar,
    }
    table = (["n", "inj"], [[k, v] for k, v in enumerate(decay.values)])
    return Outcome({"inj_decay": results}, EXIT_OK, {"inj_decay": table})


def cmd_orbit(scenario: Scenario, s: dict) -> Outcome:
    _need(scenario, "inner_sequence", "covering_tower")
    schedule = tuple(s.get("depth_schedule", orbitrel.DEFAULT_SCHEDULE))
    floor = float(s.get("floor", orbitrel.DEFAULT_FLOOR))
    if scenario.kind == "covering_tower":
        verdict = orbitrel.discreteness_detect(scenario.payload, _tower_point(scenario.payload, s), schedule, floor)
        samples = []
    else:
        seq = scenario.payload
        base = _complex(s.get("base"), 0.5)
        samples = [orbitrel.grand_orbit_sample(seq, base, j) for j in schedule if seq.available(j) == j]
        verdict = orbitrel.discreteness_detect(seq, base, schedule, floor)
    results = {"relation": verdict.to_dict(), "samples": [x.to_dict() for x in samples]}
    rows = [[x.depth, x.count, _finite(x.min_gap)] for x in samples]
    code = EXIT_UNDETERMINED if verdict.verdict == orbitrel.Relation.UNDETERMINED else EXIT_OK
    return Outcome({"orbit": results}, code, {"orbit": (["depth", "count", "min_gap"], rows)})


def _components_for(scenario: Scenario, s: dict) -> teichreport.DimensionVerdict:
    if scenario.kind == "component_list":
        cl = scenario.payload
        return teichreport.total_dimension(cl.components, cl.infinitely_many)
    if scenario.kind == "covering_tower":
        tower = scenario.payload
        verdict = orbitrel.discreteness_detect(tower)
        if tower.kind == powertower.ANNULUS:
            comp = teichreport.ComponentReport.from_verdict(
                teichreport.ComponentKind.ANNULUS, verdict, float(tower.mu0), scenario.name
            )
        else:
            comp = teichreport.ComponentReport.from_verdict(
                teichreport.ComponentKind.PUNCTURED_DISC, verdict, None, scenario.name
            )
        return teichreport.total_dimension([comp])
    seq = scenario.payload
    verdict = orbitrel.discreteness_detect(seq, _complex(s.get("base"), 0.5))
    if verdict.verdict == orbitrel.Relation.INDISCRETE:
        # a power-map tail on the disc: the origin is removed, leaving a punctured disc
        kind = teichreport.ComponentKind.PUNCTURED_DISC
    else:
        kind = teichreport.ComponentKind.SIMPLY_CONNECTED
    comp = teichreport.ComponentReport.from_verdict(kind, verdict, None, scenario.name)
    return teichreport.total_dimension([comp])


def cmd_teich_dim(scenario: Scenario, s: dict) -> Outcome:
    verdict = _components_for(scenario, s)
    code = EXIT_UNDETERMINED if verdict.value == "Unknown" else EXIT_OK
    return Outcome({"dimension": verdict.to_dict()}, code)


_APPLICABLE = {
    "inner_sequence": ("classify", "linearize", "quotient", "orbit", "teich-dim"),
    "covering_tower": ("tower-verify", "inj-decay", "orbit", "teich-dim"),
    "component_list": ("teich-dim",),
}

_DISPATCH = {
    "classify": cmd_classify,
    "linearize": cmd_linearize,
    "quotient": cmd_quotient,
    "tower-verify": cmd_tower_verify,
    "orbit": cmd_orbit,
    "inj-decay": cmd_inj_decay,
    "teich-dim": cmd_teich_dim,
}


def _run_one(command: str, scenario: Scenario, s: dict, batch: bool = False) -> Outcome:
    try:
        return _DISPATCH[command](scenario, s)
    except NonConvergentError as exc:
        return Outcome({"error": {"type": "NonConvergent", "message": str(exc)}}, EXIT_UNDETERMINED)
    except HypothesisError as exc:
        if batch:
            # under "all", a command whose hypotheses fail is skipped, not failed
            return Outcome({"skipped": str(exc)}, EXIT_OK)
        return Outcome({"error": {"type": "HypothesisError", "message": str(exc)}}, EXIT_ERROR)
    except WanderLabError as exc:
        return Outcome({"error": {"type": type(exc).__name__, "message": str(exc)}}, EXIT_ERROR)


def run(command: str, scenario: Scenario, config: dict | None = None) -> tuple[dict, int, dict]:
    """Execute ``command``; returns ``(report, exit_code, tables)``."""
    if command not in COMMANDS:
        raise ScenarioError(f"unknown command {command!r}")
    config = config or {}
    s = _settings(scenario, config)
    start = time.perf_counter()
    tables: dict = {}
    if command == "all":
        results, code = {}, EXIT_OK
        for sub in _APPLICABLE[scenario.kind]:
            o = _run_one(sub, scenario, s, batch=True)
            results[sub] = o.results
            tables.update({f"{sub}.{k}": v for k, v in o.tables.items()})
            if o.exit_code == EXIT_ERROR or code == EXIT_ERROR:
                code = EXIT_ERROR
            else:
                code = max(code, o.exit_code)
    else:
        o = _run_one(command, scenario, s)
        results, code, tables = o.results, o.exit_code, o.tables
    report = {
        "scenario": {"name": scenario.name, "hash": scenario.digest},
        "command": command,
        "results": results,
        "exit_code": code,
        "provenance": {
            "version": __version__,
            "backend": _kernels.BACKEND,
            "config": config,
            "wall_time": round(time.perf_counter() - start, 6),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    }
    return report, code, tables


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _default(o):
    if isinstance(o, complex):
        return _pair(o)
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_default, allow_nan=False)


def write_table(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _apply_threads():
    value = os.environ.get("WANDER_LAB_THREADS")
    if not value or not _kernels.USE_NUMBA:
        return
    import numba

    try:
        n = max(1, min(int(value), numba.config.NUMBA_NUM_THREADS))
    except ValueError:
        log.warning("ignoring non-integer WANDER_LAB_THREADS=%r", value)
        return
    numba.set_num_threads(n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wander-lab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS + ("list",))
    parser.add_argument("--scenario", help="scenario JSON file, or the name of a bundled scenario")
    parser.add_argument("--config", help="JSON config overriding scenario options")
    parser.add_argument("--out", help="directory for the report and plot tables")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_scenario(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    name = arg if arg.endswith(".json") else arg + ".json"
    if name in bundled_scenarios():
        return bundled_path(name)
    return path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "list":
        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    if not args.scenario:
        print("error: --scenario is required", file=sys.stderr)
        return EXIT_ERROR
    _apply_threads()
    try:
        scenario = ingest(_resolve_scenario(args.scenario))
        config = load_config(args.config)
        report, code, tables = run(args.command, scenario, config)
    except WanderLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = dumps(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{scenario.name}.{args.command}"
        (out / f"{stem}.json").write_text(text + "\n", encoding="utf-8")
        for key, (header, rows) in tables.items():
            write_table(out / f"{scenario.name}.{key}.tsv", header, rows)
        print(out / f"{stem}.json")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
