"""Scenario runner.

    degres run CONFIG [--out DIR] [--override key=value ...] [--verbose]
    degres list-systems
    degres selftest

Exit codes: 0 success, 2 verdict inconclusive (or continuation cut short),
1 error.  See ``configs/`` for the reference layout of a scenario file.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
import yaml

from . import __version__
from .averaging import AveragingConfig, averaging_function, averaging_on_grid
from .degree import CheckConfig, check_theorem1, check_theorem2, degree_over_cycle
from .errors import ConfigError, DegresError
from .melnikov import Cycle, MelnikovProfile, criterion_degree_0_or_2, melnikov_profile
from .ode_core import Tolerances
from .orbit_tools import find_cycle, period_scan
from .periodic_finder import attractor_probe, continuation
from .systems import get_entry, list_systems

log = logging.getLogger("degres")

TASKS = ("theorem1", "theorem2", "melnikov-profile", "degree-map", "continuation", "period-scan")
TOP_KEYS = {"task", "system", "options", "tolerances", "averaging", "output_dir"}
OPTION_KEYS = {
    "theorem1": {"v_star", "region", "index_radius", "periodic_grid", "div_grid", "eps_low"},
    "theorem2": {"cycle_start", "target_period", "find_cycle", "annulus_width", "n_theta",
                 "eps_low", "div_grid"},
    "melnikov-profile": {"cycle_start", "target_period", "find_cycle", "n_theta"},
    "degree-map": {"region", "n"},
    "continuation": {"eps_schedule", "mode", "guess", "seed", "probe_periods", "reference",
                     "cycle_start", "target_period", "find_cycle"},
    "period-scan": {"alphas", "alpha0", "max_order", "cycle_start"},
}
EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


def _write_rows(path: Path, header: Iterable[str], rows: Iterable[Iterable[str]],
                comments: Iterable[str] = ()) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
        for c in comments:
            fh.write(c + "\n")
    return path


def emit_profile_csv(profile: MelnikovProfile, path) -> Path:
    """Write ``theta,m_a,m_e`` rows followed by ``# zero_e,theta,slope`` comment lines."""
    rows = ((fmt(t), fmt(a), fmt(e)) for t, a, e in zip(profile.thetas, profile.m_a, profile.m_e))
    comments = [f"# zero_e,{fmt(t)},{fmt(s)}" for t, s in profile.zeros_e]
    return _write_rows(Path(path), ("theta", "m_a", "m_e"), rows, comments)


def read_profile_csv(path) -> dict[str, Any]:
    thetas, m_a, m_e, zeros = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "theta,m_a,m_e":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# zero_e,"):
                _, t, s = line[2:].split(",")
                zeros.append((float(t), float(s)))
            elif line:
                t, a, e = line.split(",")
                thetas.append(float(t))
                m_a.append(float(a))
                m_e.append(float(e))
    return {"thetas": np.array(thetas), "m_a": np.array(m_a), "m_e": np.array(m_e),
            "zeros_e": zeros}


def _set_dotted(cfg: dict, key: str, value: Any):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r}: {p!r} is not a section")
    node[parts[-1]] = value


def load_config(path, overrides: Iterable[str] = ()) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        _set_dotted(cfg, key.strip(), yaml.safe_load(raw))
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    for key in cfg:
        if key not in TOP_KEYS:
            raise ConfigError(f"unknown top-level key {key!r}")
    task = cfg.get("task")
    if task not in TASKS:
        raise ConfigError(f"task: expected one of {TASKS}, got {task!r}")
    system = cfg.get("system")
    if not isinstance(system, dict) or "name" not in system:
        raise ConfigError("system.name is required")
    for key in system:
        if key not in ("name", "params"):
            raise ConfigError(f"unknown key system.{key}")
    try:
        entry = get_entry(system["name"])
    except DegresError as exc:
        raise ConfigError(f"system.name: {exc}") from exc
    for key in system.get("params") or {}:
        if key not in entry.params:
            raise ConfigError(f"system.params.{key}: not a parameter of {entry.name!r}")
    for key in cfg.get("options") or {}:
        if key not in OPTION_KEYS[task]:
            raise ConfigError(f"options.{key}: not valid for task {task!r}")
    for key in cfg.get("tolerances") or {}:
        if key not in ("abs_tol", "rel_tol", "max_step", "fd_step"):
            raise ConfigError(f"unknown key tolerances.{key}")
    for key in cfg.get("averaging") or {}:
        if key not in ("quad_nodes", "quad_tol", "max_panels"):
            raise ConfigError(f"unknown key averaging.{key}")
    sched = (cfg.get("options") or {}).get("eps_schedule")
    if sched is not None:
        if not isinstance(sched, list) or not sched or any(
                not isinstance(e, (int, float)) or e <= 0 for e in sched):
            raise ConfigError("options.eps_schedule must be a non-empty list of positive numbers")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("options.eps_schedule must be strictly decreasing")


class Runner:
    def __init__(self, cfg: dict, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.entry = get_entry(cfg["system"]["name"])
        try:
            self.sys = self.entry.make(cfg["system"].get("params"))
        except (DegresError, ValueError, TypeError) as exc:
            raise ConfigError(f"system.params: {exc}") from exc
        try:
            self.tol = Tolerances(**(cfg.get("tolerances") or {}))
            self.avg = AveragingConfig(tol=self.tol, **(cfg.get("averaging") or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tolerances/averaging: {exc}") from exc
        self.opts = dict(self.entry.defaults)
        self.opts.update(cfg.get("options") or {})
        self.summary: dict[str, Any] = {"task": cfg["task"], "system": self.entry.name,
                                        "params": self.sys.params, "version": __version__}

    def opt(self, key, default=None):
        return self.opts.get(key, default)

    def require(self, key):
        if key not in self.opts:
            raise ConfigError(f"options.{key} is required for task {self.cfg['task']!r} "
                              f"on system {self.entry.name!r}")
        return self.opts[key]

    def cycle(self) -> Cycle:
        start = self.require("cycle_start")
        period = float(self.opt("target_period", self.sys.T))
        if self.opt("find_cycle", False):
            return find_cycle(self.sys.base, start, period, self.tol)
        return Cycle.from_start(self.sys.base, start, period, self.tol)

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path

    def run(self) -> int:
        handler = getattr(self, "task_" + self.cfg["task"].replace("-", "_"))
        return handler()

    def _check_cfg(self) -> CheckConfig:
        kw = {}
        for key in ("periodic_grid", "eps_low", "index_radius"):
            if key in self.opts:
                kw[key] = self.opts[key]
        if "div_grid" in self.opts:
            kw["div_grid"] = tuple(self.opts["div_grid"])
        return CheckConfig(averaging=self.avg, **kw)

    def task_theorem1(self) -> int:
        verdict = check_theorem1(self.sys, self.require("v_star"), self.require("region"),
                                 self._check_cfg())
        self.summary["verdict"] = verdict.to_dict()
        self.write_json("verdict.json", self.summary)
        idx = verdict.details["index"]
        print(f"Theorem 1 on {self.entry.name}: {verdict.conclusion}. "
              f"Index of -fbar at v*={verdict.details['v_star']}: "
              f"{idx['value'] if idx else 'undefined'}; fbar(v*) integral form "
              f"{verdict.details['fbar_integral']}, mean form {verdict.details['fbar_mean']}. "
              f"Failing hypotheses: {verdict.failing() or 'none'}.")
        return EXIT_OK if verdict.predicted else EXIT_INCONCLUSIVE

    def task_theorem2(self) -> int:
        cyc = self.cycle()
        verdict = check_theorem2(self.sys, cyc, float(self.opt("annulus_width", 0.1)),
                                 self._check_cfg())
        crit_info: dict[str, Any]
        try:
            prof = melnikov_profile(self.sys, cyc, int(self.opt("n_theta", 128)), self.avg)
            emit_profile_csv(prof, self.out / "profile.csv")
            crit = criterion_degree_0_or_2(prof)
            crit_info = {"applies": crit.applies, "conclusion": crit.conclusion,
                         "reason": crit.reason, "zeros_e": prof.zeros_e,
                         "sign_product_a": prof.sign_product_a}
        except DegresError as exc:
            crit_info = {"applies": False, "conclusion": None,
                         "reason": f"{type(exc).__name__}: {exc}"}
        self.summary["verdict"] = verdict.to_dict()
        self.summary["melnikov_criterion"] = crit_info
        self.write_json("verdict.json", self.summary)
        deg = verdict.details["degree"]
        print(f"Theorem 2 on {self.entry.name}: {verdict.conclusion}. "
              f"Degree of -fbar over the cycle interior: {deg['value'] if deg else 'undefined'}; "
              f"predicted approach side: {verdict.approach_side}. Melnikov criterion applies: "
              f"{crit_info['applies']} ({crit_info['reason']}). "
              f"Failing hypotheses: {verdict.failing() or 'none'}.")
        return EXIT_OK if verdict.predicted else EXIT_INCONCLUSIVE

    def task_melnikov_profile(self) -> int:
        cyc = self.cycle()
        prof = melnikov_profile(self.sys, cyc, int(self.opt("n_theta", 128)), self.avg)
        crit = criterion_degree_0_or_2(prof)
        emit_profile_csv(prof, self.out / "profile.csv")
        self.summary.update(zeros_e=prof.zeros_e, sign_product_a=prof.sign_product_a,
                            criterion={"applies": crit.applies, "conclusion": crit.conclusion,
                                       "reason": crit.reason})
        self.write_json("summary.json", self.summary)
        print(f"Melnikov profile on {self.entry.name}: {prof.zero_count} zeros of M_E at "
              f"{[round(t, 10) for t, _ in prof.zeros_e]}; M_A sign product "
              f"{prof.sign_product_a:.6g}; criterion applies: {crit.applies} ({crit.reason}).")
        return EXIT_OK

    def task_degree_map(self) -> int:
        grid = averaging_on_grid(self.sys, self.require("region"), int(self.opt("n", 11)), self.avg)
        rows = ((fmt(a), fmt(b), fmt(f1), fmt(f2)) for a, b, f1, f2 in grid.rows())
        _write_rows(self.out / "degree_map.csv", ("v1", "v2", "fbar1", "fbar2"), rows)
        self.write_json("summary.json", self.summary)
        print(f"Averaging field of {self.entry.name} sampled on a {grid.v1.size}x{grid.v2.size} "
              f"grid over {list(self.require('region'))}.")
        return EXIT_OK

    def task_continuation(self) -> int:
        sched = [float(e) for e in self.require("eps_schedule")]
        mode = self.opt("mode", "point")
        if mode == "cycle":
            reference = self.cycle()
            seed = self.opt("seed") or (1.1 * np.asarray(reference.start)).tolist()
        else:
            reference = np.asarray(self.opt("reference", self.opt("v_star", [0.0, 0.0])), float)
            seed = self.opt("seed") or reference.tolist()
        guess = self.opt("guess")
        if guess is None:
            probe = attractor_probe(self.sys, sched[0], seed, int(self.opt("probe_periods", 200)),
                                    self.tol)
            guess = probe.limit_point
        res = continuation(self.sys, sched, guess, mode, reference, self.tol)
        rows = []
        for r in res.rows:
            m1, m2 = r.floquet.moduli
            rows.append((fmt(r.eps), fmt(r.fixed_point[0]), fmt(r.fixed_point[1]),
                         fmt(r.floquet.residual), fmt(m1), fmt(m2),
                         "true" if r.floquet.stable else "false", fmt(r.dist_to_generator),
                         r.side or ""))
        _write_rows(self.out / "continuation.csv",
                    ("eps", "x1", "x2", "residual", "mult1_abs", "mult2_abs", "stable", "dist",
                     "side"), rows)
        self.summary.update(partial=res.partial, error=res.error, rows=len(res.rows))
        if mode == "cycle":
            try:
                deg = degree_over_cycle(lambda v: -averaging_function(self.sys, v, self.avg), reference)
                predicted = "inside" if deg.value > 1 else ("outside" if deg.value < 1 else None)
                self.summary.update(degree=deg.value, predicted_side=predicted)
                sides = {r.side for r in res.rows}
                if predicted and sides and sides != {predicted}:
                    log.warning("measured side %s differs from predicted side %s", sides, predicted)
            except DegresError as exc:
                self.summary.update(degree=None, predicted_side=None, degree_error=str(exc))
        self.write_json("summary.json", self.summary)
        dists = [f"{r.dist_to_generator:.3e}" for r in res.rows]
        print(f"Continuation on {self.entry.name} ({mode} mode): {len(res.rows)} of {len(sched)} "
              f"rows; all stable: {all(r.floquet.stable for r in res.rows)}; distances {dists}"
              + (f"; sides {[r.side for r in res.rows]}" if mode == "cycle" else "")
              + (f"; stopped early: {res.error}" if res.partial else "") + ".")
        return EXIT_INCONCLUSIVE if res.partial else EXIT_OK

    def task_period_scan(self) -> int:
        direction = np.asarray(self.opt("cycle_start", [0.0, 1.0]), float)
        direction = direction / np.linalg.norm(direction)

        def family(a):
            return a * direction

        alpha0 = self.opt("alpha0")
        scan = period_scan(self.sys.base, family, self.require("alphas"),
                           None if alpha0 is None else float(alpha0),
                           int(self.opt("max_order", 2)), self.tol)
        _write_rows(self.out / "period_scan.csv", ("alpha", "T"),
                    ((fmt(a), fmt(t)) for a, t in zip(scan.params, scan.periods)))
        self.summary.update(alpha0=alpha0, derivatives=scan.derivative_estimates)
        self.write_json("summary.json", self.summary)
        print(f"Period scan on {self.entry.name}: T = {[round(t, 10) for t in scan.periods]} at "
              f"alpha = {scan.params}; derivatives at alpha0={alpha0}: "
              f"{scan.derivative_estimates}.")
        return EXIT_OK


def _clean(obj):
    """Convert numpy scalars/arrays, complex numbers and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def run(config_path, out: Optional[str] = None, overrides: Iterable[str] = ()) -> int:
    try:
        cfg = load_config(config_path, overrides)
        out_dir = Path(out or cfg.get("output_dir") or "out")
        return Runner(cfg, out_dir).run()
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except DegresError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _list_systems() -> int:
    for e in list_systems():
        params = ", ".join(f"{k}: {t.__name__} = {d!r}" for k, (t, d) in e.params.items())
        print(f"{e.name}\n    {e.description}\n    params: {params}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="degres", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output_dir)")
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-key override, value parsed as YAML")
    p_run.add_argument("--verbose", action="store_true")
    sub.add_parser("list-systems", help="print the built-in system catalog")
    p_self = sub.add_parser("selftest", help="run the acceptance criteria")
    p_self.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-systems":
        return _list_systems()
    if args.command == "selftest":
        from .acceptance import run_all
        return EXIT_OK if run_all() else EXIT_ERROR
    return run(args.config, args.out, args.override)


if __name__ == "__main__":
    sys.exit(main())
