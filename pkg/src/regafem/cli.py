"""Command-line front end.

    regafem run CONFIG [--override section.key=value ...] [--output DIR]
    regafem report DIR

Config files hold one ``section.key = value`` per line; ``#`` starts a comment.
Exit codes: 0 success, 2 configuration or missing-file error, 3 solver abort.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .controller import AdaptiveAbort, AdaptiveConfig, adaptive_solve
from .mesh import write_vtk
from .problems import model_problem
from .regnewton import ITERATION_HEADER, Method, SolverConfig, fmt, write_iterations_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3

LEVELS_HEADER = ["level", "iterations", "residual", "alpha", "reg_dof", "total_dof",
                 "elements", "status", "phase", "h1_error"]
ERROR_HEADER = ["elements", "h1_error", "estimator_total"]


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(conv):
    def parse(text):
        return None if text.lower() in ("none", "") else conv(text)
    return parse


def _method(text: str):
    if text.lower() == "auto":
        return None
    for m in Method:
        if m.value.lower() == text.lower():
            return m
    raise ValueError(f"expected auto, Standard, TR or NTR, got {text!r}")


def _alpha_mode(text: str) -> str:
    if text not in ("gamma", "ratio_squared"):
        raise ValueError(f"expected gamma or ratio_squared, got {text!r}")
    return text


# key -> (parser, default)
SCHEMA = {
    "problem.epsilon": (float, 1e-3),
    "problem.a": (float, 0.5),
    "solver.tol": (float, 1e-7),
    "solver.max_iter": (int, 20),
    "solver.switch_threshold": (float, 50.0),
    "solver.gamma0": (float, 1.0),
    "solver.alpha_cap": (_optional(float), None),
    "solver.alpha_mode": (_alpha_mode, "gamma"),
    "solver.method": (_method, None),
    "solver.compute_jn": (_bool, False),
    "adaptive.max_levels": (int, 30),
    "adaptive.theta": (float, 0.5),
    "adaptive.initial_subdivisions": (int, 3),
    "adaptive.initial_bisections": (int, 1),
    "adaptive.quadrature_order": (int, 2),
    "adaptive.target_h1_error": (_optional(float), None),
    "adaptive.max_elements": (_optional(int), None),
    "adaptive.enable_cutoff": (_bool, True),
    "output.directory": (str, "results"),
    "output.vtk": (_bool, False),
    "output.iterations": (_bool, True),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, raw: str, where: str = "") -> None:
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{where}unknown key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            self.values[key] = parser(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{where}bad value for {key}: {exc}") from None

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            tol=self["solver.tol"], max_iter=self["solver.max_iter"],
            switch_threshold=self["solver.switch_threshold"], gamma0=self["solver.gamma0"],
            alpha_cap=self["solver.alpha_cap"], compute_Jn=self["solver.compute_jn"],
            method_override=self["solver.method"], alpha_mode=self["solver.alpha_mode"],
        )

    def adaptive_config(self) -> AdaptiveConfig:
        return AdaptiveConfig(
            max_levels=self["adaptive.max_levels"], theta=self["adaptive.theta"],
            solver=self.solver_config(),
            initial_subdivisions=self["adaptive.initial_subdivisions"],
            initial_bisections=self["adaptive.initial_bisections"],
            quadrature_order=self["adaptive.quadrature_order"],
            target_h1_error=self["adaptive.target_h1_error"],
            max_elements=self["adaptive.max_elements"],
            enable_cutoff=self["adaptive.enable_cutoff"],
        )


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {line!r}")
        key, raw = line.split("=", 1)
        cfg.set(key, raw, where=f"{source}:{lineno}: ")
    return cfg


def load_config(path, overrides=()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    cfg = parse_config(text, str(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, raw = item.split("=", 1)
        cfg.set(key, raw, where="--override: ")
    return cfg


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_outputs(outdir: Path, summaries, write_iterations: bool = True) -> None:
    _write_csv(outdir / "levels.csv", LEVELS_HEADER, (
        [s.level, s.n_iterations, fmt(s.final_residual), fmt(s.final_alpha),
         s.regularized_dof_count, s.total_dof, s.n_elements, s.status.value, s.phase_label,
         fmt(s.h1_error)]
        for s in summaries))
    _write_csv(outdir / "error_vs_elements.csv", ERROR_HEADER, (
        [s.n_elements, fmt(s.h1_error), fmt(s.estimator_total)] for s in summaries))
    if write_iterations:
        write_iterations_csv(outdir / "iterations.csv", ((s.level, s.iterations) for s in summaries))


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.override)
        adaptive = cfg.adaptive_config()
        spec = model_problem(cfg["problem.epsilon"], cfg["problem.a"])
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(args.output or cfg["output.directory"])
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create output directory {outdir}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG

    on_level = None
    if cfg["output.vtk"]:
        vtk_dir = outdir / "vtk"
        vtk_dir.mkdir(exist_ok=True)

        def on_level(summary, mesh, u_vertex, ind):
            write_vtk(vtk_dir / f"level_{summary.level:03d}.vtk", mesh,
                      point_data={"u": u_vertex}, cell_data={"eta": ind.eta})

    try:
        _, _, summaries = adaptive_solve(spec, adaptive, on_level=on_level)
    except AdaptiveAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT

    write_outputs(outdir, summaries, cfg["output.iterations"])
    last = summaries[-1]
    print(f"{len(summaries)} levels, final mesh {last.n_elements} elements, "
          f"status {last.status.value}, residual {fmt(last.final_residual)}; results in {outdir}")
    return EXIT_OK


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _table(header, rows) -> str:
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def format_report(run_dir) -> str:
    run_dir = Path(run_dir)
    iterations = _read_csv(run_dir / "iterations.csv")
    levels = _read_csv(run_dir / "levels.csv")
    out = []
    by_level = {}
    for row in iterations:
        by_level.setdefault(row["level"], []).append(row)
    iter_header = ["ITER", "|F^{n+1}|", "E_n", "gamma_n", "J_n"]
    if not by_level:
        out.append(_table(iter_header, []))
    methods = {}
    for level, rows in by_level.items():
        methods[level] = rows[0]["method"]
        out.append(f"Level {level} ({rows[0]['method']})")
        out.append(_table(iter_header, [[r["iter"], r["residual"], r["E_n"], r["gamma"], r["J_n"]]
                                        for r in rows]))
        out.append("")
    summary_header = ["Level", "iterations", "|F^k|", "alpha_k", "Reg. dof", "elements",
                      "status", "phase", "H1 error"]
    out.append("Adaptive summary")
    out.append(_table(summary_header, [
        [r["level"], r["iterations"], r["residual"], r["alpha"], f"{r['reg_dof']}/{r['total_dof']}",
         r["elements"], r["status"], r["phase"], r["h1_error"]] for r in levels]))
    return "\n".join(out)


def cmd_report(args) -> int:
    run_dir = Path(args.directory)
    for name in ("iterations.csv", "levels.csv"):
        if not (run_dir / name).is_file():
            print(f"missing file: {run_dir / name}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        print(format_report(run_dir))
    except (KeyError, csv.Error) as exc:
        print(f"malformed CSV in {run_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regafem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every level")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the adaptive solver on the model problem")
    run.add_argument("config", help="config file with section.key = value lines")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config entry (repeatable)")
    run.add_argument("--output", help="output directory (overrides output.directory)")
    run.set_defaults(func=cmd_run)
    report = sub.add_parser("report", help="print iteration and summary tables for a run")
    report.add_argument("directory")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
