"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 not solvable, 3 path budget
exceeded, 4 verification failed. JSON goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, fields

from . import oracle
from .controller import gains, optimal_cost
from .model import ModelError, load_model, two_mode_example
from .riccati import solve_riccati, tables_to_dict
from .simulate import exact_expected_cost, iter_trajectories, monte_carlo_cost
from .verify import DEFAULT_TOL, reproduce, verify_instance

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_UNSOLVABLE, EXIT_BUDGET, EXIT_VERIFY = 0, 1, 2, 3, 4
COMMANDS = ("solve", "gains", "simulate", "cost", "oracle", "verify", "reproduce")


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    seed: int = 0
    runs: int = 1000
    format: str = "json"
    budget: int = oracle.DEFAULT_PATH_BUDGET
    tol: float | None = None
    dump: str | None = None
    workers: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**doc)
        if cfg.command not in COMMANDS:
            raise ValueError(f"unknown command {cfg.command!r}")
        if cfg.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")
        if cfg.runs < 1:
            raise ValueError("runs must be >= 1")
        return cfg


def _emit(payload: dict, fmt: str, rows=None, out=None):
    out = out or sys.stdout
    if fmt == "csv" and rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in rows:
            writer.writerow(row)
        out.write(buf.getvalue())
    else:
        payload = {"schema_version": SCHEMA_VERSION, **payload}
        out.write(json.dumps(payload) + "\n")


def _load(cfg: RunConfig):
    if cfg.model is None:
        return two_mode_example()
    return load_model(cfg.model)


def _matrix_rows(name, arr, lead):
    """Flatten a (time, mode, i, j) stack into CSV rows."""
    for t in range(arr.shape[0]):
        for l in range(arr.shape[1]):
            mat = arr[t, l].reshape(arr.shape[2], -1)
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    yield (name, *lead, t, l + 1, i, j, repr(float(mat[i, j])))


def cmd_solve(cfg: RunConfig) -> int:
    model, _ = _load(cfg)
    tables = solve_riccati(model)
    doc = tables_to_dict(tables)
    if cfg.dump:
        with open(cfg.dump, "w") as fh:
            json.dump(doc, fh)
    rows = [("quantity", "j", "t", "mode", "i", "col", "value")]
    for name, arr in (("W", tables.W), ("T0", tables.T0), ("P", tables.P), ("P0", tables.P0)):
        rows.extend(_matrix_rows(name, arr, (0,)))
    for j in range(tables.Tu.shape[0]):
        rows.extend(_matrix_rows("T", tables.Tu[j], (j + 1,)))
    _emit({"tables": doc}, cfg.format, rows)
    if not tables.solvable:
        t, l = tables.failure
        print(f"W not positive definite at t={t}, mode={l + 1}", file=sys.stderr)
        return EXIT_UNSOLVABLE
    return EXIT_OK


def _schedule(model):
    tables = solve_riccati(model)
    if not tables.solvable:
        t, l = tables.failure
        print(f"W not positive definite at t={t}, mode={l + 1}", file=sys.stderr)
        return tables, None
    return tables, gains(tables)


def cmd_gains(cfg: RunConfig) -> int:
    model, _ = _load(cfg)
    _, schedule = _schedule(model)
    if schedule is None:
        return EXIT_UNSOLVABLE
    rows = [("t", "mode", "kind", "j", "i", "col", "value")]
    for t in range(schedule.Kx.shape[0]):
        for l in range(schedule.Kx.shape[1]):
            for (i, c), v in _enumerate2(schedule.Kx[t, l]):
                rows.append((t, l + 1, "K_x", 0, i, c, repr(v)))
            for j in range(schedule.Ku.shape[0]):
                for (i, c), v in _enumerate2(schedule.Ku[j, t, l]):
                    rows.append((t, l + 1, "K_u", j + 1, i, c, repr(v)))
    _emit(schedule.to_dict(), cfg.format, rows)
    return EXIT_OK


def _enumerate2(mat):
    for i in range(mat.shape[0]):
        for c in range(mat.shape[1]):
            yield (i, c), float(mat[i, c])


def cmd_simulate(cfg: RunConfig) -> int:
    model, init = _load(cfg)
    _, schedule = _schedule(model)
    if schedule is None:
        return EXIT_UNSOLVABLE
    mean, stderr = monte_carlo_cost(model, schedule, init, cfg.runs, cfg.seed, cfg.workers)
    if cfg.dump:
        with open(cfg.dump, "w") as fh:
            for traj in iter_trajectories(model, schedule, init, cfg.runs, cfg.seed):
                fh.write(json.dumps({"schema_version": SCHEMA_VERSION, **traj.to_dict()}) + "\n")
    rows = [("runs", "seed", "mean", "stderr"), (cfg.runs, cfg.seed, repr(mean), repr(stderr))]
    _emit({"runs": cfg.runs, "seed": cfg.seed, "mean": mean, "stderr": stderr}, cfg.format, rows)
    return EXIT_OK


def cmd_cost(cfg: RunConfig) -> int:
    model, init = _load(cfg)
    tables, schedule = _schedule(model)
    if schedule is None:
        return EXIT_UNSOLVABLE
    j_star = optimal_cost(model, tables, init)
    exact = exact_expected_cost(model, schedule, init, cfg.budget)
    rows = [("optimal_cost", "exact_expected_cost"), (repr(j_star), repr(exact))]
    _emit({"optimal_cost": j_star, "exact_expected_cost": exact}, cfg.format, rows)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    model, init = _load(cfg)
    qp = oracle.build_qp(model, init, cfg.budget)
    doc = {"variables": int(qp.b.size), "qp": qp.to_dict(), "hessian_pd": oracle.hessian_pd(qp)}
    code = EXIT_OK
    try:
        z, val = oracle.solve_qp(qp)
        doc["minimum"] = val
        doc["policy"] = oracle.PolicyTree.from_vector(model, z).to_dict()
    except oracle.HessianNotPD as exc:
        print(str(exc), file=sys.stderr)
        code = EXIT_UNSOLVABLE
    if cfg.dump:
        with open(cfg.dump, "w") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, **doc}, fh)
    rows = [("variables", "minimum"), (doc["variables"], repr(doc.get("minimum")))]
    _emit(doc, cfg.format, rows)
    return code


def cmd_verify(cfg: RunConfig) -> int:
    model, init = _load(cfg)
    tol = DEFAULT_TOL if cfg.tol is None else cfg.tol
    report = verify_instance(model, init, tol, cfg.budget)
    rows = [("check", "value", "tol", "passed")]
    rows += [(c["name"], repr(c["value"]), repr(c["tol"]), c["passed"]) for c in report["checks"]]
    _emit(report, cfg.format, rows)
    if not report["solvable"]:
        return EXIT_UNSOLVABLE
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_reproduce(cfg: RunConfig) -> int:
    model, init = _load(cfg)
    report = reproduce(model, init, mc_runs=50, seed=cfg.seed)
    rows = [("entry", "computed", "printed", "abs_gap", "status")]
    for item in report["table"] + report["gains"]:
        rows.append((item["entry"], item["computed"], item["printed"], repr(item["abs_gap"]), item["status"]))
    c = report["optimal_cost"]
    rows.append(("J*", c["closed_form"], c["printed"], repr(abs(c["printed_gap"])), c["status"]))
    _emit(report, cfg.format, rows)
    for item in report["table"] + report["gains"]:
        if item["status"] != "MATCH":
            print(f"{item['status']}: {item['entry']}", file=sys.stderr)
    print(f"AMBIGUOUS: J* computed {c['closed_form']:.4f} vs printed {c['printed']}", file=sys.stderr)
    return EXIT_OK


HANDLERS = {
    "solve": cmd_solve, "gains": cmd_gains, "simulate": cmd_simulate, "cost": cmd_cost,
    "oracle": cmd_oracle, "verify": cmd_verify, "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpdelay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("model_path", nargs="?", help="model JSON (default: bundled example)")
        p.add_argument("--model", dest="model", default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--runs", type=int, default=1000)
        p.add_argument("--budget", type=int, default=oracle.DEFAULT_PATH_BUDGET)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--dump", default=None, help="write the full artifact to this path")
        p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    model = args.model or args.model_path
    try:
        cfg = RunConfig.from_dict({
            "command": args.command, "model": model, "seed": args.seed, "runs": args.runs,
            "format": args.format, "budget": args.budget, "tol": args.tol,
            "dump": args.dump, "workers": args.workers,
        })
        return HANDLERS[cfg.command](cfg)
    except (ModelError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except oracle.PathBudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
