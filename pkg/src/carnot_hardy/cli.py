"""Command-line front end.

    carnot-hardy symbolic  [--id ID ...] [--model M] [--alpha A --beta B] [--trials K] [--seed S]
    carnot-hardy verify    --id ID [--model M] [--field F ...] [--alpha ...] [--nodes P]
    carnot-hardy sweep     --id ID [--model M] [--field F] [--alpha-grid LIST] [--beta-grid LIST]
    carnot-hardy sharpness [--id PROBLEM ...] [--budget B] [--nodes P]
    carnot-hardy all       [--trials K] [--seed S] [--nodes P] [--budget B]

Exit status: 0 all pass, 2 a mathematical check failed, 1 usage or
inadmissible parameters, 3 a quadrature error cap was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import identities as ids
from . import inequalities as ineq
from . import sharpness as sharp
from .groups import parse_model
from .quadrature import ErrorCapExceeded, QuadratureError

SCHEMA = "carnot-hardy-report/1"
CSV_HEADER = ["kind", "id", "model", "field", "params", "lhs", "rhs", "deficit", "total_err", "verdict"]

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_CAP = 0, 1, 2, 3


def report_schema_version() -> str:
    return SCHEMA


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _num(text: str):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _grid(text: str):
    return [_num(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=20)
    common.add_argument("--nodes", type=int, help="quadrature nodes per axis")
    common.add_argument("--err-cap", type=float, help="fail with exit 3 above this quadrature error")
    common.add_argument("--model", help="euclid:N, heis:N or aniso:w1,w2,...")
    common.add_argument("--id", action="append", help="catalog id (repeatable)")
    common.add_argument("--field", action="append", help="field preset such as logbump:1,1 (repeatable)")
    for name in ineq.PARAM_NAMES:
        common.add_argument(f"--{name}", type=_num)
    common.add_argument("--alpha-grid", type=_grid)
    common.add_argument("--beta-grid", type=_grid)
    common.add_argument("--budget", type=int, default=60)

    p = _Parser(prog="carnot-hardy", description="Verify factorization identities and Hardy-type inequalities.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("symbolic", parents=[common], help="exact identity checks")
    sub.add_parser("verify", parents=[common], help="inequality deficits at one parameter point")
    sub.add_parser("sweep", parents=[common], help="inequality deficits over a parameter grid")
    sub.add_parser("sharpness", parents=[common], help="sharp-constant probes")
    sub.add_parser("all", parents=[common], help="every catalog entry with defaults")
    return p


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        bad = sorted(set(cfg) - known - {"command"})
        if bad:
            raise UsageError(f"unknown config keys {bad}")
        for k, v in cfg.items():
            if k in ineq.PARAM_NAMES and v is not None:
                cfg[k] = _num(str(v))
            if k in ("alpha_grid", "beta_grid") and isinstance(v, list):
                cfg[k] = [_num(str(x)) for x in v]
            if k in ("id", "field") and isinstance(v, str):
                cfg[k] = [v]
        sub.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
        args = parser.parse_args(argv)
    if args.trials < 1 or args.budget < 1:
        raise UsageError("trials and budget must be positive")
    if args.nodes is not None and args.nodes < 4:
        raise UsageError("nodes must be at least 4")
    return args


# ----------------------------------------------------------------------------
# runners


def _params(args) -> dict:
    return {k: getattr(args, k) for k in ineq.PARAM_NAMES if getattr(args, k) is not None}


def _model(text: str):
    try:
        return parse_model(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _field(model, text):
    try:
        return ineq.field_for(model, text)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad field {text!r}: {exc}") from None


def _spec(model, f, args):
    try:
        return ineq.default_spec(model, f, args.nodes, args.err_cap)
    except QuadratureError as exc:
        raise UsageError(str(exc)) from None


def run_symbolic(args, out: dict) -> None:
    idl = args.id or [c.id for c in ids.identity_catalog()]
    rows = []
    for cid in idl:
        try:
            case = ids.get_case(cid)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        models = [args.model] if args.model else list(case.models)
        plist = list(case.params)
        given = _params(args)
        if given:
            plist = [{**p, **given} for p in plist[:1]]
        for m in models:
            model = _model(m)
            for p in plist:
                try:
                    r = ids.check_identity(case, model, p, args.trials, args.seed)
                except (KeyError, ValueError) as exc:
                    raise UsageError(f"{cid} on {m}: {exc}") from None
                d = r.to_dict()
                if cid in ids.NEGATIVE_CONTROLS:
                    d["expected"] = "fail"
                    d["pass_as_control"] = not r.passed
                rows.append(d)
    out["symbolic"] = rows


def run_commutators(args, out: dict, models=("heis:1", "heis:2")) -> None:
    rows = []
    for m in models:
        for r in ids.check_commutators(m, args.trials, args.seed):
            rows.append(r.to_dict())
    out["commutators"] = rows


def _inequality_ids(args) -> list:
    idl = args.id or sorted(ineq.catalog())
    for i in idl:
        if i not in ineq.catalog():
            raise UsageError(f"unknown inequality id {i!r}")
    return idl


def run_verify(args, out: dict) -> None:
    rows = []
    for iid in _inequality_ids(args):
        for m in [args.model] if args.model else ineq.DEFAULT_MODELS[iid][:1]:
            model = _model(m)
            try:
                inst = ineq.build(iid, model, **_params(args))
            except ValueError as exc:
                raise UsageError(f"{iid}: {exc}") from None
            inst.check_admissible()
            for ftext in args.field or list(ineq.DEFAULT_FIELDS):
                f = _field(model, ftext)
                rows.append(ineq.evaluate(inst, f, _spec(model, f, args)).to_dict())
    out["inequalities"] = rows


def run_sweep(args, out: dict, plan=None) -> None:
    rows = []
    if plan is None:
        plan = [(i, m) for i in _inequality_ids(args)
                for m in ([args.model] if args.model else ineq.DEFAULT_MODELS[i][:1])]
    for iid, m in plan:
        model = _model(m)
        grid = dict(ineq.default_grid(iid))
        if args.alpha_grid is not None:
            grid["alpha"] = args.alpha_grid
        if args.beta_grid is not None:
            grid["beta"] = args.beta_grid
        fixed = {k: v for k, v in _params(args).items() if k not in grid}
        for ftext in args.field or list(ineq.DEFAULT_FIELDS):
            f = _field(model, ftext)
            try:
                res = ineq.sweep(iid, model, grid, f, _spec(model, f, args), fixed)
            except ValueError as exc:
                if isinstance(exc, QuadratureError):
                    raise
                raise UsageError(f"{iid} on {m}: {exc}") from None
            rows.append(res.to_dict())
    out["sweeps"] = rows


def run_checks(args, out: dict) -> None:
    rows = []
    fields = list(ineq.DEFAULT_FIELDS)
    for m in ("euclid:3", "heis:1"):
        model = _model(m)
        fs = [_field(model, t) for t in fields]
        for f in fs:
            spec = _spec(model, f, args)
            rows += [c.to_dict() for c in ineq.ibp_checks(model, f, spec)]
            if model.is_heisenberg:
                rows.append(ineq.real_term_check(model, f, spec).to_dict())
                rows.append(ineq.rewrite_check(model, f, spec).to_dict())
        for i, f in enumerate(fs):
            g = fs[(i + 1) % len(fs)]
            spec = ineq.default_spec(model, f, args.nodes, args.err_cap)
            for a, b in ((1, 0), (0, 1), (2, -1)):
                rows.append(ineq.adjointness_check(model, f, g, a, b, spec).to_dict())
    for m in ("euclid:3", "aniso:1,2"):
        model = _model(m)
        for t in fields:
            f = _field(model, t)
            rows += [c.to_dict() for c in ineq.reduction_checks(model, f, _spec(model, f, args))]
    out["checks"] = rows


def run_sharpness(args, out: dict) -> None:
    pids = args.id or list(sharp.problems())
    rows = []
    for pid in pids:
        try:
            prob = sharp.get_problem(pid)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        rows.append(sharp.probe(prob, args.budget, args.nodes).to_dict())
    out["sharpness"] = rows


# ----------------------------------------------------------------------------
# verdicts and output


def failures(results: dict) -> list[str]:
    bad = []
    for r in results.get("symbolic", []):
        ok = r.get("pass_as_control", r["pass"])
        if not ok:
            bad.append(f"identity {r['id']} on {r['model']}")
    for r in results.get("commutators", []):
        if not r["pass"]:
            bad.append(f"commutator {r['id']} on {r['model']}")
    for r in results.get("inequalities", []):
        if r["verdict"] != "pass":
            bad.append(f"inequality {r['id']} on {r['model']} / {r['field']}")
    for s in results.get("sweeps", []):
        if not s["all_pass"]:
            bad.append(f"sweep {s['id']} on {s['model']} / {s['field']}")
    for r in results.get("checks", []):
        if not r["pass"]:
            bad.append(f"check {r['name']} on {r['model']} / {r['field']}")
    for r in results.get("sharpness", []):
        if not r["respects_bound"]:
            bad.append(f"sharpness {r['problem_id']} below target")
    return bad


def covered_ids(results: dict) -> dict:
    """Catalog ids touched by a report, by catalog."""
    return {
        "identities": sorted({r["id"] for r in results.get("symbolic", [])}),
        "inequalities": sorted({r["id"] for r in results.get("inequalities", [])}
                               | {s["id"] for s in results.get("sweeps", [])}),
        "sharpness": sorted({r["problem_id"] for r in results.get("sharpness", [])}),
    }


def _config_echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("output", "config"):
            continue
        if isinstance(v, Fraction):
            v = str(v)
        elif isinstance(v, list):
            v = [str(x) if isinstance(x, Fraction) else x for x in v]
        out[k] = v
    return out


def make_report(args, results: dict, status: str, message: str = "") -> dict:
    bad = failures(results)
    return {
        "schema": SCHEMA,
        "command": args.command,
        "config": _config_echo(args),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "status": status,
        "message": message,
        "summary": {"pass": not bad and status == "complete", "failures": bad,
                    "coverage": covered_ids(results)},
        "results": results,
    }


def _csv_rows(results: dict):
    for r in results.get("symbolic", []) + results.get("commutators", []):
        ok = r.get("pass_as_control", r["pass"])
        yield ["identity", r["id"], r["model"], "", json.dumps(r["params"], sort_keys=True), "", "", "", "",
               "pass" if ok else "fail"]
    inq = list(results.get("inequalities", []))
    for s in results.get("sweeps", []):
        inq += [c["report"] for c in s["cells"] if "report" in c]
    for r in inq:
        yield ["inequality", r["id"], r["model"], r["field"], json.dumps(r["params"], sort_keys=True),
               repr(r["lhs"]), repr(r["rhs"]), repr(r["deficit"]), repr(r["total_err"]), r["verdict"]]
    for r in results.get("checks", []):
        yield ["check", r["name"], r["model"], r["field"], "", repr(r["lhs"][0]), repr(r["rhs"][0]),
               repr(r["lhs"][0] - r["rhs"][0]), repr(r["err"]), "pass" if r["pass"] else "fail"]
    for r in results.get("sharpness", []):
        yield ["sharpness", r["problem_id"], "", "", json.dumps(r["best_params"], sort_keys=True),
               repr(r["best_quotient"]), repr(r["target"]), repr(r["gap"]), repr(r["total_err"]),
               "pass" if r["respects_bound"] else "fail"]


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, default=_json_default) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"# {SCHEMA}"])
    w.writerow(CSV_HEADER)
    for row in _csv_rows(report["results"]):
        w.writerow(row)
    return buf.getvalue()


def _json_default(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _emit(args, report) -> None:
    text = render(report, args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


RUNNERS = {
    "symbolic": [run_symbolic],
    "verify": [run_verify],
    "sweep": [run_sweep],
    "sharpness": [run_sharpness],
}


def run(args) -> int:
    results: dict = {}
    try:
        if args.command == "all":
            sym = argparse.Namespace(**{**vars(args), "id": None, "model": None})
            run_symbolic(sym, results)
            neg = argparse.Namespace(**{**vars(sym), "id": list(ids.NEGATIVE_CONTROLS)})
            part: dict = {}
            run_symbolic(neg, part)
            results["symbolic"] += part["symbolic"]
            run_commutators(args, results)
            plain = argparse.Namespace(**{**vars(args), "id": None, "model": None, "field": None,
                                          "alpha_grid": None, "beta_grid": None,
                                          **{k: None for k in ineq.PARAM_NAMES}})
            run_sweep(plain, results, ineq.default_plan())
            run_checks(plain, results)
            run_sharpness(plain, results)
        else:
            if args.command == "symbolic" and not args.id:
                RUNNERS["symbolic"][0](args, results)
                run_commutators(args, results, [args.model] if args.model and "heis" in args.model
                                else ("heis:1", "heis:2"))
            else:
                for fn in RUNNERS[args.command]:
                    fn(args, results)
    except ineq.Inadmissible as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ErrorCapExceeded as exc:
        print(f"quadrature cap exceeded: {exc}", file=sys.stderr)
        _emit(args, make_report(args, results, "partial", str(exc)))
        return EXIT_CAP
    report = make_report(args, results, "complete")
    _emit(args, report)
    bad = report["summary"]["failures"]
    for b in bad:
        print(f"FAIL {b}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        return run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
