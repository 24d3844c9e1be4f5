"""Command-line front end: list scenarios, evaluate operators, verify.

Exit codes: 0 all checks pass, 1 verification failure, 2 usage or
construction error.  JSON output is byte-stable for equal configuration;
CSV columns are check_id, reference, max_dev, threshold, pass, worst_point.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field as dc_field

from . import expr as ex
from . import scenarios as sc
from .connection import ConnectionDataError, K_HORIZONTAL, K_VERTICAL, \
    build_connection, canonical_endos
from .covderiv import (
    ehresmann_curvature, torsion, total_derivative_equal_rank,
    total_derivative_nfold,
)
from .geometry import (
    ChartedSpace, CheckConfig, Frame, GeometryError, OffManifoldError,
    VectorField, lie_bracket,
)


@dataclass
class RunConfig:
    """Verification knobs as exposed on the command line."""

    scenario: str
    seed: int = 42
    samples: int = 20
    tolerance: float = 1e-8
    depth: int = 3
    fmt: str = "table"

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    def check_config(self) -> CheckConfig:
        return CheckConfig(self.seed, self.samples, self.tolerance,
                           self.depth)


@dataclass
class Report:
    """Per-check records plus the configuration echo and summary counts."""

    config: dict
    records: list = dc_field(default_factory=list)

    @property
    def summary(self) -> dict:
        passed = sum(1 for r in self.records if r.passed)
        return {"total": len(self.records), "passed": passed,
                "failed": len(self.records) - passed}

    @property
    def ok(self) -> bool:
        return self.summary["failed"] == 0

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "records": [r.as_dict() for r in self.records],
            "summary": self.summary,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check_id", "reference", "max_dev", "threshold",
                         "pass", "worst_point"])
        for r in self.records:
            writer.writerow([
                r.check_id, r.reference, repr(r.max_dev), repr(r.threshold),
                "pass" if r.passed else "FAIL",
                "" if r.worst_point is None
                else ";".join(repr(v) for v in r.worst_point)])
        return buf.getvalue()

    def to_table(self) -> str:
        lines = []
        width = max((len(r.check_id) for r in self.records), default=10)
        for r in self.records:
            status = "pass" if r.passed else "FAIL"
            lines.append(f"{r.check_id:<{width}}  {status}  "
                         f"max_dev={r.max_dev:.3e}  tol={r.threshold:.1e}")
        s = self.summary
        lines.append(f"{s['passed']}/{s['total']} checks passed"
                     + (f", {s['failed']} FAILED" if s["failed"] else ""))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------


class ScenarioFileError(Exception):
    def __init__(self, path, where, message):
        self.path = path
        self.where = where
        super().__init__(f"{path}: {where}: {message}")


def _need(doc, key, path, where, kind=None):
    if key not in doc:
        raise ScenarioFileError(path, where, f"missing key {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioFileError(path, f"{where}.{key}",
                                f"expected {kind.__name__}")
    return value


def load_scenario_file(path: str,
                       cfg: CheckConfig = None) -> sc.Scenario:
    """Build a scenario from a JSON document through the same constructors
    as the built-ins; every construction-time validation applies."""
    cfg = cfg or CheckConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioFileError(path, "file", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(path, "json", str(exc)) from None

    name = doc.get("name", os.path.splitext(os.path.basename(path))[0])
    space_doc = _need(doc, "space", path, "document", dict)
    coords = tuple(_need(space_doc, "coords", path, "space", list))
    intervals_doc = space_doc.get("intervals", {})
    intervals = tuple(tuple(intervals_doc.get(c, (-1.0, 1.0)))
                      for c in coords)
    constraints = tuple(_parse_in(path, f"space.constraints[{i}]", text)
                        for i, text in
                        enumerate(space_doc.get("constraints", [])))
    space = ChartedSpace(
        name, coords, intervals, constraints,
        sphere=bool(space_doc.get("sphere", False)),
        base_coords=tuple(space_doc.get("base", ())))

    fields = {}
    for fname, comps in _need(doc, "fields", path, "document", dict).items():
        if not isinstance(comps, list) or len(comps) != space.ambient_dim:
            raise ScenarioFileError(
                path, f"fields.{fname}",
                f"needs {space.ambient_dim} component expressions")
        parsed = [_parse_in(path, f"fields.{fname}[{i}]", c)
                  for i, c in enumerate(comps)]
        try:
            fields[fname] = VectorField.from_exprs(space, parsed, fname)
        except GeometryError as exc:
            raise ScenarioFileError(path, f"fields.{fname}", str(exc)) \
                from None

    split_doc = _need(doc, "split", path, "document", dict)
    orientation = split_doc.get("orientation", K_VERTICAL)
    if orientation not in (K_VERTICAL, K_HORIZONTAL):
        raise ScenarioFileError(path, "split.orientation",
                                f"unknown orientation {orientation!r}")

    def frame_of(names, label, where):
        missing = [n for n in names if n not in fields]
        if missing:
            raise ScenarioFileError(path, where,
                                    f"unknown field names {missing}")
        return Frame(tuple(fields[n] for n in names), label)

    k_names = _need(split_doc, "k", path, "split", list)
    block_names = _need(split_doc, "blocks", path, "split", list)
    k_frame = frame_of(k_names, k_names[0] if len(k_names) == 1 else "K",
                       "split.k")
    blocks = [frame_of(b, b[0] if len(b) == 1 else f"L{i + 1}",
                       f"split.blocks[{i}]")
              for i, b in enumerate(block_names)]
    block_fields = tuple(f for b in blocks for f in b.fields)
    if orientation == K_VERTICAL:
        vertical, horizontal = k_frame, Frame(block_fields, "H")
    else:
        vertical, horizontal = Frame(block_fields, "V"), k_frame

    try:
        conn = build_connection(space, vertical, horizontal, cfg)
        split = canonical_endos(conn, blocks, orientation, cfg,
                                pairings=split_doc.get("pairings"))
        if len(blocks) == 1 and k_frame.rank == blocks[0].rank:
            nabla = total_derivative_equal_rank(split, cfg)
            construction = "equal-rank"
        else:
            nabla = total_derivative_nfold(split, cfg)
            construction = "n-block"
    except (ConnectionDataError, GeometryError) as exc:
        raise ScenarioFileError(path, "split", str(exc)) from None

    expected = []
    for i, row in enumerate(doc.get("expected", [])):
        where = f"expected[{i}]"
        op = _need(row, "op", path, where, str)
        args = tuple(_need(row, "args", path, where, list))
        coeffs = {k: _parse_in(path, f"{where}.coeffs.{k}", v)
                  for k, v in row.get("coeffs", {}).items()}
        for a in args:
            if a not in fields:
                raise ScenarioFileError(path, where,
                                        f"unknown field {a!r}")
        expected.append(sc.ExpectedRow(op, args, coeffs,
                                       row.get("ref", "scenario file"),
                                       row.get("tol")))

    metric = None
    if doc.get("metric") == "ambient-dot":
        metric = sc.ambient_dot_metric(space)
    elif doc.get("metric") is not None:
        raise ScenarioFileError(path, "metric",
                                f"unsupported metric {doc['metric']!r}")

    # the solver's own ordering drives coefficient reporting
    frame_names = tuple(f.name for f in split.solver.fields)

    return sc.Scenario(
        name=name,
        section=doc.get("section", "scenario file"),
        description=doc.get("description", f"loaded from {path}"),
        space=space, conn=conn, split=split, nabla=nabla,
        fields=fields, frame_names=frame_names,
        expected=expected, construction=construction, metric=metric,
        notes=doc.get("notes", ""))


def _parse_in(path, where, text):
    try:
        return ex.parse(text) if isinstance(text, str) else ex.Const(float(text))
    except ex.ParseError as exc:
        raise ScenarioFileError(path, where, str(exc)) from None


def _get_scenario(name_or_path: str, cfg: CheckConfig) -> sc.Scenario:
    if name_or_path in sc.BUILTIN_BUILDERS:
        return sc.build_scenario(name_or_path, cfg)
    if os.path.exists(name_or_path):
        return load_scenario_file(name_or_path, cfg)
    known = ", ".join(sorted(sc.BUILTIN_BUILDERS))
    raise KeyError(f"unknown scenario {name_or_path!r} (built-ins: {known}; "
                   f"or pass a scenario file path)")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_list(fmt: str = "table") -> str:
    rows = [{"name": n, "section": sect, "dim": dim}
            for n, (sect, dim, _desc) in sorted(sc.CATALOG.items())]
    if fmt == "json":
        return json.dumps(rows, sort_keys=True, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "section", "dim", "description"])
        for n, (sect, dim, desc) in sorted(sc.CATALOG.items()):
            w.writerow([n, sect, dim, desc])
        return buf.getvalue()
    lines = []
    for n, (sect, dim, desc) in sorted(sc.CATALOG.items()):
        lines.append(f"{n:<20} dim {dim}  [{sect}]  {desc}")
    return "\n".join(lines)


def cmd_describe(name: str, cfg: CheckConfig) -> str:
    scen = _get_scenario(name, cfg)
    lines = [
        f"scenario: {scen.name}",
        f"section:  {scen.section}",
        f"space:    {scen.space.name}, coordinates "
        f"{', '.join(scen.space.coords)} (dim {scen.space.dim})",
        f"frame:    {', '.join(scen.frame_names)}",
        f"split:    K = {scen.split.k.name or 'K'} + "
        f"{len(scen.split.blocks)} block(s), orientation "
        f"{scen.split.orientation}",
        f"operator: {scen.nabla.provenance}",
        f"expected: {len(scen.expected)} table rows",
        f"fields:   {', '.join(sorted(scen.fields))}",
    ]
    if scen.description:
        lines.append(f"about:    {scen.description}")
    if scen.notes:
        lines.append(f"notes:    {scen.notes}")
    return "\n".join(lines)


_EVAL_OPS = ("nabla", "bracket", "torsion", "curvature", "field", "apply")


def cmd_eval(run: RunConfig, op: str, args: list, at: list) -> str:
    cfg = run.check_config()
    scen = _get_scenario(run.scenario, cfg)
    point = scen.space.point(at, project=True)

    def field_arg(name):
        if name not in scen.fields:
            known = ", ".join(sorted(scen.fields))
            raise KeyError(f"unknown field {name!r}; available: {known}")
        return scen.fields[name]

    if op == "nabla":
        out = scen.nabla(field_arg(args[0]), field_arg(args[1]))
    elif op == "bracket":
        out = lie_bracket(field_arg(args[0]), field_arg(args[1]))
    elif op == "torsion":
        out = torsion(scen.nabla, field_arg(args[0]), field_arg(args[1]))
    elif op == "curvature":
        out = ehresmann_curvature(scen.conn, field_arg(args[0]),
                                  field_arg(args[1]))
    elif op == "field":
        out = field_arg(args[0])
    elif op == "apply":
        endos = {"P_V": scen.conn.p_v, "P_H": scen.conn.p_h,
                 scen.split.s_total.name: scen.split.s_total,
                 scen.split.q_total.name: scen.split.q_total,
                 "P_K": scen.split.p_k}
        for e in (*scen.split.s_endos, *scen.split.q_endos,
                  *scen.split.p_blocks):
            endos[e.name] = e
        if args[0] not in endos:
            raise KeyError(f"unknown endomorphism {args[0]!r}; available: "
                           + ", ".join(sorted(endos)))
        out = endos[args[0]](field_arg(args[1]))
    else:
        raise KeyError(f"unknown op {op!r}; available: "
                       + ", ".join(_EVAL_OPS))

    comps = out.values(point)
    coeffs = scen.coefficients(out, point)
    if run.fmt == "json":
        return json.dumps({
            "scenario": scen.name, "op": op, "args": args,
            "point": list(point.values),
            "components": {c: v for c, v in zip(scen.space.coords, comps)},
            "frame_coefficients": coeffs,
        }, sort_keys=True, indent=2)
    if run.fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "name", "value"])
        for c, v in zip(scen.space.coords, comps):
            w.writerow(["component", c, repr(v)])
        for k, v in coeffs.items():
            w.writerow(["coefficient", k, repr(v)])
        return buf.getvalue()
    lines = [f"{op}({', '.join(args)}) at {point}"]
    lines.append("  components: "
                 + ", ".join(f"{c}={v:.10g}"
                             for c, v in zip(scen.space.coords, comps)))
    shown = {k: v for k, v in coeffs.items() if abs(v) > 1e-12}
    lines.append("  frame coefficients: "
                 + (", ".join(f"{k}={v:.10g}" for k, v in shown.items())
                    or "0"))
    return "\n".join(lines)


def cmd_verify(run: RunConfig) -> Report:
    cfg = run.check_config()
    scen = _get_scenario(run.scenario, cfg)
    records = sc.run_scenario_checks(scen, cfg)
    config_echo = {
        "scenario": run.scenario, "seed": run.seed,
        "samples": run.samples, "tolerance": run.tolerance,
        "depth": run.depth,
    }
    return Report(config_echo, records)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehresmann",
        description="construct covariant derivatives from connection data "
                    "and verify them numerically")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list built-in scenarios")
    p_list.add_argument("--format", default="table",
                        choices=("table", "json", "csv"))

    p_desc = sub.add_parser("describe", help="describe one scenario")
    p_desc.add_argument("scenario")

    p_eval = sub.add_parser("eval", help="evaluate an operator at a point")
    p_eval.add_argument("scenario")
    p_eval.add_argument("op", choices=_EVAL_OPS)
    p_eval.add_argument("args", nargs="+",
                        help="field names (two for binary operators)")
    p_eval.add_argument("--at", required=True,
                        help="comma-separated coordinates")
    p_eval.add_argument("--format", default="table",
                        choices=("table", "json", "csv"))

    p_verify = sub.add_parser("verify",
                              help="run the verification suite")
    p_verify.add_argument("scenario",
                          help="built-in name or scenario file path")
    p_verify.add_argument("--seed", type=int, default=42)
    p_verify.add_argument("--samples", type=int, default=20)
    p_verify.add_argument("--tol", type=float, default=1e-8)
    p_verify.add_argument("--depth", type=int, default=3)
    p_verify.add_argument("--format", default="table",
                          choices=("table", "json", "csv"))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "list":
            print(cmd_list(ns.format))
            return 0
        if ns.command == "describe":
            print(cmd_describe(ns.scenario, CheckConfig()))
            return 0
        if ns.command == "eval":
            run = RunConfig(ns.scenario, fmt=ns.format)
            expected_args = 1 if ns.op == "field" else 2
            if len(ns.args) != expected_args:
                print(f"op {ns.op!r} takes {expected_args} argument(s)",
                      file=sys.stderr)
                return 2
            at = [float(v) for v in ns.at.split(",")]
            print(cmd_eval(run, ns.op, ns.args, at))
            return 0
        if ns.command == "verify":
            run = RunConfig(ns.scenario, ns.seed, ns.samples, ns.tol,
                            ns.depth, ns.format)
            report = cmd_verify(run)
            if ns.format == "json":
                print(report.to_json())
            elif ns.format == "csv":
                print(report.to_csv(), end="")
            else:
                print(report.to_table())
            return 0 if report.ok else 1
    except (KeyError, ValueError, OffManifoldError, GeometryError,
            ConnectionDataError, ScenarioFileError, ex.ParseError,
            ex.EvalError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
