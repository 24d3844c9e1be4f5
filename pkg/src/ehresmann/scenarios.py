"""The worked example families, packaged as ready-made scenarios.

Each scenario bundles a charted space, a validated connection and split, the
covariant derivative built from them, a named field table, and a table of
expected results (frame-coefficient formulas, bracket tables, torsion
components) together with scenario-specific checks.  ``run_scenario_checks``
drives everything a verification run asserts: the expected tables, the
covariant-derivative axiom suite, split identities, the torsion/curvature
relation, parallelism of the structure tensors, and the projector
equivalence cross-check.

Families shipped: the trivial bundle over the plane with a circle fibre, the
Hopf fibration, tangent-bundle connections (affine with torsion, nonlinear,
and second-order-equation induced), and frame bundles with the column
decomposition of the fibre.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from . import expr as ex
from .connection import (
    K_HORIZONTAL, K_VERTICAL, EhresmannConnection, SplitStructure,
    build_connection, canonical_endos, validate_split,
)
from .covderiv import (
    CovDeriv, check_parallelism_equivalence, ehresmann_curvature, nabla_of_endo,
    total_derivative_equal_rank, total_derivative_nfold, torsion,
)
from .geometry import (
    ChartedSpace, CheckConfig, DEFAULT_CHECK, Endo11, Frame, GeometryError,
    Point, ScalarField, VectorField, _as_depth, directional, endo_add,
    endo_scale, env_depth, lie_derivative_endo, lie_bracket, vf_add,
    vf_scale, vf_sub,
)
from .jets import extract, value_of
from .report import CheckRecord, DevTracker


# ---------------------------------------------------------------------------
# small expression builders (zero/one folding keeps component trees lean)
# ---------------------------------------------------------------------------


def _E(entry):
    if isinstance(entry, str):
        return ex.parse(entry)
    if isinstance(entry, (int, float)):
        return ex.Const(float(entry))
    return entry


def _is_zero(e):
    return isinstance(e, ex.Const) and e.value == 0.0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return ex.BinOp("+", a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return ex.Const(0.0)
    if isinstance(a, ex.Const) and a.value == 1.0:
        return b
    if isinstance(b, ex.Const) and b.value == 1.0:
        return a
    return ex.BinOp("*", a, b)


def _neg(a):
    if _is_zero(a):
        return a
    return ex.Neg(a)


def _esum(terms):
    out = ex.Const(0.0)
    for t in terms:
        out = _add(out, t)
    return out


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Metric:
    """A symmetric pairing of vector fields, as a scalar-field rule."""

    space: object
    name: str
    _pair: object

    def pair(self, X: VectorField, Y: VectorField) -> ScalarField:
        return self._pair(X, Y)

    def validate_positive_definite(self, frame_fields, cfg: CheckConfig):
        worst = math.inf
        for p in self.space.sample_points(cfg):
            g = np.array([[self.pair(a, b).value_at(p) for b in frame_fields]
                          for a in frame_fields])
            worst = min(worst, float(np.linalg.eigvalsh(g)[0]))
        if worst <= 0:
            raise GeometryError(
                f"metric {self.name} is not positive definite on the frame: "
                f"smallest eigenvalue {worst:.3e}")
        return worst


def ambient_dot_metric(space) -> Metric:
    """The pairing induced by the ambient dot product."""

    def pair(X, Y):
        cost = max(X.cost, Y.cost)

        def fn(env):
            from .geometry import _comps_at, env_depth
            t = env_depth(env) - cost
            xs = _comps_at(X, env, t)
            ys = _comps_at(Y, env, t)
            acc = 0.0
            for a, b in zip(xs, ys):
                acc = acc + a * b
            return acc

        return ScalarField(space, fn, cost, f"g({X.name},{Y.name})")

    return Metric(space, "ambient-dot", pair)


def metric_compatibility_defect(nabla: CovDeriv, g: Metric, X, Y, Z,
                                point: Point) -> float:
    """X(g(Y,Z)) - g(nabla_X Y, Z) - g(Y, nabla_X Z) at a point."""
    lead = directional(X, g.pair(Y, Z)).value_at(point)
    return (lead - g.pair(nabla(X, Y), Z).value_at(point)
            - g.pair(Y, nabla(X, Z)).value_at(point))


def symmetrize(nabla: CovDeriv) -> CovDeriv:
    """Subtract half the torsion; the result is torsion-free."""

    def rule(X, Y):
        out = vf_sub(nabla(X, Y), vf_scale(0.5, torsion(nabla, X, Y)))
        out.name = f"∇'_{X.name}({Y.name})"
        return out

    return CovDeriv(nabla.space, rule, "symmetrized", ())


# ---------------------------------------------------------------------------
# scenario container and the generic check suites
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ExpectedRow:
    op: str                      # nabla | bracket | torsion | curvature
    args: tuple
    coeffs: dict
    ref: str
    tol: float | None = None


@dataclass(eq=False)
class Scenario:
    name: str
    section: str
    description: str
    space: ChartedSpace
    conn: EhresmannConnection
    split: SplitStructure
    nabla: CovDeriv
    fields: dict
    frame_names: tuple
    expected: list
    construction: str          # "equal-rank" | "n-block"
    metric: Metric | None = None
    extra_checks: list = dc_field(default_factory=list)
    notes: str = ""
    data: dict = dc_field(default_factory=dict)

    @property
    def solver(self):
        return self.split.solver

    def frame_fields(self) -> list:
        return [self.fields[n] for n in self.frame_names]

    def coefficients(self, vf: VectorField, point: Point) -> dict:
        comps = vf.values(point)
        coefs = self.solver.coefficients_at_point(point, comps)
        out = {f.name: c for f, c in zip(self.solver.fields, coefs)}
        for j in range(len(self.solver.fields), self.space.ambient_dim):
            out[f"offspan{j}"] = coefs[j]
        return out


def _eval_coeff(entry, point: Point) -> float:
    if callable(entry):
        return float(entry(point))
    if isinstance(entry, (int, float)):
        return float(entry)
    env = dict(zip(point.space.coords, point.values))
    return float(ex.evaluate(_E(entry), env))


def _op_field(scen: Scenario, row: ExpectedRow) -> VectorField:
    X = scen.fields[row.args[0]]
    Y = scen.fields[row.args[1]]
    if row.op == "nabla":
        return scen.nabla(X, Y)
    if row.op == "bracket":
        return lie_bracket(X, Y)
    if row.op == "torsion":
        return torsion(scen.nabla, X, Y)
    if row.op == "curvature":
        return ehresmann_curvature(scen.conn, X, Y)
    raise ValueError(f"unknown expected-result op {row.op!r}")


def expected_table_checks(scen: Scenario, cfg: CheckConfig) -> list:
    records = []
    pts = scen.space.sample_points(cfg)
    for row in scen.expected:
        out = _op_field(scen, row)
        tol = row.tol if row.tol is not None else cfg.tolerance
        tracker = DevTracker()
        for p in pts:
            coefs = scen.coefficients(out, p)
            for name, got in coefs.items():
                want = _eval_coeff(row.coeffs.get(name, 0.0), p) \
                    if not name.startswith("offspan") else 0.0
                tracker.update(abs(got - want), p.values)
        records.append(tracker.record(
            f"{scen.name}:{row.op}[{row.args[0]},{row.args[1]}]",
            row.ref, tol))
    return records


def _suite_rng(cfg: CheckConfig, scen: Scenario, label: str) -> random.Random:
    return random.Random(f"{cfg.seed}:{scen.name}:{label}")


def _random_scalar(rng, space) -> ScalarField:
    coords = space.coords
    a = rng.choice(coords)
    b = rng.choice(coords)
    c0 = rng.randint(1, 3)
    c1 = rng.randint(-2, 2)
    c2 = rng.randint(-2, 2)
    e = _add(ex.Const(float(c0)),
             _add(_mul(ex.Const(float(c1)), ex.Var(a)),
                  _mul(ex.Const(float(c2)), _mul(ex.Var(a), ex.Var(b)))))
    return ScalarField.from_expr(space, e)


def _random_combo(rng, fields, name) -> VectorField:
    out = None
    for f in fields:
        c = rng.choice([-1.0, 0.0, 1.0, 2.0])
        if c == 0.0:
            continue
        term = vf_scale(c, f)
        out = term if out is None else vf_add(out, term)
    if out is None:
        out = fields[0]
    out.name = name
    return out


def axiom_suite_checks(scen: Scenario, cfg: CheckConfig,
                       functions: int = 3) -> list:
    """Function-linearity, the Leibniz rule, and both additivities."""
    rng = _suite_rng(cfg, scen, "axioms")
    pts = scen.space.sample_points(cfg)
    frame = scen.frame_fields()
    nabla = scen.nabla
    trackers = {k: DevTracker() for k in
                ("function-linearity", "leibniz",
                 "additivity-direction", "additivity-argument")}
    for _ in range(functions):
        f = _random_scalar(rng, scen.space)
        X = rng.choice(frame)
        Y = rng.choice(frame)
        Z = rng.choice(frame)
        d1 = vf_sub(nabla(vf_scale(f, X), Y), vf_scale(f, nabla(X, Y)))
        d2 = vf_sub(nabla(X, vf_scale(f, Y)),
                    vf_add(vf_scale(directional(X, f), Y),
                           vf_scale(f, nabla(X, Y))))
        d3 = vf_sub(nabla(vf_add(X, Z), Y),
                    vf_add(nabla(X, Y), nabla(Z, Y)))
        d4 = vf_sub(nabla(X, vf_add(Y, Z)),
                    vf_add(nabla(X, Y), nabla(X, Z)))
        for key, dev_field in (("function-linearity", d1), ("leibniz", d2),
                               ("additivity-direction", d3),
                               ("additivity-argument", d4)):
            for p in pts:
                trackers[key].update(
                    max(abs(v) for v in dev_field.values(p)), p.values)
    return [trackers[k].record(f"{scen.name}:axiom:{k}",
                               "covariant-derivative axioms",
                               cfg.tolerance)
            for k in trackers]


def torsion_curvature_checks(scen: Scenario, cfg: CheckConfig,
                             draws: int = 3) -> list:
    """The vertical torsion of horizontal arguments carries the curvature.

    With the conventions used here (T = nabla_X Y - nabla_Y X - [X, Y] and
    R(X, Y) = P_V([P_H X, P_H Y])), the derivative of horizontal arguments
    is horizontal-valued, so P_V(T(P_H X, P_H Y)) = -R(X, Y) exactly; the
    check asserts that signed identity.
    """
    rng = _suite_rng(cfg, scen, "torsion-curvature")
    pts = scen.space.sample_points(cfg)
    conn = scen.conn
    frame = scen.frame_fields()
    tracker = DevTracker()
    for _ in range(draws):
        X = _random_combo(rng, frame, "X")
        Y = _random_combo(rng, frame, "Y")
        t = torsion(scen.nabla, conn.p_h(X), conn.p_h(Y))
        diff = vf_add(conn.p_v(t), ehresmann_curvature(conn, X, Y))
        for p in pts:
            tracker.update(max(abs(v) for v in diff.values(p)), p.values)
    return [tracker.record(f"{scen.name}:torsion-carries-curvature",
                           "vertical torsion is the connection curvature "
                           "with opposite sign",
                           cfg.tolerance)]


def torsion_property_checks(scen: Scenario, cfg: CheckConfig,
                            draws: int = 2) -> list:
    """Antisymmetry and function-bilinearity of the torsion."""
    rng = _suite_rng(cfg, scen, "torsion-props")
    pts = scen.space.sample_points(cfg)
    frame = scen.frame_fields()
    anti = DevTracker()
    flin = DevTracker()
    for _ in range(draws):
        X = rng.choice(frame)
        Y = rng.choice(frame)
        f = _random_scalar(rng, scen.space)
        d_anti = vf_add(torsion(scen.nabla, X, Y),
                        torsion(scen.nabla, Y, X))
        t_scaled = vf_scale(f, torsion(scen.nabla, X, Y))
        d_left = vf_sub(torsion(scen.nabla, vf_scale(f, X), Y), t_scaled)
        d_right = vf_sub(torsion(scen.nabla, X, vf_scale(f, Y)), t_scaled)
        for p in pts:
            anti.update(max(abs(v) for v in d_anti.values(p)), p.values)
            flin.update(max(abs(v) for v in d_left.values(p)), p.values)
            flin.update(max(abs(v) for v in d_right.values(p)), p.values)
    return [
        anti.record(f"{scen.name}:torsion-antisymmetry",
                    "torsion is antisymmetric", cfg.tolerance),
        flin.record(f"{scen.name}:torsion-function-bilinearity",
                    "torsion is function-linear in both slots",
                    cfg.tolerance),
    ]


def parallel_tensor_checks(scen: Scenario, cfg: CheckConfig) -> list:
    """Equal-rank case: the endomorphism pair is parallel.  N-fold case:
    every projector is parallel (the aggregate endomorphism is not)."""
    pts = scen.space.sample_points(cfg)
    frame = scen.frame_fields()
    records = []
    if scen.construction == "equal-rank":
        tensors = [scen.split.s_total, scen.split.q_total]
        label = "parallel-endomorphisms"
    else:
        tensors = [scen.split.p_k, *scen.split.p_blocks]
        label = "parallel-projectors"
    for T in tensors:
        tracker = DevTracker()
        for X in frame:
            for Y in frame:
                dev_field = nabla_of_endo(scen.nabla, T, X, Y)
                for p in pts:
                    tracker.update(
                        max(abs(v) for v in dev_field.values(p)), p.values)
        records.append(tracker.record(
            f"{scen.name}:{label}:{T.name}",
            "structure tensors are parallel", cfg.tolerance))
    return records


def split_identity_checks(scen: Scenario, cfg: CheckConfig) -> list:
    rep = validate_split(scen.split, cfg)
    out = []
    for r in rep.records:
        out.append(CheckRecord(f"{scen.name}:{r.check_id}", r.reference,
                               r.max_dev, r.threshold, r.passed,
                               r.worst_point))
    return out


def parallelism_equivalence_checks(scen: Scenario, cfg: CheckConfig) -> list:
    records = []
    probes = scen.split.all_fields
    for b in range(len(scen.nabla.parts)):
        rep = check_parallelism_equivalence(scen.nabla, b, probes, cfg)
        records.append(CheckRecord(
            f"{scen.name}:parallelism:{rep.block}:nabla-p", "projector parallelism",
            rep.nabla_p_dev, rep.threshold, rep.nabla_p_passes))
        records.append(CheckRecord(
            f"{scen.name}:parallelism:{rep.block}:image-stability",
            "block rules stay in their image",
            rep.image_dev, rep.threshold, rep.image_passes))
        records.append(CheckRecord(
            f"{scen.name}:parallelism:{rep.block}:equivalence",
            "both sides agree", 0.0 if rep.agree else 1.0, 0.5, rep.agree))
    return records


def run_scenario_checks(scen: Scenario, cfg: CheckConfig = DEFAULT_CHECK) -> list:
    """Every record a verification run asserts, in deterministic order."""
    records = []
    records += expected_table_checks(scen, cfg)
    records += axiom_suite_checks(scen, cfg)
    records += split_identity_checks(scen, cfg)
    records += torsion_curvature_checks(scen, cfg)
    records += torsion_property_checks(scen, cfg)
    records += parallel_tensor_checks(scen, cfg)
    records += parallelism_equivalence_checks(scen, cfg)
    for extra in scen.extra_checks:
        records += extra(cfg)
    return records


# ---------------------------------------------------------------------------
# trivial bundle over the plane
# ---------------------------------------------------------------------------


def trivial_r3(cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    """R^3 -> R^2 with a circle-angle fibre coordinate and tilted lifts."""
    space = ChartedSpace("trivial-r3", ("x", "y", "th"),
                         base_coords=("x", "y"))
    h1 = VectorField.from_exprs(space, ["1", "0", "cos(th)"], "H1")
    h2 = VectorField.from_exprs(space, ["0", "1", "sin(th)"], "H2")
    v = VectorField.from_exprs(space, ["0", "0", "1"], "V")
    conn = build_connection(space, Frame((v,), "V"), Frame((h1, h2), "H"),
                            cfg)
    split = canonical_endos(conn, [Frame((h1,), "H1"), Frame((h2,), "H2")],
                            K_VERTICAL, cfg)
    nabla = total_derivative_nfold(split, cfg)

    nonzero = {
        ("H1", "H1"): {"H1": "sin(th)"},
        ("H2", "H2"): {"H2": "-cos(th)"},
        ("H1", "V"): {"V": "sin(th)"},
        ("H2", "V"): {"V": "-cos(th)"},
    }
    names = ("H1", "H2", "V")
    expected = [ExpectedRow("nabla", (xn, yn), nonzero.get((xn, yn), {}),
                            "trivial bundle: component table")
                for xn in names for yn in names]

    def coframe_check(cfg_run: CheckConfig) -> list:
        # the covector dual to V annihilates both lifts and is
        # dth - cos(th) dx - sin(th) dy
        from .geometry import dual_coframe
        psi = dual_coframe(space, [Frame((h1, h2, v), "full")])[2]
        tracker = DevTracker()
        for p in space.sample_points(cfg_run):
            t = p.values[2]
            got = psi.values(p)
            want = [-math.cos(t), -math.sin(t), 1.0]
            tracker.update(max(abs(a - b) for a, b in zip(got, want)),
                           p.values)
        return [tracker.record("trivial-r3:fibre-coframe",
                               "dual coframe of the lifted frame",
                               cfg_run.tolerance)]

    return Scenario(
        name="trivial-r3",
        section="general examples",
        description="trivial bundle over the plane, circle-angle fibre, "
                    "two-block vertical-core split",
        space=space, conn=conn, split=split, nabla=nabla,
        fields={"H1": h1, "H2": h2, "V": v},
        frame_names=names,
        expected=expected,
        construction="n-block",
        extra_checks=[coframe_check],
        notes=("The covector dual to V against {H1, H2, V} solves to "
               "dth - cos(th) dx - sin(th) dy: the dy term carries a minus "
               "sign, which is what annihilating H2 = d/dy + sin(th) d/dth "
               "forces."),
    )


# ---------------------------------------------------------------------------
# Hopf bundle
# ---------------------------------------------------------------------------


HOPF_PROJECTION = ("x^2+y^2-z^2-w^2", "2*(x*w+y*z)", "2*(y*w-x*z)")


def hopf(cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    """The 3-sphere fibred over the 2-sphere, with the rotation frame."""
    space = ChartedSpace("hopf", ("x", "y", "z", "w"),
                         constraints=(ex.parse("x^2+y^2+z^2+w^2-1"),),
                         sphere=True)
    rotations = {
        "theta": ("y", "-x", "0", "0"),
        "phi": ("z", "0", "-x", "0"),
        "psi": ("w", "0", "0", "-x"),
        "xi": ("0", "0", "w", "-z"),
        "eta": ("0", "-w", "0", "y"),
        "zeta": ("0", "z", "-y", "0"),
    }
    named = {k: VectorField.from_exprs(space, comps, k)
             for k, comps in rotations.items()}
    lam = VectorField.from_exprs(space, ["z", "w", "-x", "-y"], "Lambda")
    sig = VectorField.from_exprs(space, ["w", "-z", "y", "-x"], "Sigma")
    v = VectorField.from_exprs(space, ["y", "-x", "-w", "z"], "V")

    conn = build_connection(space, Frame((v,), "V"),
                            Frame((lam, sig), "H"), cfg)
    split = canonical_endos(conn, [Frame((lam,), "H1"),
                                   Frame((sig,), "H2")], K_VERTICAL, cfg)
    nabla = total_derivative_nfold(split, cfg)
    metric = ambient_dot_metric(space)

    names = ("Lambda", "Sigma", "V")
    expected = [ExpectedRow("nabla", (xn, yn), {},
                            "Hopf: zero component table")
                for xn in names for yn in names]
    expected += [
        ExpectedRow("bracket", ("Sigma", "Lambda"), {"V": 2.0},
                    "Hopf bracket table", tol=1e-10),
        ExpectedRow("bracket", ("Lambda", "V"), {"Sigma": 2.0},
                    "Hopf bracket table", tol=1e-10),
        ExpectedRow("bracket", ("V", "Sigma"), {"Lambda": 2.0},
                    "Hopf bracket table", tol=1e-10),
    ]

    pi_exprs = tuple(ex.parse(s) for s in HOPF_PROJECTION)

    def projection_check(cfg_run: CheckConfig) -> list:
        # push V through the Jacobian of the bundle projection
        tracker = DevTracker()
        for p in space.sample_points(cfg_run):
            env = space.seed_env(p, 1)
            vv = v.values(p)
            for comp in pi_exprs:
                cj = ex.evaluate(comp, env)
                grad = [extract(cj, tuple(1 if j == i else 0
                                          for j in range(4)))
                        for i in range(4)]
                tracker.update(abs(sum(g * c for g, c in zip(grad, vv))),
                               p.values)
        return [tracker.record("hopf:projection-verticality",
                               "fibre field is vertical for the projection",
                               1e-9)]

    def levi_civita_check(cfg_run: CheckConfig) -> list:
        sym = symmetrize(nabla)
        frame = [lam, sig, v]
        t_tracker = DevTracker()
        for X in frame:
            for Y in frame:
                t = torsion(sym, X, Y)
                for p in space.sample_points(cfg_run):
                    t_tracker.update(max(abs(c) for c in t.values(p)),
                                     p.values)
        g_tracker = DevTracker()
        for X in frame:
            for Y in frame:
                for Z in frame:
                    for p in space.sample_points(cfg_run):
                        g_tracker.update(
                            abs(metric_compatibility_defect(
                                sym, metric, X, Y, Z, p)), p.values)
        return [
            t_tracker.record("hopf:symmetrized-torsion",
                             "symmetrized operator is torsion-free",
                             cfg_run.tolerance),
            g_tracker.record("hopf:levi-civita-compatibility",
                             "symmetrized operator preserves the round "
                             "metric", cfg_run.tolerance),
        ]

    fields = dict(named)
    fields.update({"Lambda": lam, "Sigma": sig, "V": v})

    return Scenario(
        name="hopf",
        section="general examples",
        description="Hopf fibration of the 3-sphere with the rotation "
                    "frame; the derivative kills the frame and its "
                    "symmetrization is the round Levi-Civita operator",
        space=space, conn=conn, split=split, nabla=nabla,
        fields=fields,
        frame_names=names,
        expected=expected,
        construction="n-block",
        metric=metric,
        extra_checks=[projection_check, levi_civita_check],
        notes="All computation happens in ambient coordinates; sampling "
              "normalizes ambient draws onto the unit sphere.",
    )


# ---------------------------------------------------------------------------
# tangent bundle: affine connection with torsion
# ---------------------------------------------------------------------------


def _tm_space(n: int, name: str) -> ChartedSpace:
    coords = tuple(f"x{i}" for i in range(1, n + 1)) + \
        tuple(f"u{i}" for i in range(1, n + 1))
    return ChartedSpace(name, coords,
                        base_coords=tuple(f"x{i}" for i in range(1, n + 1)))


def _gamma_table(n: int, gamma: dict, index_rank: int, base_only: bool,
                 space: ChartedSpace):
    """Normalize a coefficient dict into a dense expression table."""
    table = {}
    for key, entry in gamma.items():
        if len(key) != index_rank:
            raise ValueError(f"coefficient key {key} needs {index_rank} "
                             f"indices")
        if not all(1 <= i <= n for i in key):
            raise ValueError(f"coefficient key {key} out of range 1..{n}")
        e = _E(entry)
        if base_only:
            bad = [vname for vname in ex.free_vars(e)
                   if vname not in space.base_coords]
            if bad:
                raise ValueError(
                    f"coefficient {key} uses {bad}; these coefficients "
                    f"live on the base")
        table[key] = e
    return table


def affine_tangent(n: int, gamma: dict,
                   cfg: CheckConfig = DEFAULT_CHECK,
                   name: str = "affine-tangent") -> Scenario:
    """Tangent-bundle scenario for base connection coefficients G^c_ab.

    ``gamma`` maps 1-indexed triples (c, a, b) to expressions in the base
    coordinates.  Missing entries are zero.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    space = _tm_space(n, name)
    table = _gamma_table(n, gamma, 3, True, space)

    def g_expr(c, a, b):
        return table.get((c, a, b), ex.Const(0.0))

    hs, vs = [], []
    for a in range(1, n + 1):
        comps = []
        for i in range(1, n + 1):
            comps.append(ex.Const(1.0 if i == a else 0.0))
        for c in range(1, n + 1):
            comps.append(_neg(_esum(
                _mul(g_expr(c, a, b), ex.Var(f"u{b}"))
                for b in range(1, n + 1))))
        hs.append(VectorField(space,
                              (lambda comps: lambda env:
                               [ex.evaluate(e, env) for e in comps])(comps),
                              0, f"H{a}", exprs=tuple(comps)))
    for c in range(1, n + 1):
        vs.append(VectorField.coordinate(space, f"u{c}", f"V{c}"))

    conn = build_connection(space, Frame(tuple(vs), "V"),
                            Frame(tuple(hs), "H"), cfg)
    split = canonical_endos(conn, [Frame(tuple(hs), "H")], K_VERTICAL, cfg)
    nabla = total_derivative_equal_rank(split, cfg)

    oracle = _curvature_bracket_oracle(space, g_expr, n,
                                       lambda d: f"u{d}")

    names = tuple(f"H{a}" for a in range(1, n + 1)) + \
        tuple(f"V{c}" for c in range(1, n + 1))
    expected = []
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            expected.append(ExpectedRow(
                "nabla", (f"V{a}", f"V{b}"), {}, "affine: flat families"))
            expected.append(ExpectedRow(
                "nabla", (f"V{a}", f"H{b}"), {}, "affine: flat families"))
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"V{b}"),
                {f"V{c}": g_expr(c, a, b) for c in range(1, n + 1)},
                "affine: coefficient families"))
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"H{b}"),
                {f"H{c}": g_expr(c, a, b) for c in range(1, n + 1)},
                "affine: coefficient families"))
            expected.append(ExpectedRow(
                "bracket", (f"H{a}", f"V{b}"),
                {f"V{c}": g_expr(c, a, b) for c in range(1, n + 1)},
                "affine: bracket table"))
            if a != b:
                expected.append(ExpectedRow(
                    "bracket", (f"H{a}", f"H{b}"),
                    {f"V{c}": oracle(c, a, b) for c in range(1, n + 1)},
                    "affine: lift bracket vs direct curvature formula"))
                expected.append(ExpectedRow(
                    "torsion", (f"H{a}", f"H{b}"),
                    dict({f"H{c}": ex.BinOp("-", g_expr(c, a, b),
                                            g_expr(c, b, a))
                          for c in range(1, n + 1)},
                         **{f"V{c}": _negated(oracle(c, a, b))
                            for c in range(1, n + 1)}),
                    "affine: torsion components"))
                expected.append(ExpectedRow(
                    "curvature", (f"H{a}", f"H{b}"),
                    {f"V{c}": oracle(c, a, b) for c in range(1, n + 1)},
                    "affine: curvature vs direct formula"))

    return Scenario(
        name=name,
        section="tangent bundle",
        description="tangent-bundle lift of an affine base connection "
                    "with torsion",
        space=space, conn=conn, split=split, nabla=nabla,
        fields=dict({f"H{a}": hs[a - 1] for a in range(1, n + 1)},
                    **{f"V{c}": vs[c - 1] for c in range(1, n + 1)}),
        frame_names=names,
        expected=expected,
        construction="equal-rank",
        data={"n": n, "gamma": table},
    )


def _negated(fn):
    return lambda p: -fn(p)


def _curvature_bracket_oracle(space, g_expr, n, weight_name):
    """Direct evaluation of the bracket coefficient for lifted frames:
    K^c_dab = d_b G^c_ad - d_a G^c_bd + G^e_ad G^c_be - G^e_bd G^c_ae,
    contracted against the fibre coordinate named by ``weight_name(d)``.
    Jet-differentiated coefficients; fully independent of the bracket path.
    """

    def coefficient(c, a, b):
        def at_point(p: Point) -> float:
            env1 = space.seed_env(p, 1)
            env0 = dict(zip(space.coords, p.values))

            def g(cc, aa, bb):
                return ex.evaluate(g_expr(cc, aa, bb), env0)

            def dg(cc, aa, bb, wrt):
                jv = ex.evaluate(g_expr(cc, aa, bb), env1)
                idx = space.index(f"x{wrt}")
                orders = tuple(1 if i == idx else 0
                               for i in range(space.ambient_dim))
                return extract(jv, orders)

            total = 0.0
            for d in range(1, n + 1):
                k = dg(c, a, d, b) - dg(c, b, d, a)
                for e in range(1, n + 1):
                    k += g(e, a, d) * g(c, b, e) - g(e, b, d) * g(c, a, e)
                total += k * p.values[space.index(weight_name(d))]
            return total

        return at_point

    return coefficient


# ---------------------------------------------------------------------------
# tangent bundle: general nonlinear connection
# ---------------------------------------------------------------------------


def _entry_scalar(space, entry, name) -> ScalarField:
    if isinstance(entry, ScalarField):
        return entry
    return ScalarField.from_expr(space, _E(entry), name)


def _fibre_derivative(space, sf: ScalarField, b: int):
    """d(sf)/du^b as a point function, via one jet level."""
    idx = space.index(f"u{b}")
    orders = tuple(1 if i == idx else 0 for i in range(space.ambient_dim))

    def at_point(p: Point) -> float:
        env = space.seed_env(p, sf.cost + 1)
        return extract(sf.at(env), orders)

    return at_point


def _fibre_scalar_derivative(space, sf: ScalarField, b: int) -> ScalarField:
    """d(sf)/du^b as a ScalarField (one more derivative level)."""
    idx = space.index(f"u{b}")

    def fn(env):
        val = sf.at(env)
        return val.partials[idx]

    return ScalarField(space, fn, sf.cost + 1, f"d({sf.name})/du{b}")


def nonlinear_tangent(n: int, gamma: dict,
                      cfg: CheckConfig = DEFAULT_CHECK,
                      name: str = "nonlinear-tangent") -> Scenario:
    """Tangent-bundle scenario for connection coefficients G^b_a(x, u).

    ``gamma`` maps 1-indexed pairs (b, a) to expressions or scalar fields on
    the whole chart; missing entries are zero.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    space = _tm_space(n, name)
    table = {}
    for (b, a), entry in gamma.items():
        if not (1 <= b <= n and 1 <= a <= n):
            raise ValueError(f"coefficient key {(b, a)} out of range 1..{n}")
        table[(b, a)] = _entry_scalar(space, entry, f"G{b}_{a}")

    zero = ScalarField.constant(space, 0.0)

    def g_sf(b, a) -> ScalarField:
        return table.get((b, a), zero)

    cost = max((sf.cost for sf in table.values()), default=0)
    hs = []
    for a in range(1, n + 1):
        def fn(env, a=a):
            out = [1.0 if i == a else 0.0 for i in range(1, n + 1)]
            for b in range(1, n + 1):
                out.append(-g_sf(b, a).at(env))
            return out

        hs.append(VectorField(space, fn, cost, f"H{a}"))
    vs = [VectorField.coordinate(space, f"u{c}", f"V{c}")
          for c in range(1, n + 1)]

    conn = build_connection(space, Frame(tuple(vs), "V"),
                            Frame(tuple(hs), "H"), cfg)
    split = canonical_endos(conn, [Frame(tuple(hs), "H")], K_VERTICAL, cfg)
    nabla = total_derivative_equal_rank(split, cfg)

    def dg(c, a, b):
        # V_b(G^c_a), jet-differentiated
        return _fibre_derivative(space, g_sf(c, a), b)

    def h_applied(a, sf: ScalarField):
        """H_a(sf) as a point function: d/dx^a - G^e_a d/du^e applied."""

        def at_point(p: Point) -> float:
            env = space.seed_env(p, sf.cost + 1)
            val = sf.at(env)
            ix = space.index(f"x{a}")
            out = extract(val, tuple(1 if i == ix else 0
                                     for i in range(space.ambient_dim)))
            for e in range(1, n + 1):
                iu = space.index(f"u{e}")
                out -= g_sf(e, a).value_at(p) * extract(
                    val, tuple(1 if i == iu else 0
                               for i in range(space.ambient_dim)))
            return out

        return at_point

    names = tuple(f"H{a}" for a in range(1, n + 1)) + \
        tuple(f"V{c}" for c in range(1, n + 1))
    expected = []
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            expected.append(ExpectedRow(
                "nabla", (f"V{a}", f"V{b}"), {}, "nonlinear: flat families"))
            expected.append(ExpectedRow(
                "nabla", (f"V{a}", f"H{b}"), {}, "nonlinear: flat families"))
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"V{b}"),
                {f"V{c}": dg(c, a, b) for c in range(1, n + 1)},
                "nonlinear: fibre-derivative families"))
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"H{b}"),
                {f"H{c}": dg(c, a, b) for c in range(1, n + 1)},
                "nonlinear: fibre-derivative families"))
            if a != b:
                h_coeffs = {}
                v_coeffs = {}
                for c in range(1, n + 1):
                    h_coeffs[f"H{c}"] = (
                        lambda p, f1=dg(c, a, b), f2=dg(c, b, a):
                        f1(p) - f2(p))
                    v_coeffs[f"V{c}"] = (
                        lambda p, f1=h_applied(a, g_sf(c, b)),
                        f2=h_applied(b, g_sf(c, a)): f1(p) - f2(p))
                expected.append(ExpectedRow(
                    "torsion", (f"H{a}", f"H{b}"),
                    dict(h_coeffs, **v_coeffs),
                    "nonlinear: torsion components"))
                expected.append(ExpectedRow(
                    "curvature", (f"H{a}", f"H{b}"),
                    {f"V{c}": (lambda p, f1=h_applied(b, g_sf(c, a)),
                               f2=h_applied(a, g_sf(c, b)): f1(p) - f2(p))
                     for c in range(1, n + 1)},
                    "nonlinear: curvature vs direct formula"))

    return Scenario(
        name=name,
        section="tangent bundle",
        description="tangent-bundle scenario for a general (possibly "
                    "nonlinear) connection",
        space=space, conn=conn, split=split, nabla=nabla,
        fields=dict({f"H{a}": hs[a - 1] for a in range(1, n + 1)},
                    **{f"V{c}": vs[c - 1] for c in range(1, n + 1)}),
        frame_names=names,
        expected=expected,
        construction="equal-rank",
        data={"n": n, "gamma_sf": table},
    )


def potential_connection(n: int, forces, name_space=None) -> dict:
    """Coefficients G^c_a = -(1/2) d f^c / du^a built from force terms.

    Returns a table of scalar fields suitable for ``nonlinear_tangent``;
    its horizontal torsion vanishes identically.
    """
    space = name_space or _tm_space(n, "potential")
    table = {}
    for c in range(1, n + 1):
        sf = _entry_scalar(space, forces[c - 1], f"f{c}")
        for a in range(1, n + 1):
            d = _fibre_scalar_derivative(space, sf, a)

            def fn(env, d=d):
                return -0.5 * d.at(env)

            table[(c, a)] = ScalarField(space, fn, d.cost,
                                        f"-0.5*{d.name}")
    return table


# ---------------------------------------------------------------------------
# second-order equation fields and their connections
# ---------------------------------------------------------------------------


def _vertical_endo(space, n: int) -> Endo11:
    from .geometry import CovectorField
    terms = []
    for a in range(1, n + 1):
        comps = [ex.Const(1.0 if space.coords[i] == f"x{a}" else 0.0)
                 for i in range(space.ambient_dim)]
        dx = CovectorField.from_exprs(space, comps, f"dx{a}")
        va = VectorField.coordinate(space, f"u{a}", f"V{a}")
        terms.append((dx, va))
    return Endo11.from_terms(space, terms, "S")


def dilation_field(space, n: int) -> VectorField:
    comps = [ex.Const(0.0)] * n + [ex.Var(f"u{a}") for a in range(1, n + 1)]
    return VectorField.from_exprs(space, comps, "Delta")


def sode_field(space, n: int, forces) -> VectorField:
    """u^a d/dx^a + f^a d/du^a for the given force entries."""
    sfs = [_entry_scalar(space, f, f"f{b + 1}") for b, f in enumerate(forces)]
    cost = max(sf.cost for sf in sfs)

    def fn(env):
        out = [env[f"u{a}"] for a in range(1, n + 1)]
        out += [sf.at(env) for sf in sfs]
        return out

    return VectorField(space, fn, cost, "Gamma")


def sode_projector(n: int, forces, cfg: CheckConfig = DEFAULT_CHECK,
                   name: str = "sode-tangent"):
    """The connection induced by a second-order field.

    Returns (Gamma, P_H, scenario): the field u^a d/dx^a + f^a d/du^a, the
    horizontal projector (I - L_Gamma S)/2, and a full scenario whose
    horizontal frame is P_H applied to the coordinate lifts.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    space = _tm_space(n, name)
    force_sf = [_entry_scalar(space, f, f"f{b + 1}")
                for b, f in enumerate(forces)]
    gamma_field = sode_field(space, n, force_sf)
    s_endo = _vertical_endo(space, n)
    p_h = endo_scale(0.5, endo_add(
        Endo11.identity(space),
        endo_scale(-1.0, lie_derivative_endo(gamma_field, s_endo))),
        name="P_H")

    hs = []
    for a in range(1, n + 1):
        h = p_h(VectorField.coordinate(space, f"x{a}"))
        h.name = f"H{a}"
        hs.append(h)
    vs = [VectorField.coordinate(space, f"u{c}", f"V{c}")
          for c in range(1, n + 1)]

    conn = build_connection(space, Frame(tuple(vs), "V"),
                            Frame(tuple(hs), "H"), cfg)
    split = canonical_endos(conn, [Frame(tuple(hs), "H")], K_VERTICAL, cfg)
    nabla = total_derivative_equal_rank(split, cfg)

    def upsilon(b, a):
        # -(1/2) d f^b / du^a
        inner = _fibre_derivative(space, force_sf[b - 1], a)
        return lambda p: -0.5 * inner(p)

    def d2f(c, a, b):
        # V_b(Y^c_a) = -(1/2) d2 f^c / du^a du^b
        ia = space.index(f"u{a}")
        ib = space.index(f"u{b}")

        def at_point(p: Point) -> float:
            env = space.seed_env(p, force_sf[c - 1].cost + 2)
            val = force_sf[c - 1].at(env)
            orders = [0] * space.ambient_dim
            orders[ia] += 1
            orders[ib] += 1
            return -0.5 * extract(val, tuple(orders))

        return at_point

    names = tuple(f"H{a}" for a in range(1, n + 1)) + \
        tuple(f"V{c}" for c in range(1, n + 1))
    expected = []
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            expected.append(ExpectedRow(
                "nabla", (f"V{a}", f"V{b}"), {}, "sode: flat families"))
            expected.append(ExpectedRow(
                "nabla", (f"V{a}", f"H{b}"), {}, "sode: flat families"))
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"V{b}"),
                {f"V{c}": d2f(c, a, b) for c in range(1, n + 1)},
                "sode: force-Hessian families"))
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"H{b}"),
                {f"H{c}": d2f(c, a, b) for c in range(1, n + 1)},
                "sode: force-Hessian families"))

    delta = dilation_field(space, n)

    def projector_checks(cfg_run: CheckConfig) -> list:
        pts = space.sample_points(cfg_run)
        records = []
        # S(Gamma) = Delta
        tracker = DevTracker()
        diff = vf_sub(s_endo(gamma_field), delta)
        for p in pts:
            tracker.update(max(abs(c) for c in diff.values(p)), p.values)
        records.append(tracker.record(f"{name}:s-gamma-is-dilation",
                                      "second-order condition", 1e-10))
        # projector coefficients match the force derivatives
        tracker = DevTracker()
        for a in range(1, n + 1):
            ha = hs[a - 1]
            for p in pts:
                vals = ha.values(p)
                for b in range(1, n + 1):
                    want = upsilon(b, a)(p)
                    got = -vals[space.index(f"u{b}")]
                    tracker.update(abs(got - want), p.values)
                for i in range(1, n + 1):
                    tracker.update(abs(vals[i - 1]
                                       - (1.0 if i == a else 0.0)), p.values)
        records.append(tracker.record(
            f"{name}:projector-coefficients",
            "horizontal coefficients are the half force slopes", 1e-10))
        # idempotence and the vertical complement
        tracker = DevTracker()
        for a in range(1, n + 1):
            dx = VectorField.coordinate(space, f"x{a}")
            du = VectorField.coordinate(space, f"u{a}")
            once = p_h(dx)
            for p in pts:
                d1 = vf_sub(p_h(once), once)
                tracker.update(max(abs(c) for c in d1.values(p)), p.values)
                tracker.update(max(abs(c) for c in p_h(du).values(p)),
                               p.values)
        records.append(tracker.record(f"{name}:projector-laws",
                                      "idempotence and verticality",
                                      cfg_run.tolerance))
        # the default forces are quadratic in the fibre: a genuine spray
        records.append(spray_record(name, gamma_field, force_sf, cfg_run))
        return records

    def sufficiency_extra(cfg_run: CheckConfig) -> list:
        rep = sode_sufficiency_check(scenario, cfg_run)
        return rep.records

    scenario = Scenario(
        name=name,
        section="tangent bundle",
        description="connection induced by a second-order equation field "
                    "through the vertical endomorphism",
        space=space, conn=conn, split=split, nabla=nabla,
        fields=dict({f"H{a}": hs[a - 1] for a in range(1, n + 1)},
                    **{f"V{c}": vs[c - 1] for c in range(1, n + 1)},
                    Gamma=gamma_field, Delta=delta),
        frame_names=names,
        expected=expected,
        construction="equal-rank",
        extra_checks=[projector_checks, sufficiency_extra],
        data={"n": n, "forces": force_sf,
              "gamma_sf": {(b, a): ScalarField(
                  space,
                  (lambda b=b, a=a:
                   lambda env: -0.5 * force_sf[b - 1].at(env).partials[
                       space.index(f"u{a}")])(),
                  force_sf[b - 1].cost + 1, f"Y{b}_{a}")
                  for b in range(1, n + 1) for a in range(1, n + 1)}},
    )
    return gamma_field, p_h, scenario


def spray_defect(space, forces, cfg: CheckConfig = DEFAULT_CHECK) -> float:
    """max |Delta(f^b) - 2 f^b| over sampled points."""
    n = space.dim // 2
    worst = 0.0
    for p in space.sample_points(cfg):
        for sf in forces:
            env = space.seed_env(p, sf.cost + 1)
            val = sf.at(env)
            dil = 0.0
            for a in range(1, n + 1):
                ia = space.index(f"u{a}")
                dil += p.values[ia] * extract(
                    val, tuple(1 if i == ia else 0
                               for i in range(space.ambient_dim)))
            worst = max(worst, abs(dil - 2.0 * value_of(val)))
    return worst


def is_spray(gamma_field: VectorField, forces,
             cfg: CheckConfig = DEFAULT_CHECK,
             tol: float | None = None) -> bool:
    """Degree-2 fibre homogeneity of the force terms."""
    space = gamma_field.space
    sfs = [_entry_scalar(space, f, f"f{b + 1}") for b, f in enumerate(forces)]
    return spray_defect(space, sfs, cfg) < (tol or cfg.tolerance)


def spray_record(name, gamma_field, force_sf, cfg) -> CheckRecord:
    dev = spray_defect(gamma_field.space, force_sf, cfg)
    return CheckRecord(f"{name}:spray", "force terms are fibre-quadratic",
                       dev, cfg.tolerance, dev < cfg.tolerance)


def homogeneity_check(space, gamma_sf: dict,
                      cfg: CheckConfig = DEFAULT_CHECK,
                      tol: float | None = None) -> bool:
    """Degree-1 fibre homogeneity: Delta(G^b_a) = G^b_a at sampled points."""
    n = space.dim // 2
    worst = 0.0
    for p in space.sample_points(cfg):
        for sf in gamma_sf.values():
            env = space.seed_env(p, sf.cost + 1)
            val = sf.at(env)
            dil = 0.0
            for a in range(1, n + 1):
                ia = space.index(f"u{a}")
                dil += p.values[ia] * extract(
                    val, tuple(1 if i == ia else 0
                               for i in range(space.ambient_dim)))
            worst = max(worst, abs(dil - value_of(val)))
    return worst < (tol or cfg.tolerance)


@dataclass
class SodeSufficiencyReport:
    """Outcome of the sufficiency test on a tangent-bundle scenario."""

    nabla_delta_dev: float
    horizontal_torsion_dev: float
    threshold: float
    reconstruction_dev: float | None = None
    reconstructed_spray: bool | None = None
    records: list = dc_field(default_factory=list)

    @property
    def conditions_met(self) -> bool:
        return (self.nabla_delta_dev < self.threshold
                and self.horizontal_torsion_dev < self.threshold)


def sode_sufficiency_check(scen: Scenario,
                           cfg: CheckConfig = DEFAULT_CHECK
                           ) -> SodeSufficiencyReport:
    """If the dilation field is horizontally parallel and the horizontal
    torsion vanishes, the connection comes from a second-order field; the
    reconstruction is performed and compared, and the reconstructed field
    must be a spray."""
    if "gamma_sf" not in scen.data:
        raise ValueError("scenario carries no fibre coefficient table")
    n = scen.data["n"]
    gamma_sf = scen.data["gamma_sf"]
    space = scen.space
    zero = ScalarField.constant(space, 0.0)

    def g_sf(b, a):
        return gamma_sf.get((b, a), zero)

    pts = space.sample_points(cfg)
    delta = scen.fields.get("Delta") or dilation_field(space, n)
    hs = [scen.fields[f"H{a}"] for a in range(1, n + 1)]

    a_tracker = DevTracker()
    for h in hs:
        out = scen.nabla(h, delta)
        for p in pts:
            a_tracker.update(max(abs(c) for c in out.values(p)), p.values)
    b_tracker = DevTracker()
    for i in range(n):
        for j in range(i + 1, n):
            t = torsion(scen.nabla, hs[i], hs[j])
            ph_t = scen.conn.p_h(t)
            for p in pts:
                b_tracker.update(max(abs(c) for c in ph_t.values(p)),
                                 p.values)

    tol = cfg.tolerance
    report = SodeSufficiencyReport(a_tracker.max_dev, b_tracker.max_dev, tol)
    report.records.append(a_tracker.record(
        f"{scen.name}:sufficiency:dilation-parallel",
        "horizontal derivative of the dilation field", tol))
    report.records.append(b_tracker.record(
        f"{scen.name}:sufficiency:horizontal-torsion",
        "horizontal torsion of the connection", tol))

    if not report.conditions_met:
        return report

    # reconstruct: force terms f^b = -u^a G^b_a, then the induced projector
    force_cost = max(sf.cost for sf in gamma_sf.values()) if gamma_sf else 0
    forces = []
    for b in range(1, n + 1):
        def fn(env, b=b):
            t = env_depth(env) - force_cost
            acc = 0.0
            for a in range(1, n + 1):
                ua = _as_depth(env[f"u{a}"], t, space.ambient_dim)
                ga = _as_depth(g_sf(b, a).at(env), t, space.ambient_dim)
                acc = acc + ua * ga
            return -acc

        forces.append(ScalarField(space, fn, force_cost, f"f{b}"))
    gamma_field = sode_field(space, n, forces)
    s_endo = _vertical_endo(space, n)
    p_h = endo_scale(0.5, endo_add(
        Endo11.identity(space),
        endo_scale(-1.0, lie_derivative_endo(gamma_field, s_endo))))

    rec_tracker = DevTracker()
    for c in range(1, n + 1):
        hc = p_h(VectorField.coordinate(space, f"x{c}"))
        for p in pts:
            vals = hc.values(p)
            for b in range(1, n + 1):
                got = -vals[space.index(f"u{b}")]
                want = g_sf(b, c).value_at(p)
                rec_tracker.update(abs(got - want), p.values)
    report.reconstruction_dev = rec_tracker.max_dev
    report.records.append(rec_tracker.record(
        f"{scen.name}:sufficiency:reconstruction",
        "induced connection coincides with the input", tol))

    spray_dev = spray_defect(space, forces, cfg)
    report.reconstructed_spray = spray_dev < tol
    report.records.append(CheckRecord(
        f"{scen.name}:sufficiency:reconstructed-spray",
        "reconstructed field is a spray", spray_dev, tol,
        report.reconstructed_spray))
    return report


# ---------------------------------------------------------------------------
# frame bundle and the column decomposition of n x n matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubspaceBasis:
    """Column subspaces of n x n matrices, invariant under the permutation.

    ``bases[k][a]`` is an integer matrix (tuple of row tuples) whose only
    nonzero entry sits in column k.  The n^2 matrices jointly span, exactly.
    """

    n: int
    cycle: tuple
    bases: tuple

    def permutation_matrix(self) -> tuple:
        return tuple(tuple(1 if j == self.cycle[i] else 0
                           for j in range(self.n))
                     for i in range(self.n))


def _validate_cycle(n: int, cycle) -> tuple:
    cycle = tuple(int(c) for c in cycle)
    if sorted(cycle) != list(range(n)):
        raise ValueError(f"{cycle} is not a permutation of 0..{n - 1}")
    seen = {0}
    cur = cycle[0]
    while cur not in seen:
        seen.add(cur)
        cur = cycle[cur]
    if len(seen) != n:
        raise ValueError(f"{cycle} does not have a single orbit")
    return cycle


def _mat_mul_int(A, B, n):
    return tuple(tuple(sum(A[i][m] * B[m][j] for m in range(n))
                       for j in range(n)) for i in range(n))


def _exact_rank(vectors):
    rows = [[Fraction(x) for x in vec] for vec in vectors]
    rank = 0
    cols = len(rows[0]) if rows else 0
    r = 0
    for c in range(cols):
        piv = None
        for i in range(r, len(rows)):
            if rows[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pivot = rows[r][c]
        rows[r] = [x / pivot for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        r += 1
        rank += 1
    return rank


def cycle_decomposition(n: int, cycle) -> SubspaceBasis:
    """Split n x n matrices into the n column subspaces and verify that the
    single-orbit permutation acts invariantly on each, with exact integer
    arithmetic throughout."""
    if n < 1:
        raise ValueError("n must be at least 1")
    cycle = _validate_cycle(n, cycle)
    bases = tuple(
        tuple(tuple(tuple(1 if (i == a and j == k) else 0
                          for j in range(n)) for i in range(n))
              for a in range(n))
        for k in range(n))
    basis = SubspaceBasis(n, cycle, bases)
    A = basis.permutation_matrix()
    for k in range(n):
        for mat in bases[k]:
            prod = _mat_mul_int(A, mat, n)
            for i in range(n):
                for j in range(n):
                    if j != k and prod[i][j] != 0:
                        raise GeometryError(
                            f"column subspace {k} is not invariant under "
                            f"the permutation action")
    flat = [tuple(x for row in mat for x in row)
            for k in range(n) for mat in bases[k]]
    if _exact_rank(flat) != n * n:
        raise GeometryError("column subspaces do not span the matrix space")
    return basis


def frame_bundle(n: int, cycle, gamma: dict,
                 cfg: CheckConfig = DEFAULT_CHECK,
                 name: str = "frame-bundle") -> Scenario:
    """Frame-bundle scenario: base coordinates plus one fibre coordinate per
    matrix slot, horizontal lifts of an affine base connection, and the
    flipped split whose blocks are the column subspaces of the fibre."""
    if n < 1:
        raise ValueError("n must be at least 1")
    basis = cycle_decomposition(n, cycle)
    x_names = tuple(f"x{i}" for i in range(1, n + 1))
    w_names = tuple(f"w{b}_{A}" for A in range(1, n + 1)
                    for b in range(1, n + 1))
    space = ChartedSpace(
        name, x_names + w_names,
        intervals=tuple((-1.0, 1.0) for _ in x_names)
        + tuple((0.5, 1.5) for _ in w_names),
        base_coords=x_names)
    table = _gamma_table(n, gamma, 3, True, space)

    def g_expr(c, a, b):
        return table.get((c, a, b), ex.Const(0.0))

    hs = []
    for i in range(1, n + 1):
        comps = [ex.Const(1.0 if ii == i else 0.0)
                 for ii in range(1, n + 1)]
        for A in range(1, n + 1):
            for k in range(1, n + 1):
                comps.append(_neg(_esum(
                    _mul(g_expr(k, i, j), ex.Var(f"w{j}_{A}"))
                    for j in range(1, n + 1))))
        hs.append(VectorField.from_exprs(space, comps, f"H{i}"))

    v_blocks = []
    v_fields = {}
    for A in range(1, n + 1):
        block = []
        for b in range(1, n + 1):
            f = VectorField.coordinate(space, f"w{b}_{A}", f"V{A}_{b}")
            block.append(f)
            v_fields[f"V{A}_{b}"] = f
        v_blocks.append(Frame(tuple(block), f"V{A}"))

    all_v = tuple(f for bl in v_blocks for f in bl.fields)
    conn = build_connection(space, Frame(all_v, "V"),
                            Frame(tuple(hs), "H"), cfg)
    split = canonical_endos(conn, v_blocks, K_HORIZONTAL, cfg)
    nabla = total_derivative_nfold(split, cfg)

    names = tuple(f"H{i}" for i in range(1, n + 1)) + tuple(
        f"V{A}_{b}" for A in range(1, n + 1) for b in range(1, n + 1))
    fields = dict({f"H{i}": hs[i - 1] for i in range(1, n + 1)}, **v_fields)

    expected = []
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            expected.append(ExpectedRow(
                "nabla", (f"H{a}", f"H{b}"),
                {f"H{c}": g_expr(c, a, b) for c in range(1, n + 1)},
                "frame bundle: horizontal family"))
            for A in range(1, n + 1):
                expected.append(ExpectedRow(
                    "nabla", (f"H{a}", f"V{A}_{b}"),
                    {f"V{A}_{c}": g_expr(c, a, b)
                     for c in range(1, n + 1)},
                    "frame bundle: fibre family"))
                expected.append(ExpectedRow(
                    "nabla", (f"V{A}_{a}", f"H{b}"), {},
                    "frame bundle: flat families"))
                expected.append(ExpectedRow(
                    "bracket", (f"H{a}", f"V{A}_{b}"),
                    {f"V{A}_{c}": g_expr(c, a, b)
                     for c in range(1, n + 1)},
                    "frame bundle: bracket table"))
                for B in range(1, n + 1):
                    expected.append(ExpectedRow(
                        "nabla", (f"V{A}_{a}", f"V{B}_{b}"), {},
                        "frame bundle: flat families"))
            if a != b:
                coeffs = {f"H{c}": ex.BinOp("-", g_expr(c, a, b),
                                            g_expr(c, b, a))
                          for c in range(1, n + 1)}
                for A in range(1, n + 1):
                    oracle = _curvature_bracket_oracle(
                        space, g_expr, n, lambda d, A=A: f"w{d}_{A}")
                    for c in range(1, n + 1):
                        coeffs[f"V{A}_{c}"] = _negated(oracle(c, a, b))
                expected.append(ExpectedRow(
                    "torsion", (f"H{a}", f"H{b}"), coeffs,
                    "frame bundle: torsion with fibre weights"))

    def decomposition_check(cfg_run: CheckConfig) -> list:
        try:
            cycle_decomposition(n, cycle)
            ok = True
        except (GeometryError, ValueError):
            ok = False
        return [CheckRecord(f"{name}:cycle-decomposition",
                            "column subspaces: invariance, dimension, "
                            "direct sum", 0.0 if ok else 1.0, 0.5, ok)]

    return Scenario(
        name=name,
        section="frame bundle",
        description="frame bundle with fibre coordinates split into "
                    "column subspaces, horizontal lifts of an affine base "
                    "connection",
        space=space, conn=conn, split=split, nabla=nabla,
        fields=fields,
        frame_names=names,
        expected=expected,
        construction="n-block",
        extra_checks=[decomposition_check],
        data={"n": n, "basis": basis, "gamma": table},
    )


# ---------------------------------------------------------------------------
# built-in registry
# ---------------------------------------------------------------------------


DEFAULT_AFFINE_GAMMA = {(1, 1, 2): "x1", (2, 2, 1): "x2", (1, 1, 1): "0.5"}
DEFAULT_NONLINEAR_GAMMA = {(1, 1): "u1^2", (1, 2): "u2", (2, 2): "x1*u1"}
DEFAULT_SODE_FORCES = ("-(u1^2)-u1*u2", "x1*u1^2-u2^2")
DEFAULT_FRAME_GAMMA = {(1, 1, 2): "x1", (2, 2, 1): "x2", (2, 1, 1): "1"}


def _affine_builtin(cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    return affine_tangent(2, DEFAULT_AFFINE_GAMMA, cfg)


def _nonlinear_builtin(cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    return nonlinear_tangent(2, DEFAULT_NONLINEAR_GAMMA, cfg)


def _sode_builtin(cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    return sode_projector(2, DEFAULT_SODE_FORCES, cfg)[2]


def _frame_bundle_builtin(cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    return frame_bundle(2, (1, 0), DEFAULT_FRAME_GAMMA, cfg)


BUILTIN_BUILDERS = {
    "trivial-r3": trivial_r3,
    "hopf": hopf,
    "affine-tangent": _affine_builtin,
    "nonlinear-tangent": _nonlinear_builtin,
    "sode-tangent": _sode_builtin,
    "frame-bundle": _frame_bundle_builtin,
}


def build_scenario(name: str, cfg: CheckConfig = DEFAULT_CHECK) -> Scenario:
    try:
        builder = BUILTIN_BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_BUILDERS))
        raise KeyError(f"unknown scenario {name!r}; built-ins: {known}") \
            from None
    return builder(cfg)


CATALOG = {
    "trivial-r3": ("general examples", 3,
                   "trivial bundle over the plane, circle-angle fibre"),
    "hopf": ("general examples", 3,
             "Hopf fibration of the 3-sphere, rotation frame"),
    "affine-tangent": ("tangent bundle", 4,
                       "lift of an affine base connection with torsion"),
    "nonlinear-tangent": ("tangent bundle", 4,
                          "general nonlinear tangent-bundle connection"),
    "sode-tangent": ("tangent bundle", 4,
                     "connection induced by a second-order equation field"),
    "frame-bundle": ("frame bundle", 6,
                     "frame bundle with column-split fibre coordinates"),
}
