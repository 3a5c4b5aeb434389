"""Numerical verification along prolonged sections: evaluation, action
integrals by Gauss-Legendre quadrature, finite-difference variations of
the action under flows, criticality and on-shell symmetry checks.

Sections are closed-form expressions in the base coordinates; their
prolongations use exact symbolic partials, evaluated in double
precision.  Variation fields are multiplied by a polynomial bump factor
vanishing to fourth order on the domain boundary, so divergence terms
drop from every integration by parts arising here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy.polynomial.legendre as _leg

from . import expr as ex
from .expr import (BaseCoord, ConstSym, ElemFn, InvSum, JetContext, JetCoord,
                   JetExpr, OpaqueFn, jet_coords, partial, substitute)
from .jetcalc import VerticalField
from .multiindex import MultiIndex
from .variational import (Lagrangian, contract, contract_source,
                          euler_lagrange, jacobi, vertical_differential)


class NumericError(RuntimeError):
    """Numeric evaluation failure (domain error, opaque symbol, ...)."""


class InsufficientProlongation(NumericError):
    """Expression needs jet coordinates beyond the section's prolongation."""


class NotCritical(NumericError):
    """A check requiring a critical section was given a non-critical one."""

    def __init__(self, report: "CriticalityReport"):
        super().__init__(
            f"section is not critical: max |E| residual "
            f"{report.max_residual:.3e} exceeds tolerance {report.tol:.1e}")
        self.report = report


@dataclass(frozen=True)
class NumericConfig:
    """Numeric block of a problem file: domain box, quadrature nodes per
    axis, finite-difference step, acceptance tolerance."""

    domain: tuple[tuple[float, float], ...]
    nodes: int = 64
    step: float = 1e-3
    tol: float = 1e-6


def rel_close(a: float, b: float, rel: float = 1e-6, floor: float = 1e-8) -> bool:
    """|a - b| within rel * max(|a|, |b|), with an absolute floor."""
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), floor)


# ---------------------------------------------------------------------------
# compiled evaluation
# ---------------------------------------------------------------------------


def _code(e: JetExpr) -> str:
    if e.is_zero:
        return "0.0"
    parts = []
    for m, c in e.terms:
        factors = [f"({c.numerator}/{c.denominator})"]
        for atom, k in m:
            factors.append(f"({_atom_code(atom)})**{k}" if k != 1
                           else _atom_code(atom))
        parts.append("*".join(factors))
    return " + ".join(parts)


def _atom_code(atom) -> str:
    if isinstance(atom, BaseCoord):
        return f"b[{atom.axis}]"
    if isinstance(atom, ConstSym):
        return f"_m.{atom.name}"
    if isinstance(atom, ElemFn):
        return f"_m.{atom.fn}({_code(atom.arg)})"
    if isinstance(atom, InvSum):
        return f"1.0/({_code(atom.body)})"
    if isinstance(atom, JetCoord):
        raise NumericError(
            f"jet coordinate {atom!r} left unbound; evaluate along a section")
    if isinstance(atom, OpaqueFn):
        raise NumericError(
            f"opaque function {atom.name!r} has no numeric value")
    raise NumericError(f"cannot compile atom {atom!r}")


def compile_expr(e: JetExpr) -> Callable[[Sequence[float]], float]:
    """Compile a base-coordinate expression to a python function of the
    base point; reentrant and deterministic."""
    return eval(f"lambda b, _m=_math: {_code(e)}", {"_math": math})


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------


class NumericSection:
    """Closed-form section with quadrature configuration.

    ``exprs`` holds one base-coordinate expression per field; the
    prolongation table (j_r s)^i_sigma = d_sigma s^i is built from exact
    symbolic partials on demand.  When ``prolong_order`` is given,
    evaluating an expression of higher jet order raises
    InsufficientProlongation.
    """

    def __init__(self, ctx: JetContext, exprs: Sequence[JetExpr],
                 domain: Sequence[tuple[float, float]], nodes: int = 64,
                 prolong_order: int | None = None):
        if len(exprs) != ctx.m:
            raise ValueError(f"section needs {ctx.m} component expressions")
        for e in exprs:
            if jet_coords(e):
                raise ValueError(
                    "section expressions must use base coordinates only")
        if len(domain) != ctx.n:
            raise ValueError(f"domain needs {ctx.n} axis intervals")
        for lo, hi in domain:
            if not lo < hi:
                raise ValueError("domain bounds must satisfy lo < hi")
        if nodes < 1:
            raise ValueError("need at least one quadrature node per axis")
        self.ctx = ctx
        self.exprs = tuple(exprs)
        self.domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        self.nodes = nodes
        self.prolong_order = prolong_order
        self._derivs: dict[tuple[int, MultiIndex], JetExpr] = {}
        self._bound: dict[JetExpr, Callable] = {}
        self._grid: tuple[tuple[tuple[float, ...], ...], tuple[float, ...]] | None = None
        # exact affine map to the Gauss-native cube: x = mid + half * s
        self._mid = tuple((Fraction(lo) + Fraction(hi)) / 2
                          for lo, hi in self.domain)
        self._half = tuple((Fraction(hi) - Fraction(lo)) / 2
                           for lo, hi in self.domain)

    @staticmethod
    def from_config(ctx: JetContext, exprs: Sequence[JetExpr],
                    config: NumericConfig, prolong_order: int | None = None
                    ) -> "NumericSection":
        return NumericSection(ctx, exprs, config.domain, config.nodes,
                              prolong_order)

    def replaced(self, exprs: Sequence[JetExpr]) -> "NumericSection":
        sec = NumericSection(self.ctx, exprs, self.domain, self.nodes,
                             self.prolong_order)
        sec._grid = self._grid
        return sec

    # -- prolongation ---------------------------------------------------

    def derivative(self, i: int, sigma: MultiIndex) -> JetExpr:
        key = (i, sigma)
        got = self._derivs.get(key)
        if got is not None:
            return got
        if sigma.order() == 0:
            out = self.exprs[i]
        else:
            ax = next(a for a, c in enumerate(sigma.counts) if c > 0)
            lower = MultiIndex(tuple(
                c - 1 if a == ax else c for a, c in enumerate(sigma.counts)))
            out = partial(self.derivative(i, lower), self.ctx.base_atom(ax))
        self._derivs[key] = out
        return out

    def along(self, e: JetExpr) -> JetExpr:
        """Substitute the prolongation table into e, leaving a closed-form
        expression in the base coordinates."""
        coords = jet_coords(e)
        if self.prolong_order is not None:
            worst = max((jc.order for jc in coords), default=0)
            if worst > self.prolong_order:
                raise InsufficientProlongation(
                    f"expression of jet order {worst} exceeds the section's "
                    f"prolongation order {self.prolong_order}")
        bindings = {jc: self.derivative(jc.index, jc.sigma) for jc in coords}
        return substitute(e, bindings)

    def bind(self, e: JetExpr) -> Callable[[Sequence[float]], float]:
        """Compiled evaluator of e along the prolonged section, as a
        function of the physical base point.

        Internally the polynomial part is rewritten in the per-axis
        scaled coordinates s = (x - mid)/half before compilation: the
        expanded monomial form in the raw coordinates can carry huge
        mutually-cancelling coefficients (bump factors and their
        derivatives), while in scaled coordinates it stays balanced.
        """
        got = self._bound.get(e)
        if got is None:
            rescale = {
                self.ctx.base_atom(ax):
                    JetExpr.constant(self._mid[ax])
                    + JetExpr.constant(self._half[ax]) * self.ctx.base(ax)
                for ax in range(self.ctx.n)}
            f = compile_expr(substitute(self.along(e), rescale))
            mids = tuple(float(m) for m in self._mid)
            halves = tuple(float(h) for h in self._half)

            def wrapper(p, _f=f, _m=mids, _h=halves):
                return _f(tuple((x - m) / h
                                for x, m, h in zip(p, _m, _h)))

            got = wrapper
            self._bound[e] = got
        return got

    # -- quadrature -------------------------------------------------------

    def grid(self) -> tuple[tuple[tuple[float, ...], ...], tuple[float, ...]]:
        """Tensor-product Gauss-Legendre points and weights over the box,
        in a fixed row-major order."""
        if self._grid is None:
            xs, ws = _leg.leggauss(self.nodes)
            per_axis = []
            for lo, hi in self.domain:
                half = (hi - lo) / 2.0
                mid = (hi + lo) / 2.0
                per_axis.append([(float(mid + half * x), float(half * w))
                                 for x, w in zip(xs, ws)])
            points: list[tuple[float, ...]] = []
            weights: list[float] = []

            def rec(axis, pt, w):
                if axis == len(per_axis):
                    points.append(tuple(pt))
                    weights.append(w)
                    return
                for x, wx in per_axis[axis]:
                    rec(axis + 1, pt + [x], w * wx)

            rec(0, [], 1.0)
            self._grid = (tuple(points), tuple(weights))
        return self._grid


def eval_on_section(e: JetExpr, section: NumericSection,
                    point: Sequence[float]) -> float:
    """Value of e along the prolonged section at a base point."""
    f = section.bind(e)
    try:
        return f(tuple(point))
    except (ValueError, ZeroDivisionError, OverflowError) as err:
        raise NumericError(f"evaluation failed at {tuple(point)}: {err}") \
            from None


def integrate_on_section(e: JetExpr, section: NumericSection) -> float:
    f = section.bind(e)
    points, weights = section.grid()
    try:
        return math.fsum(w * f(p) for p, w in zip(points, weights))
    except (ValueError, ZeroDivisionError, OverflowError) as err:
        raise NumericError(f"quadrature evaluation failed: {err}") from None


def action(lag: Lagrangian, section: NumericSection) -> float:
    """The action integral of the Lagrangian over the section's box."""
    return integrate_on_section(lag.density, section)


def action_report(lag: Lagrangian, section: NumericSection
                  ) -> tuple[float, float]:
    """Action value plus a quadrature error estimate (the change under
    halving the node count; on smooth integrands doubling the nodes
    moves the value by less than this)."""
    value = action(lag, section)
    coarse = NumericSection(section.ctx, section.exprs, section.domain,
                            max(1, section.nodes // 2), section.prolong_order)
    return value, abs(value - action(lag, coarse))


# ---------------------------------------------------------------------------
# variations
# ---------------------------------------------------------------------------

Flow = Callable[[float, tuple[JetExpr, ...]], tuple[JetExpr, ...]]


def bump_factor(ctx: JetContext, domain: Sequence[tuple[float, float]]
                ) -> JetExpr:
    """prod_axis ((x-a)(b-x))^4, normalized to peak value 1.  Vanishes to
    fourth order on the boundary, enough to kill divergence terms for
    operators up to fourth order."""
    out = ex.ONE
    for axis, (lo, hi) in enumerate(domain):
        a = Fraction(lo)
        b = Fraction(hi)
        x = ctx.base(axis)
        peak = ((b - a) ** 2 / 4) ** 4
        out = out * ((x - a) * (b - x)) ** 4 / JetExpr.constant(peak)
    return out


@dataclass
class VariationConfig:
    """Variation fields (closed forms in the base coordinates; the bump
    factor is multiplied in by the engine), the finite-difference step,
    and optional explicit flows for fiber-dependent variations."""

    fields: Sequence[tuple[JetExpr, ...]] = ()
    step: float = 1e-3
    richardson: bool = False
    flows: Sequence[Flow] | None = None

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("finite-difference step must be positive")
        for comps in self.fields:
            for c in comps:
                if jet_coords(c):
                    raise ValueError(
                        "variation fields must be closed forms in the base "
                        "coordinates; use an explicit flow otherwise")


def _linear_flows(ctx: JetContext, vc: VariationConfig,
                  domain: Sequence[tuple[float, float]], count: int
                  ) -> list[Flow]:
    if vc.flows is not None:
        if len(vc.flows) < count:
            raise ValueError(f"need {count} flows, got {len(vc.flows)}")
        return list(vc.flows[:count])
    if len(vc.fields) < count:
        raise ValueError(f"need {count} variation fields, got {len(vc.fields)}")
    bump = bump_factor(ctx, domain)
    flows = []
    for comps in vc.fields[:count]:
        if len(comps) != ctx.m:
            raise ValueError(f"variation fields need {ctx.m} components")
        bumped = tuple(bump * c for c in comps)

        def flow(t, exprs, _bumped=bumped):
            ft = Fraction(t)
            return tuple(e + ft * c for e, c in zip(exprs, _bumped))

        flows.append(flow)
    return flows


def _varied_section(section: NumericSection, flows: Sequence[Flow],
                    ts: Sequence[float]) -> NumericSection:
    exprs = section.exprs
    for flow, t in zip(flows, ts):
        exprs = flow(t, exprs)
    return section.replaced(exprs)


def finite_diff_variation(lag: Lagrangian, section: NumericSection,
                          vc: VariationConfig, i: int) -> float:
    """i-th variation of the action as a central finite difference of the
    flow parameters at 0 (i in {1, 2})."""
    if i not in (1, 2):
        raise ValueError("only first and second variations are supported")
    flows = _linear_flows(section.ctx, vc, section.domain, i)

    def a(*ts: float) -> float:
        return action(lag, _varied_section(section, flows, ts))

    def diff(h: float) -> float:
        if i == 1:
            return (a(h) - a(-h)) / (2 * h)
        return (a(h, h) - a(h, -h) - a(-h, h) + a(-h, -h)) / (4 * h * h)

    h = vc.step
    if not vc.richardson:
        return diff(h)
    return (4 * diff(h / 2) - diff(h)) / 3


def bumped_fields(ctx: JetContext, domain, *component_tuples
                  ) -> list[VerticalField]:
    """Vertical fields from base-coordinate components, times the bump."""
    bump = bump_factor(ctx, domain)
    return [VerticalField(ctx, tuple(bump * c for c in comps))
            for comps in component_tuples]


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalityReport:
    max_residual: float
    per_component: tuple[float, ...]
    tol: float

    @property
    def is_critical(self) -> bool:
        return self.max_residual <= self.tol


def check_critical(lag: Lagrangian, section: NumericSection,
                   tol: float = 1e-8) -> CriticalityReport:
    """Max over quadrature nodes of |e_i| along the prolonged section."""
    e = euler_lagrange(lag)
    points, _w = section.grid()
    per = []
    for comp in e.components:
        f = section.bind(comp)
        per.append(max(abs(f(p)) for p in points) if points else 0.0)
    return CriticalityReport(max(per), tuple(per), tol)


@dataclass(frozen=True)
class OnshellSymmetryReport:
    lhs: float
    rhs: float
    difference: float
    pointwise_max: float
    residual: float

    def symmetric(self, rel: float = 1e-6, floor: float = 1e-8) -> bool:
        return rel_close(self.lhs, self.rhs, rel, floor)


def check_onshell_symmetry(lag: Lagrangian, section: NumericSection,
                           xi1: tuple[JetExpr, ...], xi2: tuple[JetExpr, ...],
                           crit_tol: float = 1e-8) -> OnshellSymmetryReport:
    """Integrated symmetry of the vertical differential along a critical
    section, for compactly supported fields.

    Both contractions are integrated over the box; pointwise they may
    differ by a total divergence, so the pointwise maximum difference is
    reported for inspection without being asserted small.  Refuses
    non-critical sections.
    """
    crit = check_critical(lag, section, crit_tol)
    if not crit.is_critical:
        raise NotCritical(crit)
    ctx = section.ctx
    f1, f2 = bumped_fields(ctx, section.domain, xi1, xi2)
    ve = vertical_differential(lag)
    e12 = contract(f1, f2, ve)
    e21 = contract(f2, f1, ve)
    lhs = integrate_on_section(e12, section)
    rhs = integrate_on_section(e21, section)
    g = section.bind(e12 - e21)
    points, _w = section.grid()
    pointwise = max(abs(g(p)) for p in points)
    return OnshellSymmetryReport(lhs, rhs, lhs - rhs, pointwise,
                                 crit.max_residual)


@dataclass(frozen=True)
class SecondVariationReport:
    finite_difference: float
    integral_vertical_differential: float
    integral_jacobi: float
    residual: float

    def consistent(self, rel: float = 1e-6, floor: float = 1e-8) -> bool:
        return (rel_close(self.finite_difference,
                          self.integral_vertical_differential, rel, floor)
                and rel_close(self.finite_difference, self.integral_jacobi,
                              rel, floor))


def second_variation_check(lag: Lagrangian, section: NumericSection,
                           xi1: tuple[JetExpr, ...], xi2: tuple[JetExpr, ...],
                           step: float = 1e-3, crit_tol: float = 1e-8
                           ) -> SecondVariationReport:
    """Compare the finite-difference second variation of the action along
    a critical section against the integrated contraction of the fields
    into the vertical differential and into the Jacobi morphism."""
    crit = check_critical(lag, section, crit_tol)
    if not crit.is_critical:
        raise NotCritical(crit)
    ctx = section.ctx
    vc = VariationConfig(fields=(xi1, xi2), step=step)
    fd = finite_diff_variation(lag, section, vc, 2)
    f1, f2 = bumped_fields(ctx, section.domain, xi1, xi2)
    ive = integrate_on_section(contract(f1, f2, vertical_differential(lag)),
                               section)
    ijac = integrate_on_section(contract(f1, f2, jacobi(lag)), section)
    return SecondVariationReport(fd, ive, ijac, crit.max_residual)


def first_variation_pair(lag: Lagrangian, section: NumericSection,
                         xi: tuple[JetExpr, ...], step: float = 1e-3
                         ) -> tuple[float, float]:
    """(finite-difference first variation, integral of xi | E along the
    section) for a bump-localized field; the two agree as step -> 0 and
    both vanish on critical sections."""
    ctx = section.ctx
    vc = VariationConfig(fields=(xi,), step=step)
    fd = finite_diff_variation(lag, section, vc, 1)
    (f,) = bumped_fields(ctx, section.domain, xi)
    sym = integrate_on_section(contract_source(f, euler_lagrange(lag)), section)
    return fd, sym
