"""Euler-Lagrange, Helmholtz, adjoint, vertical differential / Jacobi
morphisms, and iterated quotient variations.

Conventions
-----------
A source form is stored by its components e_i; a bilinear form by a
finitely supported map (sigma, i, j) -> A^sigma_{ij}, contracted as

    contract(xi1, xi2, A) = sum A^sigma_{ij} * xi1^i * D_sigma(xi2^j),

i.e. the derivative slot acts on the second field and the first field
enters undifferentiated.  The formal adjoint of A (integration by parts
plus index transpose) has components

    (A*)^rho_{ji} = sum over sigma >= rho of
        (-1)^{|sigma|} C(sigma, rho) D_{sigma-rho}(A^sigma_{ij}),

with C the per-axis product of binomial coefficients; the adjoint is an
involution.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .expr import (JetContext, JetCoord, JetExpr, ZERO, add, add_many,
                   jet_order, mul, partial, substitute)
from .jetcalc import VerticalField, total_derivative, total_derivative_multi
from .multiindex import MultiIndex, enumerate_up_to


@dataclass(frozen=True)
class Lagrangian:
    """Lagrangian density L in lambda = L v_X."""

    ctx: JetContext
    density: JetExpr

    @property
    def order(self) -> int:
        return jet_order(self.density)


@dataclass(frozen=True)
class SourceForm:
    """Components e_i of a source form e_i omega^i wedge v_X."""

    ctx: JetContext
    components: tuple[JetExpr, ...]

    def __post_init__(self):
        if len(self.components) != self.ctx.m:
            raise ValueError(
                f"source form needs {self.ctx.m} components, "
                f"got {len(self.components)}")

    @property
    def order(self) -> int:
        return max((jet_order(c) for c in self.components), default=0)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)


class BilinearForm:
    """Components A^sigma_{ij} of A^sigma_{ij} omega^i_sigma (x) omega^j (x) v_X,
    stored sparsely and canonically ordered."""

    __slots__ = ("ctx", "_entries")

    def __init__(self, ctx: JetContext,
                 components: Mapping[tuple[MultiIndex, int, int], JetExpr]):
        self.ctx = ctx
        items = []
        for (sigma, i, j), val in components.items():
            if sigma.dimension != ctx.n:
                raise ValueError("component multi-index has wrong dimension")
            if not (0 <= i < ctx.m and 0 <= j < ctx.m):
                raise ValueError(f"fiber index out of range in ({i}, {j})")
            if not val.is_zero:
                items.append(((sigma, i, j), val))
        items.sort(key=lambda kv: (kv[0][0].order(), kv[0][0].counts,
                                   kv[0][1], kv[0][2]))
        self._entries = tuple(items)

    def entries(self) -> tuple[tuple[tuple[MultiIndex, int, int], JetExpr], ...]:
        return self._entries

    def component(self, sigma: MultiIndex, i: int, j: int) -> JetExpr:
        for (s, a, b), val in self._entries:
            if s == sigma and a == i and b == j:
                return val
        return ZERO

    @property
    def is_zero(self) -> bool:
        return not self._entries

    @property
    def order(self) -> int:
        """Maximal |sigma| with a nonzero component."""
        return max((s.order() for (s, _i, _j), _v in self._entries), default=0)

    def transpose(self) -> "BilinearForm":
        return BilinearForm(self.ctx, {(s, j, i): v
                                       for (s, i, j), v in self._entries})

    def scaled(self, c) -> "BilinearForm":
        factor = JetExpr.constant(c) if isinstance(c, (int, Fraction)) else c
        return BilinearForm(self.ctx, {k: mul(v, factor)
                                       for k, v in self._entries})

    def __add__(self, other: "BilinearForm") -> "BilinearForm":
        acc: dict[tuple[MultiIndex, int, int], JetExpr] = dict(self._entries)
        for k, v in other._entries:
            acc[k] = add(acc[k], v) if k in acc else v
        return BilinearForm(self.ctx, acc)

    def __sub__(self, other: "BilinearForm") -> "BilinearForm":
        return self + other.scaled(-1)

    def __eq__(self, other):
        return (isinstance(other, BilinearForm)
                and self._entries == other._entries)

    def __hash__(self):
        return hash(self._entries)

    def __repr__(self):
        lines = ", ".join(
            f"A^{{{s.render(self.ctx.base_names) or '0'}}}_{{{i+1} {j+1}}}="
            f"{v!r}" for (s, i, j), v in self._entries)
        return f"BilinearForm({lines or '0'})"


# ---------------------------------------------------------------------------
# the variational-sequence morphisms
# ---------------------------------------------------------------------------


def euler_lagrange(lag: Lagrangian) -> SourceForm:
    """Euler-Lagrange source form: e_i = sum (-1)^{|sigma|} D_sigma(d^sigma_i L)."""
    ctx = lag.ctx
    r = lag.order
    sigmas = enumerate_up_to(ctx.n, r)
    comps = []
    for i in range(ctx.m):
        pieces = []
        for sigma in sigmas:
            p = partial(lag.density, ctx.jet_atom(i, sigma))
            if p.is_zero:
                continue
            t = total_derivative_multi(p, sigma, ctx)
            if sigma.order() % 2:
                t = -t
            pieces.append(t)
        comps.append(add_many(pieces))
    return SourceForm(ctx, tuple(comps))


def helmholtz(src: SourceForm) -> BilinearForm:
    """Local-variationality obstruction of a source form.

    Components:

        H^sigma_{ij} = d^sigma_i e_j
            - sum over rho of (-1)^{|sigma u rho|} C(sigma u rho, rho)
              D_rho(d^{sigma u rho}_j e_i)

    where the rho-sum runs up to order(e) + 1 - |sigma|, which covers
    every nonzero term for source forms of any order (partials beyond
    order(e) vanish).  C is the per-axis binomial product; the source
    form is locally variational iff every component is identically zero.
    """
    ctx = src.ctx
    bound = src.order + 1
    comps: dict[tuple[MultiIndex, int, int], JetExpr] = {}
    for sigma in enumerate_up_to(ctx.n, src.order):
        for i in range(ctx.m):
            for j in range(ctx.m):
                lead = partial(src.components[j], ctx.jet_atom(i, sigma))
                pieces = []
                for rho in enumerate_up_to(ctx.n, bound - sigma.order()):
                    tau = sigma.union(rho)
                    p = partial(src.components[i], ctx.jet_atom(j, tau))
                    if p.is_zero:
                        continue
                    c = Fraction(tau.binom(rho))
                    if tau.order() % 2:
                        c = -c
                    pieces.append(mul(JetExpr.constant(c),
                                      total_derivative_multi(p, rho, ctx)))
                val = lead - add_many(pieces)
                if not val.is_zero:
                    comps[(sigma, i, j)] = val
    return BilinearForm(ctx, comps)


def helmholtz_skew(src: SourceForm) -> BilinearForm:
    """Skew-symmetrization H = (H~ - H~*)/2 of the Helmholtz form, the
    display normalization; H and H~ have the same kernel."""
    ht = helmholtz(src)
    return (ht - adjoint(ht)).scaled(Fraction(1, 2))


def is_locally_variational(src: SourceForm) -> bool:
    return helmholtz(src).is_zero


def adjoint(a: BilinearForm) -> BilinearForm:
    """Formal adjoint under integration by parts (see module docstring)."""
    ctx = a.ctx
    acc: dict[tuple[MultiIndex, int, int], list[JetExpr]] = {}
    for (sigma, i, j), val in a.entries():
        sign = -1 if sigma.order() % 2 else 1
        for rho in sigma.subindices():
            c = Fraction(sign * sigma.binom(rho))
            t = mul(JetExpr.constant(c),
                    total_derivative_multi(val, sigma.sub(rho), ctx))
            acc.setdefault((rho, j, i), []).append(t)
    return BilinearForm(ctx, {k: add_many(v) for k, v in acc.items()})


def linearize(src: SourceForm) -> BilinearForm:
    """Fiber linearization of a source form:
    components V^sigma_{ij} = d^sigma_j e_i, so that
    contract(xi1, xi2, V) = sum xi1^i D_sigma(xi2^j) d^sigma_j e_i."""
    ctx = src.ctx
    comps: dict[tuple[MultiIndex, int, int], JetExpr] = {}
    for i in range(ctx.m):
        for sigma in enumerate_up_to(ctx.n, jet_order(src.components[i])):
            for j in range(ctx.m):
                p = partial(src.components[i], ctx.jet_atom(j, sigma))
                if not p.is_zero:
                    comps[(sigma, i, j)] = p
    return BilinearForm(ctx, comps)


def vertical_differential(lag: Lagrangian) -> BilinearForm:
    """Vertical differential of the Euler-Lagrange morphism (its
    linearization along the fibres)."""
    return linearize(euler_lagrange(lag))


def jacobi(lag: Lagrangian) -> BilinearForm:
    """Jacobi morphism: the adjoint of the vertical differential.  Along
    critical sections it agrees with the vertical differential itself."""
    return adjoint(vertical_differential(lag))


# ---------------------------------------------------------------------------
# contractions and variations
# ---------------------------------------------------------------------------


def contract_source(xi: VerticalField, src: SourceForm) -> JetExpr:
    """xi | E = sum xi^i e_i, a Lagrangian density."""
    return add_many(mul(c, e) for c, e in zip(xi.components, src.components))


def contract(xi1: VerticalField, xi2: VerticalField, a: BilinearForm) -> JetExpr:
    """sum A^sigma_{ij} xi1^i D_sigma(xi2^j)."""
    ctx = a.ctx
    pieces = []
    for (sigma, i, j), val in a.entries():
        d = total_derivative_multi(xi2.components[j], sigma, ctx)
        if d.is_zero:
            continue
        pieces.append(mul(val, mul(xi1.components[i], d)))
    return add_many(pieces)


def quotient_variation(lag: Lagrangian, fields: Sequence[VerticalField]
                       ) -> Lagrangian:
    """Iterated quotient variation: the right fold
    xi_1 | E(xi_2 | E( ... xi_k | E(lambda) ... )) as a Lagrangian density.
    One field gives the first variation up to total divergences."""
    if not fields:
        raise ValueError("quotient variation needs at least one field")
    v = lag
    for xi in reversed(list(fields)):
        v = Lagrangian(lag.ctx, contract_source(xi, euler_lagrange(v)))
    return v


def hessian(lag: Lagrangian, xi1: VerticalField, xi2: VerticalField
            ) -> Lagrangian:
    """Hessian density xi_1 | E(xi_2 | E(lambda))."""
    return quotient_variation(lag, [xi1, xi2])


def second_variation_decomposition(lag: Lagrangian, xi1: VerticalField,
                                   xi2: VerticalField
                                   ) -> tuple[Lagrangian, Lagrangian]:
    """Split the Hessian density into S1 + S2 with

        S1 = sum (-1)^{|sigma|} xi1^j D_sigma(d^sigma_j(xi2^i) e_i)
        S2 = sum (-1)^{|sigma|} xi1^j D_sigma(xi2^i d^sigma_j(e_i)).

    The identity S1 + S2 = hessian holds exactly.  Every monomial of S1
    carries a factor D_rho(e_i) (see first_summand_certificate), so S1
    vanishes along critical sections; S2 equals the contraction of the
    fields into the adjoint of the vertical differential.
    """
    ctx = lag.ctx
    e = euler_lagrange(lag)
    mu = contract_source(xi2, e)
    bound = max([jet_order(mu), e.order]
                + [jet_order(c) for c in xi2.components])
    s1_pieces = []
    s2_pieces = []
    for j in range(ctx.m):
        xj = xi1.components[j]
        if xj.is_zero:
            continue
        for sigma in enumerate_up_to(ctx.n, bound):
            coord = ctx.jet_atom(j, sigma)
            inner1 = add_many(mul(partial(xi2.components[i], coord),
                                  e.components[i]) for i in range(ctx.m))
            inner2 = add_many(mul(xi2.components[i],
                                  partial(e.components[i], coord))
                              for i in range(ctx.m))
            sign = -1 if sigma.order() % 2 else 1
            if not inner1.is_zero:
                t = total_derivative_multi(inner1, sigma, ctx)
                s1_pieces.append(mul(JetExpr.constant(sign), mul(xj, t)))
            if not inner2.is_zero:
                t = total_derivative_multi(inner2, sigma, ctx)
                s2_pieces.append(mul(JetExpr.constant(sign), mul(xj, t)))
    return (Lagrangian(ctx, add_many(s1_pieces)),
            Lagrangian(ctx, add_many(s2_pieces)))


def first_summand_certificate(lag: Lagrangian, xi1: VerticalField,
                              xi2: VerticalField
                              ) -> dict[tuple[int, MultiIndex], JetExpr]:
    """Ideal-membership certificate for the first summand: coefficients
    c[(i, rho)] with S1 = sum c[(i, rho)] * D_rho(e_i), obtained from the
    Leibniz expansion of the D_sigma in S1."""
    ctx = lag.ctx
    e = euler_lagrange(lag)
    mu = contract_source(xi2, e)
    bound = max([jet_order(mu), e.order]
                + [jet_order(c) for c in xi2.components])
    acc: dict[tuple[int, MultiIndex], list[JetExpr]] = {}
    for j in range(ctx.m):
        xj = xi1.components[j]
        if xj.is_zero:
            continue
        for sigma in enumerate_up_to(ctx.n, bound):
            coord = ctx.jet_atom(j, sigma)
            sign = -1 if sigma.order() % 2 else 1
            for i in range(ctx.m):
                f = partial(xi2.components[i], coord)
                if f.is_zero:
                    continue
                for rho in sigma.subindices():
                    c = Fraction(sign * sigma.binom(rho))
                    t = mul(JetExpr.constant(c),
                            total_derivative_multi(f, sigma.sub(rho), ctx))
                    acc.setdefault((i, rho), []).append(mul(xj, t))
    out = {}
    for key, pieces in acc.items():
        total = add_many(pieces)
        if not total.is_zero:
            out[key] = total
    return out


def reconstruct_from_certificate(src: SourceForm,
                                 cert: Mapping[tuple[int, MultiIndex], JetExpr]
                                 ) -> JetExpr:
    """sum cert[(i, rho)] * D_rho(e_i); equals S1 for a valid certificate."""
    ctx = src.ctx
    return add_many(
        mul(coef, total_derivative_multi(src.components[i], rho, ctx))
        for (i, rho), coef in cert.items())


# ---------------------------------------------------------------------------
# on-shell reduction
# ---------------------------------------------------------------------------


def prolong_relations(ctx: JetContext,
                      relations: Mapping[JetCoord, JetExpr],
                      max_order: int) -> dict[JetCoord, JetExpr]:
    """Extend critical relations (solved for their highest derivatives,
    e.g. y_tt -> -y) by all total-derivative prolongations up to
    max_order.  Right-hand sides are kept reduced with respect to the
    accumulated relations."""
    bindings: dict[JetCoord, JetExpr] = {}
    for key, rhs in sorted(relations.items(), key=lambda kv: kv[0].sort_key()):
        bindings[key] = substitute(rhs, bindings)
    frontier = list(bindings.items())
    while frontier:
        new_frontier = []
        for key, rhs in frontier:
            for ax in range(ctx.n):
                nkey = key.lifted(ax)
                if nkey.order > max_order or nkey in bindings:
                    continue
                nrhs = substitute(total_derivative(rhs, ax, ctx), bindings)
                bindings[nkey] = nrhs
                new_frontier.append((nkey, nrhs))
        frontier = new_frontier
    return bindings


def reduce_onshell(e: JetExpr, relations: Mapping[JetCoord, JetExpr],
                   ctx: JetContext) -> JetExpr:
    """Substitute critical relations plus the total-derivative
    prolongations needed to cover every derivative occurring in e."""
    full = prolong_relations(ctx, relations, max(jet_order(e), 0))
    out = substitute(e, full)
    # one pass suffices when the solved forms are reduced; guard anyway
    for _ in range(4):
        nxt = substitute(out, full)
        if nxt == out:
            return out
        out = nxt
    return out
