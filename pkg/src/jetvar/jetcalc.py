"""Total derivatives, prolongation of vertical fields, and the
horizontal/vertical differentials of functions on jet space.

The total derivative along the lam-th base direction acts on a function f
as D_lam f = partial_lam f + sum over occurring jet coordinates of
y^j_{sigma+lam} * partial^sigma_j f; the sum is finitely supported, so
only coordinates actually present in f are visited.
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import (JetContext, JetExpr, add_many, atom_expr, jet_coords,
                   jet_order, mul, partial)
from .multiindex import MultiIndex


@dataclass(frozen=True)
class VerticalField:
    """Vertical vector field xi = xi^i d/dy^i with JetExpr components.

    Components of order 0 recover fields on the total space; higher
    orders give generalized vector fields.
    """

    ctx: JetContext
    components: tuple[JetExpr, ...]

    def __post_init__(self):
        if len(self.components) != self.ctx.m:
            raise ValueError(
                f"vertical field needs {self.ctx.m} components, "
                f"got {len(self.components)}")

    @property
    def order(self) -> int:
        return max((jet_order(c) for c in self.components), default=0)


def total_derivative(e: JetExpr, axis: int | str, ctx: JetContext) -> JetExpr:
    """Total (formal) derivative D_lam of an expression."""
    ax = axis if isinstance(axis, int) else ctx.axis(axis)
    pieces = [partial(e, ctx.base_atom(ax))]
    for jc in jet_coords(e):
        p = partial(e, jc)
        if p.is_zero:
            continue
        pieces.append(mul(atom_expr(jc.lifted(ax)), p))
    return add_many(pieces)


def total_derivative_multi(e: JetExpr, sigma: MultiIndex, ctx: JetContext
                           ) -> JetExpr:
    """Iterated total derivative D_sigma; D_0 is the identity."""
    if sigma.dimension != ctx.n:
        raise ValueError("multi-index dimension does not match context")
    out = e
    for ax, count in enumerate(sigma.counts):
        for _ in range(count):
            out = total_derivative(out, ax, ctx)
    return out


def prolong(xi: VerticalField, r: int) -> dict[tuple[int, MultiIndex], JetExpr]:
    """Jet prolongation of a vertical field: component at (i, sigma) is
    D_sigma xi^i for 0 <= |sigma| <= r."""
    if r < 0:
        raise ValueError("prolongation order must be >= 0")
    from .multiindex import enumerate_up_to
    ctx = xi.ctx
    out: dict[tuple[int, MultiIndex], JetExpr] = {}
    for i, comp in enumerate(xi.components):
        for sigma in enumerate_up_to(ctx.n, r):
            out[(i, sigma)] = total_derivative_multi(comp, sigma, ctx)
    return out


def d_h(f: JetExpr, ctx: JetContext) -> list[JetExpr]:
    """Horizontal differential of a function: coefficients of d^lam."""
    return [total_derivative(f, ax, ctx) for ax in range(ctx.n)]


def d_v(f: JetExpr, ctx: JetContext) -> dict[tuple[int, MultiIndex], JetExpr]:
    """Vertical differential of a function: nonzero coefficients of the
    contact basis, keyed by (fiber index, sigma)."""
    out: dict[tuple[int, MultiIndex], JetExpr] = {}
    for jc in jet_coords(f):
        p = partial(f, jc)
        if not p.is_zero:
            out[(jc.index, jc.sigma)] = p
    return out
