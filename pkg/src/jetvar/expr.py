"""Canonical symbolic expressions over jet-space coordinates.

Every ``JetExpr`` is kept in normal form at all times: a sum of monomials
with exact ``Fraction`` coefficients, where a monomial is a product of
integer powers of atomic factors.  Atomic factors are base coordinates
``x^lam``, jet coordinates ``y^i_sigma``, known constants (``pi``),
elementary function applications, opaque smooth function symbols and
their formal partial derivatives, and inverses of multi-term sums.

Canonicalization is ring-level only: no trigonometric or radical
identities are applied, function applications are atomic generators.
Because constructors normalize, ``simplify`` is the identity and two
expressions are mathematically equal as (Laurent) polynomials in the
generators exactly when they compare equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

from .multiindex import MultiIndex

ELEMENTARY_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
KNOWN_CONSTANTS = {"pi": math.pi}

Number = Union[int, Fraction]


class ExprError(ValueError):
    """Malformed symbolic operation."""


class DivisionByZeroExpr(ExprError):
    """Division by an identically zero expression."""


class UnknownCoordinate(ExprError):
    """A coordinate is missing from an evaluation environment."""


# ---------------------------------------------------------------------------
# atoms
# ---------------------------------------------------------------------------


class Atom:
    """Atomic multiplicative generator.  Immutable, ordered by sort_key."""

    __slots__ = ("_key", "_hash")

    def sort_key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Atom) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return to_plain(atom_expr(self))


class ConstSym(Atom):
    """Named exact constant with a known numeric value (only ``pi``)."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in KNOWN_CONSTANTS:
            raise ExprError(f"unknown constant symbol {name!r}")
        self.name = name
        self._key = (0, name)
        self._hash = hash(self._key)


class BaseCoord(Atom):
    """Base coordinate x^lam."""

    __slots__ = ("name", "axis")

    def __init__(self, name: str, axis: int):
        self.name = name
        self.axis = axis
        self._key = (1, axis, name)
        self._hash = hash(self._key)


class JetCoord(Atom):
    """Jet coordinate y^i_sigma; sigma = (0,...,0) is the fiber coordinate."""

    __slots__ = ("field", "index", "sigma", "base_names")

    def __init__(self, field: str, index: int, sigma: MultiIndex,
                 base_names: tuple[str, ...]):
        if sigma.dimension != len(base_names):
            raise ExprError("multi-index dimension does not match base names")
        self.field = field
        self.index = index
        self.sigma = sigma
        self.base_names = base_names
        self._key = (2, sigma.order(), index, sigma.counts, field)
        self._hash = hash(self._key)

    @property
    def order(self) -> int:
        return self.sigma.order()

    def lifted(self, axis: int) -> "JetCoord":
        """The coordinate y^i_{sigma+lam} one derivative higher along axis."""
        return JetCoord(self.field, self.index, self.sigma.bump(axis),
                        self.base_names)


class ElemFn(Atom):
    """Elementary function application; the argument is a JetExpr."""

    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: "JetExpr"):
        if fn not in ELEMENTARY_FUNCTIONS:
            raise ExprError(f"unknown elementary function {fn!r}")
        self.fn = fn
        self.arg = arg
        self._key = (3, fn, arg.sort_key())
        self._hash = hash(self._key)


class OpaqueFn(Atom):
    """Opaque smooth function symbol, possibly formally differentiated.

    ``orders[k]`` counts formal partial derivatives with respect to the
    k-th declared argument; all-zero orders is the plain application.
    """

    __slots__ = ("name", "argnames", "orders", "args")

    def __init__(self, name: str, argnames: tuple[str, ...],
                 orders: tuple[int, ...], args: tuple["JetExpr", ...]):
        if not (len(argnames) == len(orders) == len(args)):
            raise ExprError(f"opaque function {name!r}: argument arity mismatch")
        if any(o < 0 for o in orders):
            raise ExprError("negative derivative order on opaque function")
        self.name = name
        self.argnames = argnames
        self.orders = orders
        self.args = args
        self._key = (4, name, orders, tuple(a.sort_key() for a in args))
        self._hash = hash(self._key)

    def differentiated(self, slot: int) -> "OpaqueFn":
        orders = list(self.orders)
        orders[slot] += 1
        return OpaqueFn(self.name, self.argnames, tuple(orders), self.args)


class InvSum(Atom):
    """Inverse of a canonical multi-term sum (leading coefficient 1).

    Constructed only through division; an exponent k on this atom means
    body**(-k).
    """

    __slots__ = ("body",)

    def __init__(self, body: "JetExpr"):
        self.body = body
        self._key = (5, body.sort_key())
        self._hash = hash(self._key)


# ---------------------------------------------------------------------------
# monomials and the canonical sum
# ---------------------------------------------------------------------------

Monomial = tuple[tuple[Atom, int], ...]


def _mono_key(m: Monomial):
    return (sum(e for _, e in m), tuple((a.sort_key(), e) for a, e in m))


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    merged: dict[Atom, int] = {}
    for a, e in m1:
        merged[a] = merged.get(a, 0) + e
    for a, e in m2:
        merged[a] = merged.get(a, 0) + e
    return tuple(sorted(((a, e) for a, e in merged.items() if e != 0),
                        key=lambda p: p[0].sort_key()))


class JetExpr:
    """Immutable canonical expression; see the module docstring."""

    __slots__ = ("_terms", "_hash", "_key", "_order")

    def __init__(self, terms: tuple[tuple[Monomial, Fraction], ...]):
        # terms must already be canonical (sorted, nonzero coefficients)
        self._terms = terms
        self._hash = None
        self._key = None
        self._order = None

    # -- construction -------------------------------------------------------

    @staticmethod
    def _from_dict(d: dict[Monomial, Fraction]) -> "JetExpr":
        items = [(m, c) for m, c in d.items() if c != 0]
        items.sort(key=lambda mc: _mono_key(mc[0]))
        return JetExpr(tuple(items))

    @staticmethod
    def constant(value: Number) -> "JetExpr":
        c = Fraction(value)
        if c == 0:
            return ZERO
        return JetExpr((((), c),))

    # -- structure ----------------------------------------------------------

    @property
    def terms(self) -> tuple[tuple[Monomial, Fraction], ...]:
        return self._terms

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def constant_value(self) -> Fraction | None:
        """The value if the expression is a bare rational, else None."""
        if not self._terms:
            return Fraction(0)
        if len(self._terms) == 1 and not self._terms[0][0]:
            return self._terms[0][1]
        return None

    def atoms(self) -> Iterator[Atom]:
        """Top-level atoms of each monomial (not recursing into arguments)."""
        seen = set()
        for m, _ in self._terms:
            for a, _e in m:
                if a not in seen:
                    seen.add(a)
                    yield a

    def sort_key(self):
        if self._key is None:
            self._key = tuple((_mono_key(m), c) for m, c in self._terms)
        return self._key

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = JetExpr.constant(other)
        if not isinstance(other, JetExpr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            c = self.constant_value()
            # constants hash like their rational value, matching __eq__
            self._hash = hash(c) if c is not None else hash(self._terms)
        return self._hash

    def __repr__(self):
        return f"JetExpr({to_plain(self)})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return JetExpr(tuple((m, -c) for m, c in self._terms))

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return add(self, -other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return add(other, -self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return div(self, other)

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return div(other, self)

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        return pow_int(self, k)


ZERO = JetExpr(())
ONE = JetExpr((((), Fraction(1)),))


def _coerce(x):
    if isinstance(x, JetExpr):
        return x
    if isinstance(x, (int, Fraction)):
        return JetExpr.constant(x)
    return NotImplemented


def atom_expr(a: Atom) -> JetExpr:
    return JetExpr(((((a, 1),), Fraction(1)),))


def atom_pow(a: Atom, k: int) -> JetExpr:
    if k == 0:
        return ONE
    if isinstance(a, InvSum) and k < 0:
        return pow_int(a.body, -k)
    return JetExpr(((((a, k),), Fraction(1)),))


# ---------------------------------------------------------------------------
# ring operations
# ---------------------------------------------------------------------------


def add(a: JetExpr, b: JetExpr) -> JetExpr:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    d = {m: c for m, c in a.terms}
    for m, c in b.terms:
        nc = d.get(m, Fraction(0)) + c
        if nc == 0:
            d.pop(m, None)
        else:
            d[m] = nc
    return JetExpr._from_dict(d)


def add_many(exprs: Iterable[JetExpr]) -> JetExpr:
    d: dict[Monomial, Fraction] = {}
    for e in exprs:
        for m, c in e.terms:
            nc = d.get(m, Fraction(0)) + c
            if nc == 0:
                d.pop(m, None)
            else:
                d[m] = nc
    return JetExpr._from_dict(d)


def mul(a: JetExpr, b: JetExpr) -> JetExpr:
    if a.is_zero or b.is_zero:
        return ZERO
    d: dict[Monomial, Fraction] = {}
    for m1, c1 in a.terms:
        for m2, c2 in b.terms:
            m = _mono_mul(m1, m2)
            nc = d.get(m, Fraction(0)) + c1 * c2
            if nc == 0:
                d.pop(m, None)
            else:
                d[m] = nc
    return JetExpr._from_dict(d)


def pow_int(e: JetExpr, k: int) -> JetExpr:
    """Integer power; negative exponents go through division."""
    if k == 0:
        return ONE
    if e.is_zero:
        if k > 0:
            return ZERO
        raise DivisionByZeroExpr("zero expression raised to a negative power")
    if k < 0:
        return pow_int(div(ONE, e), -k)
    out = ONE
    base = e
    while k:
        if k & 1:
            out = mul(out, base)
        base = mul(base, base) if k > 1 else base
        k >>= 1
    return out


def div(a: JetExpr, b: JetExpr) -> JetExpr:
    if b.is_zero:
        raise DivisionByZeroExpr("division by an identically zero expression")
    if a.is_zero:
        return ZERO
    if len(b.terms) == 1:
        m, c = b.terms[0]
        out = mul(a, JetExpr.constant(1 / c))
        for atom, e in m:
            if isinstance(atom, InvSum):
                out = mul(out, pow_int(atom.body, e))
            else:
                out = mul(out, atom_pow(atom, -e))
        return out
    q = _exact_div(a, b)
    if q is not None:
        return q
    content, mono, body = _factor_sum(b)
    out = mul(a, JetExpr.constant(1 / content))
    for atom, e in mono:
        if isinstance(atom, InvSum):
            out = mul(out, pow_int(atom.body, e))
        else:
            out = mul(out, atom_pow(atom, -e))
    return mul(out, atom_expr(InvSum(body)))


def _factor_sum(b: JetExpr) -> tuple[Fraction, Monomial, JetExpr]:
    """Split a multi-term sum as content * common-monomial * monic remainder."""
    common: dict[Atom, int] | None = None
    for m, _c in b.terms:
        exps = dict(m)
        if common is None:
            common = exps
        else:
            common = {a: min(e, common[a]) for a, e in exps.items()
                      if a in common}
            common = {a: e for a, e in common.items() if e != 0}
        if not common:
            common = {}
            break
    mono: Monomial = tuple(sorted(common.items(), key=lambda p: p[0].sort_key()))
    stripped: dict[Monomial, Fraction] = {}
    for m, c in b.terms:
        exps = dict(m)
        for a, e in mono:
            ne = exps[a] - e
            if ne == 0:
                del exps[a]
            else:
                exps[a] = ne
        stripped[tuple(sorted(exps.items(), key=lambda p: p[0].sort_key()))] = c
    rest = JetExpr._from_dict(stripped)
    content = rest.terms[-1][1]  # leading (largest) coefficient
    body = mul(rest, JetExpr.constant(1 / content))
    return content, mono, body


def _exact_div(a: JetExpr, b: JetExpr) -> JetExpr | None:
    """Multivariate exact division; None when a is not a polynomial multiple.

    Only attempted in the honest polynomial case (no negative exponents,
    no InvSum factors); uses a dense graded-lex order for termination.
    """
    for e in (a, b):
        for m, _c in e.terms:
            for atom, exp in m:
                if exp < 0 or isinstance(atom, InvSum):
                    return None
    gens = sorted({atom for m, _c in list(a.terms) + list(b.terms)
                   for atom, _e in m}, key=lambda g: g.sort_key())
    pos = {g: i for i, g in enumerate(gens)}

    def dense(m: Monomial) -> tuple[int, ...]:
        v = [0] * len(gens)
        for atom, e in m:
            v[pos[atom]] = e
        return tuple(v)

    def key(v: tuple[int, ...]):
        return (sum(v), v)

    bterms = sorted(((dense(m), c) for m, c in b.terms), key=lambda t: key(t[0]))
    lead_b, lead_bc = bterms[-1]
    rem = {dense(m): c for m, c in a.terms}
    quo: dict[tuple[int, ...], Fraction] = {}
    while rem:
        lead = max(rem, key=key)
        qv = tuple(x - y for x, y in zip(lead, lead_b))
        if any(x < 0 for x in qv):
            return None
        qc = rem[lead] / lead_bc
        quo[qv] = quo.get(qv, Fraction(0)) + qc
        for bv, bc in bterms:
            mv = tuple(x + y for x, y in zip(qv, bv))
            nc = rem.get(mv, Fraction(0)) - qc * bc
            if nc == 0:
                rem.pop(mv, None)
            else:
                rem[mv] = nc
    out: dict[Monomial, Fraction] = {}
    for qv, qc in quo.items():
        if qc == 0:
            continue
        m = tuple((gens[i], e) for i, e in enumerate(qv) if e != 0)
        out[tuple(sorted(m, key=lambda p: p[0].sort_key()))] = qc
    return JetExpr._from_dict(out)


# ---------------------------------------------------------------------------
# calculus on the generators
# ---------------------------------------------------------------------------


def elem(fn: str, arg: JetExpr) -> JetExpr:
    return atom_expr(ElemFn(fn, arg))


def sin(arg: JetExpr) -> JetExpr:
    return elem("sin", arg)


def cos(arg: JetExpr) -> JetExpr:
    return elem("cos", arg)


def exp(arg: JetExpr) -> JetExpr:
    return elem("exp", arg)


def log(arg: JetExpr) -> JetExpr:
    return elem("log", arg)


def sqrt(arg: JetExpr) -> JetExpr:
    return elem("sqrt", arg)


def simplify(e: JetExpr) -> JetExpr:
    """Return the canonical form of ``e``.

    Constructors normalize eagerly, so this is the identity; it exists as
    the explicit entry point of the normal-form contract (idempotent by
    construction).
    """
    if not isinstance(e, JetExpr):
        raise ExprError("simplify expects a JetExpr")
    return e


def partial(e: JetExpr, coord: Atom) -> JetExpr:
    """Formal partial derivative with respect to one coordinate.

    All jet coordinates are treated as independent; the chain rule is
    applied through elementary functions, and opaque functions
    differentiate into formal-partial atoms with respect to their
    declared arguments only.
    """
    if not isinstance(coord, (BaseCoord, JetCoord)):
        raise ExprError("partial derivative target must be a coordinate")
    pieces: list[JetExpr] = []
    for m, coeff in e.terms:
        for idx, (atom, k) in enumerate(m):
            da = _atom_partial(atom, coord)
            if da.is_zero:
                continue
            rest = m[:idx] + m[idx + 1:]
            piece = JetExpr(((rest, coeff * k),))
            piece = mul(piece, atom_pow(atom, k - 1))
            pieces.append(mul(piece, da))
    return add_many(pieces)


_ELEM_DERIVATIVE: dict[str, Callable[[JetExpr], JetExpr]] = {
    "sin": lambda u: cos(u),
    "cos": lambda u: -sin(u),
    "exp": lambda u: exp(u),
    "log": lambda u: div(ONE, u),
    "sqrt": lambda u: mul(JetExpr.constant(Fraction(1, 2)),
                          atom_pow(ElemFn("sqrt", u), -1)),
}


def _atom_partial(atom: Atom, coord: Atom) -> JetExpr:
    if isinstance(atom, (BaseCoord, JetCoord)):
        return ONE if atom == coord else ZERO
    if isinstance(atom, ConstSym):
        return ZERO
    if isinstance(atom, ElemFn):
        du = partial(atom.arg, coord)
        if du.is_zero:
            return ZERO
        return mul(_ELEM_DERIVATIVE[atom.fn](atom.arg), du)
    if isinstance(atom, OpaqueFn):
        pieces = []
        for slot, arg in enumerate(atom.args):
            da = partial(arg, coord)
            if da.is_zero:
                continue
            pieces.append(mul(atom_expr(atom.differentiated(slot)), da))
        return add_many(pieces)
    if isinstance(atom, InvSum):
        dp = partial(atom.body, coord)
        if dp.is_zero:
            return ZERO
        inv = atom_expr(atom)
        return -mul(dp, mul(inv, inv))
    raise ExprError(f"unhandled atom {atom!r}")


def substitute(e: JetExpr, bindings: Mapping[Atom, JetExpr]) -> JetExpr:
    """Simultaneous substitution of coordinates, then renormalization."""
    if not bindings:
        return e
    for key in bindings:
        if not isinstance(key, (BaseCoord, JetCoord)):
            raise ExprError("substitution keys must be coordinates")
    pieces: list[JetExpr] = []
    for m, coeff in e.terms:
        term = JetExpr.constant(coeff)
        for atom, k in m:
            term = mul(term, pow_int(_subst_atom(atom, bindings), k))
            if term.is_zero:
                break
        pieces.append(term)
    return add_many(pieces)


def _subst_atom(atom: Atom, bindings: Mapping[Atom, JetExpr]) -> JetExpr:
    if isinstance(atom, (BaseCoord, JetCoord)):
        return bindings.get(atom, atom_expr(atom))
    if isinstance(atom, ElemFn):
        arg = substitute(atom.arg, bindings)
        if arg == atom.arg:
            return atom_expr(atom)
        return elem(atom.fn, arg)
    if isinstance(atom, OpaqueFn):
        args = tuple(substitute(a, bindings) for a in atom.args)
        if args == atom.args:
            return atom_expr(atom)
        return atom_expr(OpaqueFn(atom.name, atom.argnames, atom.orders, args))
    if isinstance(atom, InvSum):
        body = substitute(atom.body, bindings)
        if body == atom.body:
            return atom_expr(atom)
        return div(ONE, body)
    return atom_expr(atom)


# ---------------------------------------------------------------------------
# inspection
# ---------------------------------------------------------------------------


def _walk_atoms(e: JetExpr, seen: set[Atom]) -> None:
    for m, _c in e.terms:
        for atom, _k in m:
            if atom in seen:
                continue
            seen.add(atom)
            if isinstance(atom, ElemFn):
                _walk_atoms(atom.arg, seen)
            elif isinstance(atom, OpaqueFn):
                for a in atom.args:
                    _walk_atoms(a, seen)
            elif isinstance(atom, InvSum):
                _walk_atoms(atom.body, seen)


def all_atoms(e: JetExpr) -> set[Atom]:
    """Every atom occurring anywhere in e, including function arguments."""
    seen: set[Atom] = set()
    _walk_atoms(e, seen)
    return seen


def jet_coords(e: JetExpr) -> list[JetCoord]:
    """Jet coordinates occurring anywhere in e, deterministically ordered."""
    out = [a for a in all_atoms(e) if isinstance(a, JetCoord)]
    out.sort(key=lambda a: a.sort_key())
    return out


def base_coords(e: JetExpr) -> list[BaseCoord]:
    out = [a for a in all_atoms(e) if isinstance(a, BaseCoord)]
    out.sort(key=lambda a: a.sort_key())
    return out


def has_opaque(e: JetExpr) -> bool:
    return any(isinstance(a, OpaqueFn) for a in all_atoms(e))


def jet_order(e: JetExpr) -> int:
    """Maximal |sigma| among jet coordinates occurring in e (0 if none)."""
    if e._order is None:
        coords = jet_coords(e)
        e._order = max((c.order for c in coords), default=0)
    return e._order


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(e: JetExpr, env: Mapping[Atom, float]) -> float:
    """Float evaluation with full coordinate grounding.

    Opaque function symbols have no numeric value and raise; a missing
    coordinate raises UnknownCoordinate.
    """
    total = 0.0
    for m, c in e.terms:
        p = c.numerator / c.denominator
        for atom, k in m:
            p *= _eval_atom(atom, env) ** k
        total += p
    return total


def _eval_atom(atom: Atom, env: Mapping[Atom, float]) -> float:
    if isinstance(atom, (BaseCoord, JetCoord)):
        try:
            return env[atom]
        except KeyError:
            raise UnknownCoordinate(
                f"unbound coordinate {atom!r} in numeric evaluation") from None
    if isinstance(atom, ConstSym):
        return KNOWN_CONSTANTS[atom.name]
    if isinstance(atom, ElemFn):
        return getattr(math, atom.fn)(evaluate(atom.arg, env))
    if isinstance(atom, InvSum):
        return 1.0 / evaluate(atom.body, env)
    if isinstance(atom, OpaqueFn):
        raise ExprError(
            f"opaque function {atom.name!r} has no numeric value")
    raise ExprError(f"unhandled atom {atom!r}")


def evaluate_exact(e: JetExpr, env: Mapping[Atom, Fraction]) -> Fraction:
    """Exact rational evaluation; only for expressions free of elementary
    and opaque function applications."""
    total = Fraction(0)
    for m, c in e.terms:
        p = c
        for atom, k in m:
            if isinstance(atom, (BaseCoord, JetCoord)):
                try:
                    v = env[atom]
                except KeyError:
                    raise UnknownCoordinate(
                        f"unbound coordinate {atom!r}") from None
            elif isinstance(atom, InvSum):
                v = 1 / evaluate_exact(atom.body, env)
            else:
                raise ExprError(
                    "exact evaluation requires a polynomial expression")
            p *= Fraction(v) ** k
        total += p
    return total


# ---------------------------------------------------------------------------
# plain-text rendering (the parser's inverse; latex/structured live in textio)
# ---------------------------------------------------------------------------


def _suffix(names: list[str]) -> str:
    if all(len(n) == 1 for n in names):
        return "_" + "".join(names)
    return "_{" + " ".join(names) + "}"


def _render_atom(atom: Atom) -> str:
    if isinstance(atom, BaseCoord):
        return atom.name
    if isinstance(atom, ConstSym):
        return atom.name
    if isinstance(atom, JetCoord):
        if atom.sigma.order() == 0:
            return atom.field
        names = []
        for nm, cnt in zip(atom.base_names, atom.sigma.counts):
            names.extend([nm] * cnt)
        return atom.field + _suffix(names)
    if isinstance(atom, ElemFn):
        return f"{atom.fn}({to_plain(atom.arg)})"
    if isinstance(atom, OpaqueFn):
        head = atom.name
        if any(atom.orders):
            names = []
            for nm, cnt in zip(atom.argnames, atom.orders):
                names.extend([nm] * cnt)
            head += _suffix(names)
        return head + "(" + ", ".join(to_plain(a) for a in atom.args) + ")"
    if isinstance(atom, InvSum):
        return "(" + to_plain(atom.body) + ")"
    raise ExprError(f"unhandled atom {atom!r}")


def _render_factor(atom: Atom, k: int) -> str:
    s = _render_atom(atom)
    if isinstance(atom, InvSum):
        k = -k
    if k == 1:
        return s
    return f"{s}^{k}"


def to_plain(e: JetExpr) -> str:
    """Plain-text rendering in the canonical term order; parseable back."""
    if e.is_zero:
        return "0"
    parts: list[str] = []
    for m, c in e.terms:
        neg = c < 0
        mag = -c if neg else c
        factors = [_render_factor(a, k) for a, k in m]
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = str(mag) + "*" + "*".join(factors)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


# ---------------------------------------------------------------------------
# the jet context
# ---------------------------------------------------------------------------

_RESERVED = set(ELEMENTARY_FUNCTIONS) | set(KNOWN_CONSTANTS)


@dataclass(frozen=True)
class JetContext:
    """Chart data: base variables x^lam, fiber variables y^i, and the
    catalog of opaque smooth function symbols with their argument lists.

    Opaque symbols depend on order-0 coordinates only; they model
    coefficient functions such as metric components g_ab(q).
    """

    base_names: tuple[str, ...]
    fiber_names: tuple[str, ...]
    opaques: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @staticmethod
    def make(base, fibers, opaque: Mapping[str, Sequence[str]] | None = None
             ) -> "JetContext":
        if isinstance(base, str):
            base = base.split()
        if isinstance(fibers, str):
            fibers = fibers.split()
        ops = tuple((name, tuple(args)) for name, args in (opaque or {}).items())
        return JetContext(tuple(base), tuple(fibers), ops)

    def __post_init__(self):
        if len(self.base_names) < 1 or len(self.fiber_names) < 1:
            raise ExprError("need at least one base and one fiber variable")
        names = list(self.base_names) + list(self.fiber_names) + \
            [nm for nm, _ in self.opaques]
        if len(set(names)) != len(names):
            raise ExprError(f"coordinate/function names not distinct: {names}")
        clash = set(names) & _RESERVED
        if clash:
            raise ExprError(f"reserved names used as identifiers: {sorted(clash)}")
        order0 = set(self.base_names) | set(self.fiber_names)
        for nm, args in self.opaques:
            if len(args) < 1:
                raise ExprError(f"opaque function {nm!r} needs arguments")
            bad = [a for a in args if a not in order0]
            if bad:
                raise ExprError(
                    f"opaque function {nm!r} depends on unknown order-0 "
                    f"coordinates {bad}")

    # -- lookups ------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.base_names)

    @property
    def m(self) -> int:
        return len(self.fiber_names)

    @property
    def opaque_table(self) -> dict[str, tuple[str, ...]]:
        return dict(self.opaques)

    def axis(self, name: str) -> int:
        try:
            return self.base_names.index(name)
        except ValueError:
            raise UnknownCoordinate(f"unknown base variable {name!r}") from None

    def fiber_index(self, name: str) -> int:
        try:
            return self.fiber_names.index(name)
        except ValueError:
            raise UnknownCoordinate(f"unknown field {name!r}") from None

    # -- atom and expression builders ----------------------------------------

    def base_atom(self, which: int | str) -> BaseCoord:
        axis = which if isinstance(which, int) else self.axis(which)
        if not 0 <= axis < self.n:
            raise UnknownCoordinate(f"base axis {which!r} out of range")
        return BaseCoord(self.base_names[axis], axis)

    def jet_atom(self, field: int | str, sigma=None) -> JetCoord:
        idx = field if isinstance(field, int) else self.fiber_index(field)
        if not 0 <= idx < self.m:
            raise UnknownCoordinate(f"field {field!r} out of range")
        return JetCoord(self.fiber_names[idx], idx, self._sigma(sigma),
                        self.base_names)

    def _sigma(self, sigma) -> MultiIndex:
        if sigma is None:
            return MultiIndex.zero(self.n)
        if isinstance(sigma, MultiIndex):
            if sigma.dimension != self.n:
                raise ExprError("multi-index dimension does not match context")
            return sigma
        if isinstance(sigma, str):
            names = sigma.split() if " " in sigma else None
            if names is None:
                if all(ch in self.base_names for ch in sigma):
                    names = list(sigma)
                else:
                    names = [sigma]
            counts = [0] * self.n
            for nm in names:
                counts[self.axis(nm)] += 1
            return MultiIndex(tuple(counts))
        return self._sigma(MultiIndex(tuple(sigma)))

    def base(self, which: int | str) -> JetExpr:
        return atom_expr(self.base_atom(which))

    def fiber(self, name: int | str) -> JetExpr:
        return atom_expr(self.jet_atom(name))

    def jet(self, field: int | str, sigma) -> JetExpr:
        return atom_expr(self.jet_atom(field, sigma))

    def opaque(self, name: str, orders=None, args: Sequence[JetExpr] | None = None
               ) -> JetExpr:
        table = self.opaque_table
        if name not in table:
            raise UnknownCoordinate(f"unknown opaque function {name!r}")
        argnames = table[name]
        if orders is None:
            ordt = (0,) * len(argnames)
        elif isinstance(orders, Mapping):
            ordt = tuple(orders.get(a, 0) for a in argnames)
        else:
            ordt = tuple(orders)
            if len(ordt) != len(argnames):
                raise ExprError(f"opaque function {name!r}: orders arity mismatch")
        if args is None:
            exprs = tuple(self._order0(a) for a in argnames)
        else:
            exprs = tuple(args)
            if len(exprs) != len(argnames):
                raise ExprError(f"opaque function {name!r} expects "
                                f"{len(argnames)} arguments, got {len(exprs)}")
        return atom_expr(OpaqueFn(name, argnames, ordt, exprs))

    def _order0(self, name: str) -> JetExpr:
        if name in self.base_names:
            return self.base(name)
        return self.fiber(name)

    def coord(self, designator) -> Atom:
        """Coordinate designator: a base/fiber name, or (field, sigma)."""
        if isinstance(designator, (BaseCoord, JetCoord)):
            return designator
        if isinstance(designator, str):
            if designator in self.base_names:
                return self.base_atom(designator)
            return self.jet_atom(designator)
        field, sigma = designator
        return self.jet_atom(field, sigma)

    def pi(self) -> JetExpr:
        return atom_expr(ConstSym("pi"))
