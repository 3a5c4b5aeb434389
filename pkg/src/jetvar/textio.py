"""Parsing and printing: the expression grammar, problem files, and the
plain / latex / structured renderings of expressions and derived forms.

Expression grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' ['-'] int)?
    base   := number | ident | ident suffix | fn '(' args ')' | '(' expr ')'
    suffix := '_' letters | '_{' ident+ '}'

Jet coordinates are written as a field name with a derivative suffix:
``y_tt`` when base variables are single letters, ``y_{x1 x1}`` otherwise.
The same suffix syntax on a declared opaque function denotes its formal
partial derivatives, e.g. ``g_q(q)``.  Line comments start with ``#``.

The structured format is the only stability-guaranteed machine
interface; its schema is documented in the README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import expr as ex
from .expr import (ConstSym, BaseCoord, ElemFn, InvSum, JetContext, JetCoord,
                   JetExpr, OpaqueFn, atom_expr, jet_coords, to_plain)
from .multiindex import MultiIndex
from .numeric import NumericConfig
from .variational import BilinearForm, Lagrangian, SourceForm


class ParseError(ValueError):
    """Syntax or validation error with a source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------

_SYMBOLS = "+-*/^(){},=_"


@dataclass
class _Token:
    kind: str  # NUM | IDENT | one of _SYMBOLS | EOF
    text: str
    line: int
    col: int


def _lex(src: str, line: int = 1, col: int = 1) -> list[_Token]:
    toks: list[_Token] = []
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < len(src) and src[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < len(src) and src[j].isdigit():
                j += 1
            if j < len(src) and src[j] == "." and j + 1 < len(src) \
                    and src[j + 1].isdigit():
                j += 1
                while j < len(src) and src[j].isdigit():
                    j += 1
            if j < len(src) and src[j] in "eE":
                k = j + 1
                if k < len(src) and src[k] in "+-":
                    k += 1
                if k < len(src) and src[k].isdigit():
                    j = k
                    while j < len(src) and src[j].isdigit():
                        j += 1
            text = src[i:j]
            toks.append(_Token("NUM", text, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < len(src) and (src[j].isalnum()):
                j += 1
            text = src[i:j]
            toks.append(_Token("IDENT", text, line, start_col))
            col += j - i
            i = j
            continue
        if ch in _SYMBOLS:
            toks.append(_Token(ch, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, start_col)
    toks.append(_Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# recursive-descent expression parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[_Token], ctx: JetContext):
        self.toks = toks
        self.ctx = ctx
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or 'end of input'!r}",
                             t.line, t.col)
        return self.next()

    def fail(self, message: str, tok: _Token | None = None):
        t = tok or self.peek()
        raise ParseError(message, t.line, t.col)

    # grammar ---------------------------------------------------------------

    def expression(self) -> JetExpr:
        node = self.term()
        while self.peek().kind in "+-":
            op = self.next().kind
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self) -> JetExpr:
        node = self.unary()
        while self.peek().kind in "*/":
            op = self.next()
            rhs = self.unary()
            if op.kind == "*":
                node = node * rhs
            else:
                try:
                    node = node / rhs
                except ex.DivisionByZeroExpr:
                    self.fail("division by an identically zero expression", op)
        return node

    def unary(self) -> JetExpr:
        if self.peek().kind == "-":
            self.next()
            return -self.unary()
        return self.factor()

    def factor(self) -> JetExpr:
        base = self.base()
        if self.peek().kind != "^":
            return base
        caret = self.next()
        neg = False
        if self.peek().kind == "-":
            self.next()
            neg = True
        t = self.expect("NUM")
        if any(c in t.text for c in ".eE"):
            self.fail("exponent must be an integer", t)
        k = int(t.text)
        try:
            return base ** (-k if neg else k)
        except ex.DivisionByZeroExpr:
            self.fail("zero expression raised to a negative power", caret)

    def base(self) -> JetExpr:
        t = self.peek()
        if t.kind == "(":
            self.next()
            node = self.expression()
            self.expect(")")
            return node
        if t.kind == "NUM":
            self.next()
            return JetExpr.constant(Fraction(t.text))
        if t.kind == "IDENT":
            return self.identifier()
        self.fail(f"expected an expression, found {t.text or 'end of input'!r}")

    def identifier(self) -> JetExpr:
        t = self.next()
        name = t.text
        ctx = self.ctx
        if name in ex.ELEMENTARY_FUNCTIONS:
            self.expect("(")
            arg = self.expression()
            self.expect(")")
            return ex.elem(name, arg)
        if name in ex.KNOWN_CONSTANTS:
            return atom_expr(ConstSym(name))
        if name in ctx.base_names:
            if self.peek().kind == "_":
                self.fail("base variable cannot carry a derivative suffix", t)
            return ctx.base(name)
        if name in ctx.fiber_names:
            if self.peek().kind != "_":
                return ctx.fiber(name)
            names = self.suffix(set(ctx.base_names))
            counts = [0] * ctx.n
            for nm in names:
                counts[ctx.axis(nm)] += 1
            return ctx.jet(name, MultiIndex(tuple(counts)))
        table = ctx.opaque_table
        if name in table:
            argnames = table[name]
            orders = [0] * len(argnames)
            if self.peek().kind == "_":
                for nm in self.suffix(set(argnames)):
                    orders[argnames.index(nm)] += 1
            self.expect("(")
            args = [self.expression()]
            while self.peek().kind == ",":
                self.next()
                args.append(self.expression())
            close = self.peek()
            self.expect(")")
            if len(args) != len(argnames):
                self.fail(f"opaque function {name!r} expects {len(argnames)} "
                          f"arguments, got {len(args)}", close)
            return ctx.opaque(name, tuple(orders), tuple(args))
        self.fail(f"unknown identifier {name!r}", t)

    def suffix(self, valid: set[str]) -> list[str]:
        """Derivative suffix after '_': either '{' names '}' or a run of
        single-letter names."""
        under = self.next()  # the '_'
        if self.peek().kind == "{":
            self.next()
            names = []
            while self.peek().kind == "IDENT":
                names.append(self.next().text)
            self.expect("}")
            if not names:
                self.fail("empty derivative suffix", under)
        else:
            t = self.peek()
            if t.kind != "IDENT":
                self.fail("malformed derivative suffix", t)
            self.next()
            names = list(t.text)
        for nm in names:
            if nm not in valid:
                self.fail(f"malformed derivative suffix: {nm!r} is not valid here",
                          under)
        return names


def parse_expr(src: str, ctx: JetContext, *, line: int = 1) -> JetExpr:
    """Parse an expression; raises ParseError with a source position."""
    p = _Parser(_lex(src, line=line), ctx)
    node = p.expression()
    t = p.peek()
    if t.kind != "EOF":
        raise ParseError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return node


# ---------------------------------------------------------------------------
# latex rendering
# ---------------------------------------------------------------------------

_LATEX_FN = {"sin": r"\sin", "cos": r"\cos", "exp": r"\exp", "log": r"\log"}


def _latex_coeff(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return rf"\frac{{{c.numerator}}}{{{c.denominator}}}"


def _latex_atom(atom) -> str:
    if isinstance(atom, BaseCoord):
        return atom.name
    if isinstance(atom, ConstSym):
        return "\\" + atom.name
    if isinstance(atom, JetCoord):
        if atom.sigma.order() == 0:
            return atom.field
        return f"{atom.field}_{{{atom.sigma.render(atom.base_names)}}}"
    if isinstance(atom, ElemFn):
        if atom.fn == "sqrt":
            return rf"\sqrt{{{to_latex(atom.arg)}}}"
        return rf"{_LATEX_FN[atom.fn]}\left({to_latex(atom.arg)}\right)"
    if isinstance(atom, OpaqueFn):
        args = ", ".join(to_latex(a) for a in atom.args)
        head = atom.name
        if any(atom.orders):
            names = []
            for nm, cnt in zip(atom.argnames, atom.orders):
                names.extend([nm] * cnt)
            head = rf"\partial_{{{' '.join(names)}}} {atom.name}"
        return rf"{head}\left({args}\right)"
    if isinstance(atom, InvSum):
        return rf"\left({to_latex(atom.body)}\right)"
    raise ValueError(f"unhandled atom {atom!r}")


def to_latex(e: JetExpr) -> str:
    if e.is_zero:
        return "0"
    parts: list[str] = []
    for m, c in e.terms:
        neg = c < 0
        mag = -c if neg else c
        factors = []
        for atom, k in m:
            s = _latex_atom(atom)
            if isinstance(atom, InvSum):
                k = -k
            factors.append(s if k == 1 else f"{s}^{{{k}}}")
        if not factors:
            body = _latex_coeff(mag)
        elif mag == 1:
            body = " ".join(factors)
        else:
            body = _latex_coeff(mag) + " " + " ".join(factors)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


# ---------------------------------------------------------------------------
# structured (lossless machine) format
# ---------------------------------------------------------------------------


def _atom_to_dict(atom) -> dict:
    if isinstance(atom, BaseCoord):
        return {"kind": "base", "name": atom.name}
    if isinstance(atom, ConstSym):
        return {"kind": "const", "name": atom.name}
    if isinstance(atom, JetCoord):
        return {"kind": "jet", "field": atom.field,
                "counts": list(atom.sigma.counts)}
    if isinstance(atom, ElemFn):
        return {"kind": "elem", "fn": atom.fn, "arg": _expr_to_dict(atom.arg)}
    if isinstance(atom, OpaqueFn):
        return {"kind": "opaque", "name": atom.name,
                "orders": list(atom.orders),
                "args": [_expr_to_dict(a) for a in atom.args]}
    if isinstance(atom, InvSum):
        return {"kind": "inv", "body": _expr_to_dict(atom.body)}
    raise ValueError(f"unhandled atom {atom!r}")


def _expr_to_dict(e: JetExpr) -> dict:
    terms = []
    for m, c in e.terms:
        terms.append({
            "coeff": str(c),
            "factors": [{"atom": _atom_to_dict(a), "power": k} for a, k in m],
        })
    return {"terms": terms}


def _atom_from_dict(d: dict, ctx: JetContext) -> JetExpr:
    kind = d["kind"]
    if kind == "base":
        return ctx.base(d["name"])
    if kind == "const":
        return atom_expr(ConstSym(d["name"]))
    if kind == "jet":
        return ctx.jet(d["field"], MultiIndex(tuple(d["counts"])))
    if kind == "elem":
        return ex.elem(d["fn"], _expr_from_dict(d["arg"], ctx))
    if kind == "opaque":
        return ctx.opaque(d["name"], tuple(d["orders"]),
                          tuple(_expr_from_dict(a, ctx) for a in d["args"]))
    if kind == "inv":
        return ex.div(ex.ONE, _expr_from_dict(d["body"], ctx))
    raise ValueError(f"unknown atom kind {kind!r}")


def _expr_from_dict(d: dict, ctx: JetContext) -> JetExpr:
    total = ex.ZERO
    for t in d["terms"]:
        piece = JetExpr.constant(Fraction(t["coeff"]))
        for f in t["factors"]:
            piece = piece * (_atom_from_dict(f["atom"], ctx) ** int(f["power"]))
        total = total + piece
    return total


def object_to_dict(obj) -> dict:
    """Structured representation of an expression or a derived form."""
    if isinstance(obj, JetExpr):
        return {"type": "expr", **_expr_to_dict(obj)}
    if isinstance(obj, Lagrangian):
        return {"type": "lagrangian", "density": _expr_to_dict(obj.density)}
    if isinstance(obj, SourceForm):
        return {"type": "source_form",
                "components": [_expr_to_dict(c) for c in obj.components]}
    if isinstance(obj, BilinearForm):
        fibers = obj.ctx.fiber_names
        return {"type": "bilinear_form",
                "entries": [{"sigma": list(s.counts),
                             "i": fibers[i], "j": fibers[j],
                             "value": _expr_to_dict(v)}
                            for (s, i, j), v in obj.entries()]}
    raise ValueError(f"cannot serialize {type(obj).__name__}")


def object_from_dict(d: dict, ctx: JetContext):
    t = d.get("type")
    if t == "expr":
        return _expr_from_dict(d, ctx)
    if t == "lagrangian":
        return Lagrangian(ctx, _expr_from_dict(d["density"], ctx))
    if t == "source_form":
        comps = tuple(_expr_from_dict(c, ctx) for c in d["components"])
        return SourceForm(ctx, comps)
    if t == "bilinear_form":
        comps = {}
        for entry in d["entries"]:
            key = (MultiIndex(tuple(entry["sigma"])),
                   ctx.fiber_index(entry["i"]), ctx.fiber_index(entry["j"]))
            val = _expr_from_dict(entry["value"], ctx)
            comps[key] = comps[key] + val if key in comps else val
        return BilinearForm(ctx, comps)
    raise ValueError(f"unknown structured object type {t!r}")


def parse_structured(text: str, ctx: JetContext):
    return object_from_dict(json.loads(text), ctx)


# ---------------------------------------------------------------------------
# unified printing
# ---------------------------------------------------------------------------


def _sigma_label(sigma: MultiIndex, base_names: Sequence[str]) -> str:
    return sigma.render(base_names) or "0"


def print_object(obj, fmt: str = "plain", name: str = "A") -> str:
    """Render an expression, source form, or bilinear form.

    plain and latex follow the canonical term order; structured is the
    lossless JSON tree that round-trips through parse_structured.
    """
    if fmt == "structured":
        return json.dumps(object_to_dict(obj), sort_keys=True, indent=2)
    if isinstance(obj, Lagrangian):
        obj = obj.density
    if isinstance(obj, JetExpr):
        return to_plain(obj) if fmt == "plain" else to_latex(obj)
    if isinstance(obj, SourceForm):
        lines = []
        for i, c in enumerate(obj.components):
            if fmt == "plain":
                lines.append(f"e_{i + 1} = {to_plain(c)}")
            else:
                lines.append(f"e_{{{i + 1}}} = {to_latex(c)}")
        return "\n".join(lines)
    if isinstance(obj, BilinearForm):
        base = obj.ctx.base_names
        if obj.is_zero:
            return f"{name} = 0"
        lines = []
        for (s, i, j), v in obj.entries():
            label = _sigma_label(s, base)
            if fmt == "plain":
                lines.append(f"{name}^{{{label}}}_{{{i + 1} {j + 1}}} = {to_plain(v)}")
            else:
                lines.append(
                    f"{name}^{{{label}}}_{{{i + 1}\\,{j + 1}}} = {to_latex(v)}")
        return "\n".join(lines)
    raise ValueError(f"cannot print {type(obj).__name__}")


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------

_KEYWORDS = {"context", "lagrangian", "source", "section", "variation",
             "numeric"}


@dataclass
class ProblemFile:
    ctx: JetContext
    lagrangians: dict[str, Lagrangian] = field(default_factory=dict)
    sources: dict[str, SourceForm] = field(default_factory=dict)
    sections: dict[str, tuple[JetExpr, ...]] = field(default_factory=dict)
    variations: dict[str, tuple[JetExpr, ...]] = field(default_factory=dict)
    numeric: NumericConfig | None = None


def _strip_comment(line: str) -> str:
    idx = line.find("#")
    return line if idx < 0 else line[:idx]


def _blocks(text: str):
    """Group a problem file into (keyword, argument, [(lineno, line), ...])."""
    blocks = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        head = line.split()[0]
        if head in _KEYWORDS:
            arg = line[len(head):].strip()
            current = (head, arg, lineno, [])
            blocks.append(current)
        else:
            if current is None:
                raise ParseError(
                    f"expected a section keyword ({', '.join(sorted(_KEYWORDS))})",
                    lineno, 1)
            current[3].append((lineno, line))
    return blocks


def _parse_context_block(arg: str, lineno: int, body) -> JetContext:
    if arg:
        raise ParseError("context declaration takes no argument", lineno, 1)
    base: list[str] = []
    fibers: list[str] = []
    opaque: dict[str, tuple[str, ...]] = {}
    for ln, line in body:
        words = line.split()
        head = words[0]
        if head == "base":
            base.extend(words[1:])
        elif head in ("field", "fields"):
            fibers.extend(words[1:])
        elif head == "opaque":
            rest = line[len(head):].strip()
            name, args = _parse_opaque_decl(rest, ln)
            opaque[name] = args
        else:
            raise ParseError(
                f"unknown context entry {head!r} (expected base, field, opaque)",
                ln, 1)
    try:
        return JetContext.make(base, fibers, opaque)
    except ex.ExprError as err:
        raise ParseError(str(err), lineno, 1) from None


def _parse_opaque_decl(text: str, lineno: int) -> tuple[str, tuple[str, ...]]:
    toks = _lex(text, line=lineno)
    i = 0
    if toks[i].kind != "IDENT":
        raise ParseError("opaque declaration must be name(arg, ...)", lineno, 1)
    name = toks[i].text
    i += 1
    if toks[i].kind != "(":
        raise ParseError("opaque declaration must be name(arg, ...)", lineno, 1)
    i += 1
    args = []
    while toks[i].kind == "IDENT":
        args.append(toks[i].text)
        i += 1
        if toks[i].kind == ",":
            i += 1
    if toks[i].kind != ")" or toks[i + 1].kind != "EOF" or not args:
        raise ParseError("opaque declaration must be name(arg, ...)", lineno, 1)
    return name, tuple(args)


def _parse_components(ctx: JetContext, body, *, what: str, require_all: bool,
                      base_only: bool, block_line: int) -> tuple[JetExpr, ...]:
    comps: dict[int, JetExpr] = {}
    for ln, line in body:
        if "=" not in line:
            raise ParseError(f"{what} lines must read 'field = expression'",
                             ln, 1)
        lhs, rhs = line.split("=", 1)
        fname = lhs.strip()
        if fname not in ctx.fiber_names:
            raise ParseError(f"unknown field {fname!r}", ln, 1)
        idx = ctx.fiber_index(fname)
        if idx in comps:
            raise ParseError(f"duplicate component for field {fname!r}", ln, 1)
        value = parse_expr(rhs, ctx, line=ln)
        if base_only and jet_coords(value):
            raise ParseError(
                f"{what} expressions must be closed forms in the base "
                f"coordinates only", ln, 1)
        comps[idx] = value
    if require_all:
        missing = [ctx.fiber_names[i] for i in range(ctx.m) if i not in comps]
        if missing:
            raise ParseError(f"{what} must define every field; missing "
                             f"{', '.join(missing)}", block_line, 1)
    return tuple(comps.get(i, ex.ZERO) for i in range(ctx.m))


def _parse_numeric_block(ctx: JetContext, body, block_line: int) -> NumericConfig:
    domain: dict[int, tuple[float, float]] = {}
    nodes = 64
    step = 1e-3
    tol = 1e-6
    for ln, line in body:
        words = line.split()
        head = words[0]
        if head == "domain":
            if len(words) != 4:
                raise ParseError("domain lines read 'domain axis lo hi'", ln, 1)
            axis = ctx.axis(words[1]) if words[1] in ctx.base_names else None
            if axis is None:
                raise ParseError(f"unknown base variable {words[1]!r}", ln, 1)
            lo = _const_value(words[2], ctx, ln)
            hi = _const_value(words[3], ctx, ln)
            if not lo < hi:
                raise ParseError("domain bounds must satisfy lo < hi", ln, 1)
            domain[axis] = (lo, hi)
        elif head == "nodes":
            nodes = int(words[1])
        elif head == "step":
            step = float(words[1])
        elif head == "tol":
            tol = float(words[1])
        else:
            raise ParseError(f"unknown numeric entry {head!r}", ln, 1)
    missing = [ctx.base_names[a] for a in range(ctx.n) if a not in domain]
    if missing:
        raise ParseError(
            f"numeric block must give a domain for every base variable; "
            f"missing {', '.join(missing)}", block_line, 1)
    return NumericConfig(domain=tuple(domain[a] for a in range(ctx.n)),
                         nodes=nodes, step=step, tol=tol)


def _const_value(text: str, ctx: JetContext, line: int) -> float:
    value = parse_expr(text, ctx, line=line)
    try:
        return ex.evaluate(value, {})
    except ex.ExprError:
        raise ParseError(f"domain bound {text!r} is not a constant", line, 1) \
            from None


def parse_problem_file(text: str) -> ProblemFile:
    """Parse a problem file; the context declaration must come first."""
    blocks = _blocks(text)
    if not blocks or blocks[0][0] != "context":
        line = blocks[0][2] if blocks else 1
        raise ParseError("a problem file must start with a context declaration",
                         line, 1)
    ctx = _parse_context_block(blocks[0][1], blocks[0][2], blocks[0][3])
    pf = ProblemFile(ctx)
    for head, arg, lineno, body in blocks[1:]:
        if head == "context":
            raise ParseError("duplicate context declaration", lineno, 1)
        if head == "numeric":
            if pf.numeric is not None:
                raise ParseError("duplicate numeric block", lineno, 1)
            pf.numeric = _parse_numeric_block(ctx, body, lineno)
            continue
        if not arg or len(arg.split()) != 1:
            raise ParseError(f"{head} declarations need a single name", lineno, 1)
        name = arg
        if head == "lagrangian":
            src = " ".join(line for _ln, line in body)
            if not src:
                raise ParseError(f"lagrangian {name!r} has no expression",
                                 lineno, 1)
            pf.lagrangians[name] = Lagrangian(ctx, parse_expr(src, ctx,
                                                              line=lineno))
        elif head == "source":
            comps = _parse_components(ctx, body, what="source",
                                      require_all=False, base_only=False,
                                      block_line=lineno)
            pf.sources[name] = SourceForm(ctx, comps)
        elif head == "section":
            pf.sections[name] = _parse_components(
                ctx, body, what="section", require_all=True, base_only=True,
                block_line=lineno)
        elif head == "variation":
            pf.variations[name] = _parse_components(
                ctx, body, what="variation", require_all=False, base_only=True,
                block_line=lineno)
    return pf
