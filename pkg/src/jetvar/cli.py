"""Command-line front-end: parse a problem file, run a variational
operation or a numeric check, print the result.

Exit codes: 0 success; 1 usage or parse error; 2 semantic error (unknown
name, arity/order mismatch); 3 a numeric check failed beyond tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import expr as ex
from .expr import JetExpr
from .jetcalc import VerticalField
from .numeric import (NotCritical, NumericConfig, NumericError,
                      NumericSection, check_critical, check_onshell_symmetry,
                      first_variation_pair, second_variation_check)
from .textio import (ParseError, ProblemFile, object_to_dict, parse_problem_file,
                     parse_structured, print_object)
from .variational import (Lagrangian, SourceForm, adjoint, euler_lagrange,
                          helmholtz, helmholtz_skew, jacobi,
                          quotient_variation, vertical_differential)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SEMANTIC = 2
EXIT_CHECK_FAILED = 3


class SemanticError(ValueError):
    pass


class CheckFailed(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise _UsageError(message)


class _UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jetvar", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, numeric=False):
        sp.add_argument("input", help="problem file path")
        sp.add_argument("--format", choices=("plain", "latex", "structured"),
                        default="plain")
        sp.add_argument("--lagrangian", metavar="NAME")
        sp.add_argument("--source", metavar="NAME")
        sp.add_argument("--section", metavar="NAME")
        sp.add_argument("--fields", metavar="NAME,NAME",
                        help="comma-separated variation field names")
        sp.add_argument("--output", metavar="PATH",
                        help="write output to PATH instead of stdout")
        if numeric:
            sp.add_argument("--nodes", type=int, metavar="N")
            sp.add_argument("--step", type=float, metavar="H")
            sp.add_argument("--tol", type=float, metavar="T")

    common(sub.add_parser("el", help="Euler-Lagrange source form"))
    common(sub.add_parser("jacobi", help="vertical differential, its adjoint, "
                                         "and an on-shell report"), numeric=True)
    common(sub.add_parser("helmholtz", help="Helmholtz obstruction and "
                                            "local-variationality verdict"))
    common(sub.add_parser("hessian", help="Hessian density for two fields"))
    common(sub.add_parser("variation", help="iterated quotient variation"))
    common(sub.add_parser("check-critical", help="criticality residuals"),
           numeric=True)
    common(sub.add_parser("second-var", help="numeric second-variation check"),
           numeric=True)
    adj = sub.add_parser("adjoint", help="adjoint of a bilinear form")
    common(adj)
    adj.add_argument("--bilinear", metavar="PATH", required=True,
                     help="structured-format bilinear form ('-' for stdin)")
    return p


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _pick(table: dict, name: str | None, what: str):
    if name is not None:
        if name not in table:
            raise SemanticError(f"unknown {what} {name!r}; file defines "
                                f"{sorted(table) or 'none'}")
        return table[name]
    if len(table) == 1:
        return next(iter(table.values()))
    if not table:
        raise SemanticError(f"the problem file defines no {what}")
    raise SemanticError(f"several {what}s defined ({sorted(table)}); "
                        f"select one with --{what}")


def _lagrangian(pf: ProblemFile, args) -> Lagrangian:
    return _pick(pf.lagrangians, args.lagrangian, "lagrangian")


def _source(pf: ProblemFile, args) -> SourceForm:
    """A source form: --source NAME, or the Euler-Lagrange form of a
    selected Lagrangian, or whichever of the two the file defines uniquely."""
    if args.source is not None:
        return _pick(pf.sources, args.source, "source")
    if args.lagrangian is not None:
        return euler_lagrange(_lagrangian(pf, args))
    if pf.sources and not pf.lagrangians:
        return _pick(pf.sources, None, "source")
    if pf.lagrangians and not pf.sources:
        return euler_lagrange(_pick(pf.lagrangians, None, "lagrangian"))
    raise SemanticError("select a source form with --source NAME or a "
                        "lagrangian with --lagrangian NAME")


def _field_names(args) -> list[str]:
    if not args.fields:
        raise SemanticError("this command needs --fields NAME[,NAME...]")
    return [w.strip() for w in args.fields.split(",") if w.strip()]


def _variations(pf: ProblemFile, args, count: int | None = None
                ) -> list[tuple[JetExpr, ...]]:
    names = _field_names(args)
    if count is not None and len(names) != count:
        raise SemanticError(f"this command needs exactly {count} field names")
    out = []
    for nm in names:
        if nm not in pf.variations:
            raise SemanticError(f"unknown variation field {nm!r}; file defines "
                                f"{sorted(pf.variations) or 'none'}")
        out.append(pf.variations[nm])
    return out


def _numeric_config(pf: ProblemFile, args) -> NumericConfig:
    cfg = pf.numeric
    if cfg is None:
        raise SemanticError("this command needs a numeric block in the "
                            "problem file")
    nodes = getattr(args, "nodes", None) or cfg.nodes
    step = getattr(args, "step", None) or cfg.step
    tol = getattr(args, "tol", None) or cfg.tol
    return NumericConfig(cfg.domain, nodes, step, tol)


def _section(pf: ProblemFile, args, cfg: NumericConfig) -> NumericSection:
    exprs = _pick(pf.sections, args.section, "section")
    return NumericSection(pf.ctx, exprs, cfg.domain, cfg.nodes)


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _structured(args, payload: dict) -> str:
    payload = {"command": args.command, **payload}
    return json.dumps(payload, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_el(pf: ProblemFile, args) -> str:
    e = euler_lagrange(_lagrangian(pf, args))
    if args.format == "structured":
        return _structured(args, {"source_form": object_to_dict(e)})
    return print_object(e, args.format)


def _cmd_helmholtz(pf: ProblemFile, args) -> str:
    src = _source(pf, args)
    ht = helmholtz(src)
    variational = ht.is_zero
    verdict = "locally variational" if variational else "not locally variational"
    if args.format == "structured":
        return _structured(args, {"helmholtz": object_to_dict(ht),
                                  "helmholtz_skew":
                                      object_to_dict(helmholtz_skew(src)),
                                  "locally_variational": variational})
    out = [print_object(ht, args.format, name="H")]
    if not variational:
        out.append("skew part:")
        out.append(print_object(helmholtz_skew(src), args.format, name="H"))
    out.append(f"verdict: {verdict}")
    return "\n".join(out)


def _cmd_jacobi(pf: ProblemFile, args) -> str:
    lag = _lagrangian(pf, args)
    ve = vertical_differential(lag)
    jac = jacobi(lag)
    selfadj = ve == jac
    onshell = None
    if args.section is not None:
        cfg = _numeric_config(pf, args)
        sec = _section(pf, args, cfg)
        fields = _variations(pf, args, 2) if args.fields else None
        if fields is None:
            raise SemanticError("--section also needs --fields A,B for the "
                                "on-shell report")
        try:
            rep = check_onshell_symmetry(lag, sec, fields[0], fields[1],
                                         crit_tol=cfg.tol)
        except NotCritical as err:
            raise CheckFailed(str(err)) from None
        onshell = {"lhs": rep.lhs, "rhs": rep.rhs,
                   "difference": rep.difference,
                   "pointwise_max": rep.pointwise_max,
                   "criticality_residual": rep.residual}
        if not rep.symmetric(cfg.tol):
            raise CheckFailed(
                f"on-shell symmetry violated: lhs={rep.lhs!r} rhs={rep.rhs!r}")
    if args.format == "structured":
        payload = {"vertical_differential": object_to_dict(ve),
                   "jacobi": object_to_dict(jac),
                   "formally_self_adjoint": selfadj}
        if onshell is not None:
            payload["onshell_symmetry"] = onshell
        return _structured(args, payload)
    out = [print_object(ve, args.format, name="V"), "",
           print_object(jac, args.format, name="J"), "",
           f"formally self-adjoint: {'yes' if selfadj else 'no'}"]
    if onshell is not None:
        out.append(f"on-shell symmetry: lhs = {onshell['lhs']!r}, "
                   f"rhs = {onshell['rhs']!r}, "
                   f"difference = {onshell['difference']!r}")
    return "\n".join(out)


def _cmd_variation(pf: ProblemFile, args, count: int | None) -> str:
    lag = _lagrangian(pf, args)
    fields = [VerticalField(pf.ctx, comps)
              for comps in _variations(pf, args, count)]
    v = quotient_variation(lag, fields)
    if args.format == "structured":
        return _structured(args, {"order": len(fields),
                                  "density": object_to_dict(v.density)})
    return print_object(v.density, args.format)


def _cmd_check_critical(pf: ProblemFile, args) -> str:
    lag = _lagrangian(pf, args)
    cfg = _numeric_config(pf, args)
    sec = _section(pf, args, cfg)
    rep = check_critical(lag, sec, tol=cfg.tol)
    first_vars = {}
    if args.fields:
        for nm, comps in zip(_field_names(args), _variations(pf, args)):
            fd, sym = first_variation_pair(lag, sec, comps, step=cfg.step)
            first_vars[nm] = {"finite_difference": fd, "integral": sym}
    payload = {"max_residual": rep.max_residual,
               "per_component": list(rep.per_component),
               "tol": rep.tol, "critical": rep.is_critical,
               "first_variations": first_vars}
    if args.format == "structured":
        text = _structured(args, payload)
    else:
        lines = [f"max residual: {rep.max_residual!r}",
                 f"per component: "
                 + ", ".join(repr(x) for x in rep.per_component),
                 f"critical (tol {cfg.tol:g}): "
                 f"{'yes' if rep.is_critical else 'no'}"]
        for nm, d in first_vars.items():
            lines.append(f"first variation [{nm}]: fd = "
                         f"{d['finite_difference']!r}, "
                         f"integral = {d['integral']!r}")
        text = "\n".join(lines)
    if not rep.is_critical:
        raise CheckFailed(text)
    return text


def _cmd_second_var(pf: ProblemFile, args) -> str:
    lag = _lagrangian(pf, args)
    cfg = _numeric_config(pf, args)
    sec = _section(pf, args, cfg)
    fields = _variations(pf, args, 2)
    try:
        rep = second_variation_check(lag, sec, fields[0], fields[1],
                                     step=cfg.step, crit_tol=cfg.tol)
    except NotCritical as err:
        raise CheckFailed(str(err)) from None
    payload = {"finite_difference": rep.finite_difference,
               "integral_vertical_differential":
                   rep.integral_vertical_differential,
               "integral_jacobi": rep.integral_jacobi,
               "criticality_residual": rep.residual,
               "consistent": rep.consistent(cfg.tol)}
    if args.format == "structured":
        text = _structured(args, payload)
    else:
        text = "\n".join([
            f"finite-difference second variation: {rep.finite_difference!r}",
            f"integral against vertical differential: "
            f"{rep.integral_vertical_differential!r}",
            f"integral against jacobi morphism: {rep.integral_jacobi!r}",
            f"consistent (rel tol {cfg.tol:g}): "
            f"{'yes' if rep.consistent(cfg.tol) else 'no'}"])
    if not rep.consistent(cfg.tol):
        raise CheckFailed(text)
    return text


def _cmd_adjoint(pf: ProblemFile, args) -> str:
    if args.bilinear == "-":
        text = sys.stdin.read()
    else:
        with open(args.bilinear, encoding="utf-8") as fh:
            text = fh.read()
    try:
        form = parse_structured(text, pf.ctx)
    except (ValueError, KeyError) as err:
        raise SemanticError(f"cannot read bilinear form: {err}") from None
    from .variational import BilinearForm
    if not isinstance(form, BilinearForm):
        raise SemanticError("--bilinear input is not a bilinear form")
    out = adjoint(form)
    if args.format == "structured":
        return _structured(args, {"adjoint": object_to_dict(out)})
    return print_object(out, args.format, name="A")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def run(args) -> str:
    try:
        with open(args.input, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise _UsageError(f"cannot read {args.input!r}: {err}") from None
    pf = parse_problem_file(text)
    if args.command == "el":
        return _cmd_el(pf, args)
    if args.command == "helmholtz":
        return _cmd_helmholtz(pf, args)
    if args.command == "jacobi":
        return _cmd_jacobi(pf, args)
    if args.command == "hessian":
        return _cmd_variation(pf, args, 2)
    if args.command == "variation":
        return _cmd_variation(pf, args, None)
    if args.command == "check-critical":
        return _cmd_check_critical(pf, args)
    if args.command == "second-var":
        return _cmd_second_var(pf, args)
    if args.command == "adjoint":
        return _cmd_adjoint(pf, args)
    raise _UsageError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _emit(args, run(args))
        return EXIT_OK
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SemanticError, ex.ExprError, NumericError) as err:
        if isinstance(err, NotCritical):
            print(f"check failed: {err}", file=sys.stderr)
            return EXIT_CHECK_FAILED
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SEMANTIC
    except CheckFailed as err:
        # the failing report is still the requested output
        _emit(args, str(err))
        print("check failed beyond tolerance", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
