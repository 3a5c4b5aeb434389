"""Finite-order variational calculus on jet spaces: Euler-Lagrange and
Helmholtz morphisms, adjoints, Jacobi morphisms, iterated quotient
variations, and a finite-difference/quadrature oracle along sections."""

from .expr import (JetContext, JetExpr, jet_order, partial, simplify,
                   substitute, to_plain)
from .jetcalc import (VerticalField, d_h, d_v, prolong, total_derivative,
                      total_derivative_multi)
from .multiindex import MultiIndex, enumerate_up_to
from .numeric import (NumericConfig, NumericSection, VariationConfig, action,
                      check_critical, check_onshell_symmetry, eval_on_section,
                      finite_diff_variation, second_variation_check)
from .textio import parse_expr, parse_problem_file, parse_structured, print_object
from .variational import (BilinearForm, Lagrangian, SourceForm, adjoint,
                          contract, contract_source, euler_lagrange, helmholtz,
                          helmholtz_skew, hessian, is_locally_variational,
                          jacobi, quotient_variation,
                          second_variation_decomposition,
                          vertical_differential)

__version__ = "0.1.0"

__all__ = [
    "JetContext", "JetExpr", "MultiIndex", "VerticalField",
    "Lagrangian", "SourceForm", "BilinearForm",
    "NumericConfig", "NumericSection", "VariationConfig",
    "enumerate_up_to", "jet_order", "partial", "simplify", "substitute",
    "to_plain", "total_derivative", "total_derivative_multi", "prolong",
    "d_h", "d_v", "euler_lagrange", "helmholtz", "helmholtz_skew",
    "is_locally_variational", "adjoint", "vertical_differential", "jacobi",
    "contract", "contract_source", "quotient_variation", "hessian",
    "second_variation_decomposition", "action", "eval_on_section",
    "finite_diff_variation", "check_critical", "check_onshell_symmetry",
    "second_variation_check", "parse_expr", "parse_problem_file",
    "parse_structured", "print_object",
]
