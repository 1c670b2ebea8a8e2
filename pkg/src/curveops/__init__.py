"""Curve operators on colored trivalent graphs, their symbols, and the
classical trace functions they converge to."""

from .qnum import Level, qsin, qint, admissible_triple, enumerate_colorings
from .surface import (Surface, GraphFormatError, surface_from_key, get_surface,
                      punctured_torus, four_holed_sphere, genus2_theta,
                      characters, Character, AlgebraElement)
from .curves import (MulticurveSpec, CurveFormatError, curve_core, curve_dual,
                     apply_dehn_twist, union, standard_curve, project_class,
                     intersection_sign)
from .fusion import (CapabilityError, CurveOperator, coeff_F, coeff_annulus,
                     assemble_operator, operator_coefficients, compose)
from .symbol import (PsiSymbol, AsymptoticFit, AnchorError, FitError,
                     symbol_sample, symbol_from_operator, extrapolate,
                     first_order_report, composite_row)
from .charvar import (SU2Element, pants_rep, build_representation,
                      trace_function, hamiltonian, poisson_bracket,
                      origin_shift, AngleLattice)
from .harness import Scenario, Report, run_scenario, emit_report, UsageError

__version__ = "0.1.0"
