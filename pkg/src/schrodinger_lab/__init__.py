"""Numerical laboratory for Schrodinger maximal functions.

Bump-sum spectra and phases, lattice shells and rotated lattices, dense
directions on the torus, the extension operator, delta-cap geometry,
the lattice-based divergence construction and maximal-function norms.
"""
from .errors import (DichotomyError, EnumerationBudgetError, LabError, NumericalGuardError,
                     OscillationGuardError, OverlapWarning, QuadratureError, SearchExhaustedError,
                     ValidationError)
from .spectra import BumpSumSpectrum, PhaseSpec, SobolevReport, sobolev_norm, spectrum_l2_norm
from .lattice import (LatticeShell, ScaledLattice, best_shell, enumerate_shell, nearest_point,
                      random_rotation, shell_count_table)
from .direction import (DirectionCertificate, criterion_sum, empirical_density_gap,
                        find_direction)
from .propagator import QuadratureConfig, SpaceTimePoint, bump_sum_eval, extension_eval
from .caps import (BallClassification, Cap, CaseI, CaseII, classify_ball, multilinear_norm,
                   normal, parabolic_rescale, partition_caps, transversality_wedge)
from .counterexample import (CounterexampleInstance, DirectionConfig, LowerBoundReport,
                             build_mollifier, build_theorem2_instance, sobolev_obstruction,
                             verify_lower_bound)
from .maximal import (ExponentFit, TimeWindow, fit_exponent, l2_over_ball,
                      operator_norm_estimate, sup_over_time)

__version__ = "0.1.0"
