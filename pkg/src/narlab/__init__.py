"""Numerical laboratory for harmonic analysis on H-type groups and harmonic NA spaces."""

from .diffops import FDScheme, apply_L, apply_L_beta, eigen_residual, harmonic_residual
from .geometry import (AdmissibleDomain, Cap, FatouConfig, Ray, Schedule, Sector, admissible_scan,
                       fatou_experiment, in_admissible, limit_along_ray, ray_point, sectorial_limit)
from .htype import (HTypeGroup, NPoint, SPoint, dilate, estimate_tau, hnorm, inverse, make_group,
                    multiply, quasi_dist, unit_ball_volume)
from .hyperbolic import HypSpace, hyp_apply_L, hyp_apply_L_beta, ray_limit_function, two_ray_report
from .kernels import SpectralParam, calibrate, poisson_p, q_kernel
from .measures import (BoundaryMeasure, LimitEstimate, atom, ball_mass, check_H1, density_measure,
                       haar, make_density, maximal_function, signed_example,
                       strong_derivative)
from .quadrature import QuadratureError, QuadratureSpec, integrate_n
from .transform import (check_H3, finiteness_check, hl_lower_constant, p_transform, q_transform,
                        tail_integral, verify_hl)

__version__ = "0.1.0"
