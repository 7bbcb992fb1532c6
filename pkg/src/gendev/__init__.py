"""Generalized developments of curves and reconstruction of isometric immersions."""
from .charts import (AmbientSpec, BundleSpec, ChartDomain, CurvatureValue, MetricField, ScalarField,
                     SecondFundamentalField, bundle_curvature, christoffel, parse_scalar_field,
                     riemann_curvature)
from .config import ConfigError, ProblemConfig, parse_config
from .curves import (BezierCurve, CoordinatePolyline, Curve, ExpressionCurve, LineCurve,
                     PolylineCurve, read_curve_csv, write_curve_csv)
from .errors import (ChartExitError, DriftError, EvaluationError, ExprError, ExprSyntaxError,
                     GeometryError, NumericError, SingularMetricError)
from .fundeq import (ResidualReport, TauMap, codazzi_residual, gauss_residual, residuals,
                     ricci_residual, tau_gamma, weingarten)
from .odeint import OdeOptions, Trajectory, integrate
from .problem import PointSeed, Problem, SubmanifoldSeed
from .reconstruct import (ImmersionSample, align_rigid, path_independence_audit, reconstruct_grid,
                          reconstruct_point)
from .transport import (DevelopmentResult, DevelopOptions, SplitSeed, bundle_transport, d_map,
                        develop, generalized_develop, parallel_transport)
from .variation import (AnsatzReport, CurveFamily, VariationTrajectory, integrate_base_variation,
                        integrate_gvariation, verify_ansatz)

__version__ = "0.1.0"
