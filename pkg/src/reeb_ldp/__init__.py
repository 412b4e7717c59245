"""Noise-driven energy diffusion on level-set graphs of planar Hamiltonians.

Layers: system configs and critical structure (systems), graph topology
(reeb), orbit-averaged coefficients (coeffs), saddle charts (chart), the
rescaled SDE engine (sde), the path action and its minimizers (action),
and Monte Carlo / closed-form verification oracles (verify).
"""

__version__ = "0.1.0"

from .errors import (ReebLdpError, ConfigError, DegenerateCritical,
                     NonConvergence, BadKind, AmbiguousWiring,
                     EqualSaddleLevels, OutsideBox, ContinuityBreak,
                     GridMismatch, GuardBand, NoClosure, DegenerateCurve,
                     OutOfSpan, BoxExit, StepTooLarge, ChartFail,
                     OutsideChart, UncoveredEdge, Unreachable)
from .systems import (HamiltonianSystem, SigmaField, CriticalPoint,
                      builtin_system, load_system, make_sigma,
                      find_critical_points, check_assumptions,
                      positive_drift_margin)
from .reeb import (ReebGraph, Vertex, Edge, GraphPoint, GraphPath,
                   build_reeb_graph, project, project_trajectory,
                   graph_distance, resample_path, path_distance)
from .coeffs import (EdgeCoefficientTable, trace_level_curve, coeffs_at,
                     tabulate_edge, tabulate_all, min_period,
                     extremum_period_limit)
from .chart import (SaddleChart, build_saddle_chart, transit_time,
                    transit_time_identity, transit_derivative_scaling,
                    flow_exit_time)
from .sde import (SimulationConfig, SimulationResult, simulate,
                  integrate_flow, resolve_dt, max_stable_dt,
                  default_threads)
from .action import (ActionValue, EdgeGeometry, MinActionResult,
                     build_edge_geometry, build_geometries,
                     evaluate_action, minimize_action, route_between,
                     terminal_speed)
from .verify import (TubeExperiment, TubeEstimate, estimate_tube,
                     tube_reference_action, derive_start_point,
                     escape_extremum_probe, brownian_saddle_oracle,
                     quadratic_variation_check, wilson_interval, fit_rate,
                     max_endpoint_joint)

__all__ = [n for n in dir() if not n.startswith("_")]
