"""Distributed receding-horizon trajectory generation for robot swarms.

Per-agent planners parameterize position references as piecewise Bezier
curves, avoid each other through buffered Voronoi cells or on-demand
linearized constraints, and replan event-triggered when disturbed.  The
package ships the planning core, a cycle-synchronous swarm simulator, and a
benchmark front end comparing the avoidance methods.
"""

from .bezier import (BezierSpline, SplineBasis, bernstein, build_basis,
                     continuity_constraints, derivative_control_points,
                     energy_gram, initial_condition_constraints,
                     limit_constraints)
from .collision import (EllipsoidSpec, HalfspaceConstraint, HorizonPrediction,
                        bvc_constraints, bvc_halfspace, combine_specs,
                        detect_first_collision, neighbor_set,
                        obstacle_as_neighbor, ondemand_constraint,
                        scaled_distance)
from .dynamics import (LinearAgentModel, StackedPrediction, build_stacked,
                       make_second_order_model, predict_states)
from .errors import (DegenerateGeometryError, ScenarioGenerationError,
                     StalePredictionError)
from .planner import (AgentRuntime, AgentUpdate, PlannerConfig, PlannerCore,
                      activation, build_core, choose_initial_reference,
                      init_runtime, update_agent)
from .qp import (QpProblem, QpSolution, assemble, energy_cost, error_cost,
                 kkt_residual, solve, violation_cost)
from .sim import (Disturbance, Obstacle, RunMetrics, ScenarioSpec,
                  collision_check, default_collision_spec, default_workspace,
                  hoop_scenario, random_transition_scenario, run_scenario,
                  step_world, validate_scenario)

__version__ = "0.1.0"
