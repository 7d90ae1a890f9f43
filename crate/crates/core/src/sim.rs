//! Closed-loop scenario simulation: a subject vehicle planning against
//! scripted traffic on a circular two-lane road, with full trace capture
//! and summary metrics.
//!
//! Scripted vehicles hold their lane and speed; their pose at step `n` is
//! computed in closed form (`angle = angle0 + n*dt*v/r`), so their arc
//! advance is `n*v*dt` to rounding. The subject vehicle cruises the same
//! way until the planner commits a maneuver, follows the maneuver's
//! path-frame trajectory while it lasts, and cruises again on the target
//! lane afterward.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::geometry::{ReferencePath, Vec2, VehicleState};
use crate::optimizer::{grid_search, iterations_to, optimize, SwarmConfig, SwarmMode};
use crate::planner::{
    plan_step, CostWeights, Lane, ManeuverProblem, PlanAction, PlanEnv, PlanError, PlanPhase,
    PlannerState,
};
use crate::riskfield::{FieldParams, FieldSample, SystemState, TriggerThresholds};
use crate::scalar::{wrap_to_pi, Real};
use crate::trajectory::{DynamicLimits, VehicleGeometry};

/// Center distance below which a run aborts as a collision, m.
const COLLISION_DISTANCE: f64 = 1.0;
/// Required initial spacing between every vehicle pair, m.
const MIN_INITIAL_SPACING: f64 = 2.0;
/// Waypoint spacing of generated lane centerlines, m.
const LANE_WAYPOINT_SPACING: f64 = 0.5;
/// Resample step of generated lane centerlines, m.
const LANE_RESAMPLE_STEP: f64 = 0.5;

/// Errors from scenario building and simulation.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario invalid: {reason}")]
    Invalid { reason: String },
    #[error("scenario never triggered a lane change")]
    NeverTriggered,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Vehicle roles of the four-vehicle scenario layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Subject vehicle: the one that plans.
    #[serde(rename = "SV")]
    Subject,
    /// Preceding vehicle: ahead in the subject's lane.
    #[serde(rename = "PV")]
    Preceding,
    /// Interfering vehicle: ahead in the adjacent lane.
    #[serde(rename = "IV")]
    Interfering,
    /// Rear vehicle: behind in the adjacent lane.
    #[serde(rename = "RV")]
    Rear,
}

impl Role {
    /// Lowercase key used in trace column names.
    pub fn key(self) -> &'static str {
        match self {
            Role::Subject => "sv",
            Role::Preceding => "pv",
            Role::Interfering => "iv",
            Role::Rear => "rv",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Role::Subject => "SV",
            Role::Preceding => "PV",
            Role::Interfering => "IV",
            Role::Rear => "RV",
        };
        f.write_str(name)
    }
}

/// One vehicle of a built scenario.
#[derive(Debug, Clone)]
pub struct SimVehicle<F> {
    pub role: Role,
    /// Index into [`Scenario::lanes`].
    pub lane: usize,
    /// Initial polar angle about the road center, rad.
    pub angle0: F,
    /// Constant speed, m/s.
    pub speed: F,
}

/// A validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario<F> {
    pub name: String,
    pub center: Vec2<F>,
    /// Lane 1 (outer) first, lane 2 (inner) second.
    pub lanes: Vec<Lane<F>>,
    pub vehicles: Vec<SimVehicle<F>>,
    /// Index of the subject vehicle in `vehicles`.
    pub subject: usize,
    /// Lane index the route targets.
    pub target_lane: usize,
    pub dt: F,
    /// Number of simulated steps; the trace has `horizon + 1` rows.
    pub horizon: usize,
    pub params: FieldParams<F>,
    pub thresholds: TriggerThresholds<F>,
    pub swarm: SwarmConfig<F>,
    pub weights: CostWeights<F>,
    pub limits: DynamicLimits<F>,
    pub vehicle_geometry: VehicleGeometry<F>,
    /// Maneuver sampling step, s.
    pub dt_sample: F,
    /// Default seed used when the caller does not override it.
    pub seed: u64,
}

fn invalid<T>(reason: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::Invalid { reason: reason.into() })
}

/// Builds the centerline path of one lane.
fn circle_lane<F: Real>(id: u8, center: Vec2<F>, radius: F) -> Lane<F> {
    let circumference = F::TAU() * radius;
    let n = (circumference / F::of(LANE_WAYPOINT_SPACING))
        .ceil()
        .to_f64()
        .expect("waypoint count fits f64") as usize;
    let waypoints: Vec<Vec2<F>> = (0..=n)
        .map(|k| {
            let angle = F::TAU() * F::of_usize(k) / F::of_usize(n);
            center + Vec2::from_angle(angle).scale(radius)
        })
        .collect();
    let path = ReferencePath::new(&waypoints, F::of(LANE_RESAMPLE_STEP))
        .expect("generated circle waypoints are valid");
    Lane { id, radius, path }
}

/// Pose of a vehicle riding a circle of `radius` at `angle`.
fn circle_state<F: Real>(center: Vec2<F>, radius: F, angle: F, speed: F) -> VehicleState<F> {
    let pos = center + Vec2::from_angle(angle).scale(radius);
    VehicleState {
        x: pos.x,
        y: pos.y,
        theta: wrap_to_pi(angle + F::FRAC_PI_2()),
        v: speed,
        a: F::zero(),
        kappa: F::one() / radius,
        psi_dot: speed / radius,
    }
}

impl<F: Real> Scenario<F> {
    /// Validates a config and builds the runnable scenario from it.
    pub fn build(config: &ScenarioConfig<F>) -> Result<Self, SimError> {
        let road = &config.road;
        for (key, value) in [
            ("road.inner_edge_radius", road.inner_edge_radius),
            ("road.outer_edge_radius", road.outer_edge_radius),
            ("road.lane_width", road.lane_width),
        ] {
            if !(value > F::zero()) || !value.is_finite() {
                return invalid(format!("{key} must be positive and finite"));
            }
        }
        if !(road.outer_edge_radius > road.inner_edge_radius) {
            return invalid("road.outer_edge_radius must exceed road.inner_edge_radius");
        }
        let span = road.outer_edge_radius - road.inner_edge_radius;
        if span + F::of(1e-9) < F::of(2.0) * road.lane_width {
            return invalid("road edges leave no room for two lanes of road.lane_width");
        }
        let center = Vec2::new(road.center[0], road.center[1]);
        if !center.x.is_finite() || !center.y.is_finite() {
            return invalid("road.center must be finite");
        }
        let half = road.lane_width * F::of(0.5);
        let outer_radius = road.outer_edge_radius - half;
        let inner_radius = road.inner_edge_radius + half;
        let lanes = vec![
            circle_lane(1, center, outer_radius),
            circle_lane(2, center, inner_radius),
        ];

        let lane_index = |id: u8| -> Option<usize> { lanes.iter().position(|l| l.id == id) };
        let target_lane = match lane_index(config.target_lane) {
            Some(i) => i,
            None => return invalid(format!("target_lane {} is not a lane id", config.target_lane)),
        };

        if config.vehicles.is_empty() {
            return invalid("vehicles must not be empty");
        }
        let mut vehicles = Vec::with_capacity(config.vehicles.len());
        let mut subject = None;
        for (i, v) in config.vehicles.iter().enumerate() {
            let lane = match lane_index(v.lane) {
                Some(l) => l,
                None => return invalid(format!("vehicles[{i}].lane {} is not a lane id", v.lane)),
            };
            if !v.speed.is_finite() || v.speed < F::zero() {
                return invalid(format!("vehicles[{i}].speed must be finite and non-negative"));
            }
            if !v.angle_deg.is_finite() {
                return invalid(format!("vehicles[{i}].angle_deg must be finite"));
            }
            if vehicles.iter().any(|u: &SimVehicle<F>| u.role == v.role) {
                return invalid(format!("vehicles[{i}].role {} appears twice", v.role));
            }
            if v.role == Role::Subject {
                subject = Some(i);
            }
            vehicles.push(SimVehicle {
                role: v.role,
                lane,
                angle0: v.angle_deg.to_radians(),
                speed: v.speed,
            });
        }
        let subject = match subject {
            Some(s) => s,
            None => return invalid("vehicles must include the SV role"),
        };

        if !(config.dt > F::zero()) || !config.dt.is_finite() {
            return invalid("dt must be positive and finite");
        }
        if config.horizon == 0 {
            return invalid("horizon must be at least 1 step");
        }
        if !(config.dt_sample > F::zero()) || !config.dt_sample.is_finite() {
            return invalid("dt_sample must be positive and finite");
        }
        if let Err(e) = config.field_params.validate() {
            return invalid(e.to_string());
        }
        if let Err(e) = config.swarm.validate() {
            return invalid(format!("swarm: {e}"));
        }
        for (key, value) in [
            ("thresholds.u_b", config.thresholds.u_b),
            ("thresholds.u_c", config.thresholds.u_c),
        ] {
            if !value.is_finite() || !(value > F::zero()) {
                return invalid(format!("{key} must be positive and finite"));
            }
        }

        let scenario = Self {
            name: config.name.clone(),
            center,
            lanes,
            vehicles,
            subject,
            target_lane,
            dt: config.dt,
            horizon: config.horizon,
            params: config.field_params,
            thresholds: config.thresholds,
            swarm: config.swarm.clone(),
            weights: config.cost_weights,
            limits: config.limits,
            vehicle_geometry: config.vehicle,
            dt_sample: config.dt_sample,
            seed: config.seed,
        };

        // Initial spacing: every pair at least MIN_INITIAL_SPACING apart.
        let states: Vec<(Role, VehicleState<F>)> = scenario
            .vehicles
            .iter()
            .map(|v| (v.role, scenario.scripted_state(v, 0)))
            .collect();
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                let dist = states[i].1.position().distance(states[j].1.position());
                if dist < F::of(MIN_INITIAL_SPACING) {
                    return invalid(format!(
                        "vehicles {} and {} start {:.2} m apart, need at least {MIN_INITIAL_SPACING}",
                        states[i].0,
                        states[j].0,
                        dist.to_f64().unwrap_or(f64::NAN)
                    ));
                }
            }
        }
        Ok(scenario)
    }

    /// Closed-form pose of a lane-holding vehicle at step `n`.
    fn scripted_state(&self, v: &SimVehicle<F>, step: usize) -> VehicleState<F> {
        let lane = &self.lanes[v.lane];
        let angle = v.angle0 + v.speed * self.dt * F::of_usize(step) / lane.radius;
        circle_state(self.center, lane.radius, angle, v.speed)
    }
}

/// Why a run ended early.
#[derive(Debug, Clone)]
pub enum SimFailure {
    Collision { step: usize, role: Role, distance: f64 },
    Planner { step: usize, message: String },
}

impl std::fmt::Display for SimFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimFailure::Collision { step, role, distance } => {
                write!(f, "collision with {role} at step {step} ({distance:.3} m)")
            }
            SimFailure::Planner { step, message } => {
                write!(f, "planning failed at step {step}: {message}")
            }
        }
    }
}

/// One logged step.
#[derive(Debug, Clone)]
pub struct TraceRow<F> {
    pub step: usize,
    pub t: F,
    pub phase: PlanPhase,
    pub action: PlanAction,
    /// Subject pose and controls.
    pub x: F,
    pub y: F,
    pub theta: F,
    pub v: F,
    /// Commanded longitudinal acceleration (zero: speeds are piecewise
    /// constant).
    pub a: F,
    /// Lateral offset from the lane being tracked, m.
    pub lat_offset: F,
    pub a_y: F,
    pub psi_dot: F,
    pub beta: F,
    pub delta: F,
    /// Field evaluation the step's decision used.
    pub fields: FieldSample<F>,
    pub u_a_adjacent: F,
    pub triggered: bool,
    /// Distance to the nearest other vehicle, m.
    pub min_distance: F,
    /// Positions of the other vehicles, in [`SimTrace::other_roles`]
    /// order.
    pub others: Vec<Vec2<F>>,
}

/// Decision and execution summary of the one maneuver a run may contain.
#[derive(Debug, Clone, Serialize)]
pub struct ManeuverSummary<F> {
    pub trigger_step: usize,
    pub duration: F,
    pub advance: F,
    pub speed: F,
    pub completion_step: Option<usize>,
    /// Iterations the maneuver search ran.
    pub search_iterations: usize,
    /// Penalized fitness of the chosen maneuver.
    pub search_cost: F,
}

/// Full record of one run.
#[derive(Debug, Clone)]
pub struct SimTrace<F> {
    pub name: String,
    pub seed: u64,
    pub dt: F,
    /// Roles of the non-subject vehicles, fixing the order of
    /// [`TraceRow::others`] and the trace columns.
    pub other_roles: Vec<Role>,
    /// Limits the run was checked against.
    pub limits: DynamicLimits<F>,
    pub rows: Vec<TraceRow<F>>,
    pub maneuver: Option<ManeuverSummary<F>>,
    pub failure: Option<SimFailure>,
}

/// Summary metrics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Metrics<F> {
    pub scenario: String,
    pub seed: u64,
    pub rows: usize,
    pub triggered: bool,
    pub trigger_step: Option<usize>,
    pub trigger_time: Option<F>,
    /// Field components at the trigger row.
    pub trigger_fields: Option<FieldSample<F>>,
    pub trigger_u_a_adjacent: Option<F>,
    pub lane_changes: usize,
    pub completed: bool,
    pub completion_step: Option<usize>,
    pub maneuver: Option<ManeuverSummary<F>>,
    pub min_distance: F,
    pub max_abs_a_y: F,
    pub max_abs_psi_dot: F,
    pub max_abs_beta: F,
    pub max_abs_delta: F,
    /// Rows on which any dynamic limit was exceeded.
    pub limit_violation_rows: usize,
    pub collision: bool,
    pub failure: Option<String>,
}

/// Runs a scenario with the given seed, which drives only the maneuver
/// search. Failures (collision, infeasible planning) end the run early
/// and are recorded on the trace rather than returned as errors.
pub fn run_scenario<F: Real>(scenario: &Scenario<F>, seed: u64) -> SimTrace<F> {
    run_internal(scenario, seed, false).0
}

/// Runs a scenario up to its trigger step and returns the maneuver search
/// problem built there together with the swarm configuration, for
/// benchmarking the search in isolation.
pub fn trigger_problem<F: Real>(
    scenario: &Scenario<F>,
    seed: u64,
) -> Result<(ManeuverProblem<F>, SwarmConfig<F>), SimError> {
    let (trace, problem) = run_internal(scenario, seed, true);
    if let Some(SimFailure::Planner { step, message }) = &trace.failure {
        return Err(SimError::Invalid {
            reason: format!("planning failed at step {step}: {message}"),
        });
    }
    match problem {
        Some(p) => {
            let mut cfg = scenario.swarm.clone();
            cfg.seed = seed;
            Ok((p, cfg))
        }
        None => Err(SimError::NeverTriggered),
    }
}

/// One algorithm's summary over the seeds of a paired benchmark. Medians
/// are even-length-averaged; a run that never reaches the target counts
/// at the iteration cap.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow<F> {
    pub algorithm: &'static str,
    pub seeds: usize,
    /// Runs whose history reached the tolerance target.
    pub target_hits: usize,
    pub median_iterations: F,
    pub median_wall_ms: F,
    pub median_final_cost: F,
}

/// Paired comparison of the adaptive and fixed-parameter searches on a
/// scenario's trigger-step planning problem.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport<F> {
    pub scenario: String,
    /// Penalized fitness of the best cell of a 100x100 grid over the
    /// decision box.
    pub oracle_cost: F,
    /// Convergence target the iteration counts are measured against:
    /// within 1% of the grid oracle.
    pub target: F,
    /// Adaptive row first, fixed-parameter row second.
    pub rows: [BenchRow<F>; 2],
}

impl<F: Real> BenchReport<F> {
    /// Whether the adaptive search beat the fixed baseline on both
    /// medians (strictly).
    pub fn adaptive_wins(&self) -> bool {
        let [a, f] = &self.rows;
        a.median_iterations < f.median_iterations && a.median_wall_ms < f.median_wall_ms
    }
}

fn median<F: Real>(values: &mut [F]) -> F {
    values.sort_by(|a, b| a.partial_cmp(b).expect("bench values are never NaN"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * F::of(0.5)
    }
}

/// Runs both swarm modes on the maneuver search problem the scenario
/// poses at its trigger step, over seeds `0..seeds`, and reports
/// per-algorithm medians against a shared grid-search tolerance target.
/// Seeds run sequentially in order; each run parallelizes internally.
pub fn paired_bench<F: Real>(
    scenario: &Scenario<F>,
    seeds: usize,
) -> Result<BenchReport<F>, SimError> {
    assert!(seeds >= 1, "paired_bench needs at least one seed");
    let (problem, base) = trigger_problem(scenario, scenario.seed)?;
    let (_, oracle_cost) = grid_search(&problem, &base.bounds, 100);
    let target = oracle_cost + oracle_cost.abs() * F::of(0.01);

    let mut rows = Vec::with_capacity(2);
    for (mode, algorithm) in [(SwarmMode::Adaptive, "ipso"), (SwarmMode::Fixed, "pso")] {
        let mut iters = Vec::with_capacity(seeds);
        let mut walls = Vec::with_capacity(seeds);
        let mut finals = Vec::with_capacity(seeds);
        let mut target_hits = 0usize;
        for seed in 0..seeds {
            let mut cfg = base.clone();
            cfg.mode = mode;
            cfg.seed = seed as u64;
            let run = optimize(&problem, &cfg).map_err(|e| SimError::Invalid {
                reason: format!("bench search failed on seed {seed}: {e}"),
            })?;
            match iterations_to(&run.history, target) {
                Some(it) => {
                    target_hits += 1;
                    iters.push(F::of_usize(it));
                }
                None => iters.push(F::of_usize(cfg.iterations)),
            }
            walls.push(F::of(run.wall.as_secs_f64() * 1e3));
            finals.push(run.best_cost);
        }
        rows.push(BenchRow {
            algorithm,
            seeds,
            target_hits,
            median_iterations: median(&mut iters),
            median_wall_ms: median(&mut walls),
            median_final_cost: median(&mut finals),
        });
    }
    let rows: [BenchRow<F>; 2] = rows.try_into().expect("exactly two modes ran");
    Ok(BenchReport {
        scenario: scenario.name.clone(),
        oracle_cost,
        target,
        rows,
    })
}

fn run_internal<F: Real>(
    scenario: &Scenario<F>,
    seed: u64,
    stop_at_trigger: bool,
) -> (SimTrace<F>, Option<ManeuverProblem<F>>) {
    let sv = &scenario.vehicles[scenario.subject];
    let mut swarm = scenario.swarm.clone();
    swarm.seed = seed;
    let env = PlanEnv {
        lanes: &scenario.lanes,
        center: scenario.center,
        target_lane: scenario.target_lane,
        swarm: &swarm,
        weights: &scenario.weights,
        limits: &scenario.limits,
        vehicle: &scenario.vehicle_geometry,
        dt: scenario.dt,
        dt_sample: scenario.dt_sample,
    };
    let mut planner = PlannerState::new(sv.lane, scenario.thresholds);

    // Cruise bookkeeping: the subject's closed-form circle motion is
    // rebased whenever it leaves or re-enters lane keeping.
    let mut cruise_lane = sv.lane;
    let mut cruise_angle0 = sv.angle0;
    let mut cruise_step0 = 0usize;
    let mut ego = scenario.scripted_state(sv, 0);

    let other_roles: Vec<Role> = scenario
        .vehicles
        .iter()
        .filter(|v| v.role != Role::Subject)
        .map(|v| v.role)
        .collect();

    let mut trace = SimTrace {
        name: scenario.name.clone(),
        seed,
        dt: scenario.dt,
        other_roles: other_roles.clone(),
        limits: scenario.limits,
        rows: Vec::with_capacity(scenario.horizon + 1),
        maneuver: None,
        failure: None,
    };
    let mut captured_problem = None;

    for step in 0..=scenario.horizon {
        let t = F::of_usize(step) * scenario.dt;

        let others: Vec<(Role, usize, VehicleState<F>)> = scenario
            .vehicles
            .iter()
            .filter(|v| v.role != Role::Subject)
            .map(|v| (v.role, v.lane, scenario.scripted_state(v, step)))
            .collect();

        let (min_distance, nearest_role) = others
            .iter()
            .map(|(role, _, s)| (ego.position().distance(s.position()), *role))
            .fold((F::infinity(), Role::Subject), |acc, (d, r)| {
                if d < acc.0 {
                    (d, r)
                } else {
                    acc
                }
            });

        // Roles for the field: front is the nearest same-lane vehicle
        // ahead of the ego (by wrapped polar angle); rear and adjacent are
        // fixed roles.
        let ego_angle = (ego.position() - scenario.center).angle();
        let front = others
            .iter()
            .filter(|(_, lane, _)| *lane == planner.current_lane)
            .filter_map(|(_, _, s)| {
                let gap = wrap_to_pi((s.position() - scenario.center).angle() - ego_angle);
                if gap > F::zero() {
                    Some((gap, *s))
                } else {
                    None
                }
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("angular gaps are finite"))
            .map(|(_, s)| s);
        let by_role = |role: Role| {
            others.iter().find(|(r, _, _)| *r == role).map(|(_, _, s)| *s)
        };
        let sys = SystemState {
            ego,
            front,
            rear: by_role(Role::Rear),
            adjacent: by_role(Role::Interfering),
        };

        let outcome = match plan_step(&env, &scenario.params, &sys, &mut planner, step) {
            Ok(o) => o,
            Err(e) => {
                trace.failure = Some(SimFailure::Planner { step, message: e.to_string() });
                break;
            }
        };
        if let Some(p) = outcome.problem {
            captured_problem = Some(p);
        }
        if outcome.action == PlanAction::StartChange {
            let m = planner.active.as_ref().expect("start_change stores the maneuver");
            trace.maneuver = Some(ManeuverSummary {
                trigger_step: step,
                duration: m.trajectory.t_e,
                advance: m.delta_s,
                speed: m.v_x,
                completion_step: None,
                search_iterations: m.search.iterations,
                search_cost: m.search.best_cost,
            });
        }
        if outcome.action == PlanAction::Complete {
            if let Some(m) = trace.maneuver.as_mut() {
                m.completion_step = Some(step);
            }
            // Rebase the cruise on the target lane from the current pose.
            cruise_lane = planner.current_lane;
            cruise_angle0 = (ego.position() - scenario.center).angle();
            cruise_step0 = step;
        }

        // Controls of the row: cruise rows carry the pure circle terms,
        // maneuver rows add the lateral profile's contribution.
        let (lat_offset, a_y, psi_dot, beta, delta) = match (&planner.phase, &planner.active) {
            (PlanPhase::Changing, Some(m)) => {
                let elapsed = F::of_usize(step - m.start_step) * scenario.dt;
                let clamped = elapsed.min(m.trajectory.t_e);
                let (d, _d_dot, d_ddot) =
                    m.trajectory.evaluate(clamped).expect("maneuver clock stays in window");
                let kappa_path = F::one() / scenario.lanes[planner.current_lane].radius;
                let kappa_offset = d_ddot / (m.v_x * m.v_x);
                let kappa_total = kappa_path + kappa_offset;
                (
                    d,
                    m.v_x * m.v_x * kappa_total,
                    m.v_x * kappa_total,
                    (scenario.vehicle_geometry.rear_axle_to_cg * kappa_offset).atan(),
                    (scenario.vehicle_geometry.wheelbase * kappa_offset).atan(),
                )
            }
            _ => {
                let kappa = F::one() / scenario.lanes[cruise_lane].radius;
                (F::zero(), ego.v * ego.v * kappa, ego.v * kappa, F::zero(), F::zero())
            }
        };

        trace.rows.push(TraceRow {
            step,
            t,
            phase: planner.phase,
            action: outcome.action,
            x: ego.x,
            y: ego.y,
            theta: ego.theta,
            v: ego.v,
            a: F::zero(),
            lat_offset,
            a_y,
            psi_dot,
            beta,
            delta,
            fields: outcome.sample,
            u_a_adjacent: outcome.u_a_adjacent,
            triggered: planner.trigger_step.is_some(),
            min_distance,
            others: others.iter().map(|(_, _, s)| s.position()).collect(),
        });

        if min_distance < F::of(COLLISION_DISTANCE) {
            trace.failure = Some(SimFailure::Collision {
                step,
                role: nearest_role,
                distance: min_distance.to_f64().unwrap_or(f64::NAN),
            });
            break;
        }
        if stop_at_trigger && captured_problem.is_some() {
            break;
        }
        if step == scenario.horizon {
            break;
        }

        // Advance the subject to step + 1.
        ego = match (&planner.phase, &planner.active) {
            (PlanPhase::Changing, Some(m)) => {
                let elapsed = F::of_usize(step + 1 - m.start_step) * scenario.dt;
                let clamped = elapsed.min(m.trajectory.t_e);
                let (d, d_dot, d_ddot) =
                    m.trajectory.evaluate(clamped).expect("maneuver clock stays in window");
                let origin = &scenario.lanes[planner.current_lane];
                let fs = crate::geometry::FrenetState {
                    s: origin.path.normalize_s(m.s_start + m.v_x * elapsed),
                    d,
                    s_dot: m.v_x,
                    d_dot,
                    s_ddot: F::zero(),
                    d_ddot,
                };
                match origin.path.to_global(&fs) {
                    Ok(state) => state,
                    Err(e) => {
                        trace.failure =
                            Some(SimFailure::Planner { step, message: e.to_string() });
                        break;
                    }
                }
            }
            _ => {
                let lane = &scenario.lanes[cruise_lane];
                let advance = sv.speed * scenario.dt * F::of_usize(step + 1 - cruise_step0);
                circle_state(scenario.center, lane.radius, cruise_angle0 + advance / lane.radius, sv.speed)
            }
        };
    }

    (trace, captured_problem)
}

impl<F: Real> SimTrace<F> {
    /// Smallest vehicle distance over the run.
    pub fn min_distance(&self) -> F {
        self.rows.iter().fold(F::infinity(), |acc, r| acc.min(r.min_distance))
    }

    /// Summary metrics of the run.
    pub fn metrics(&self) -> Metrics<F> {
        let trigger_row = self.maneuver.as_ref().and_then(|m| {
            self.rows.iter().find(|r| r.step == m.trigger_step)
        });
        let max_abs = |f: fn(&TraceRow<F>) -> F| {
            self.rows.iter().fold(F::zero(), |acc, r| acc.max(f(r).abs()))
        };
        let max_abs_a_y = max_abs(|r| r.a_y);
        let max_abs_psi_dot = max_abs(|r| r.psi_dot);
        let max_abs_beta = max_abs(|r| r.beta);
        let max_abs_delta = max_abs(|r| r.delta);
        let collision = matches!(self.failure, Some(SimFailure::Collision { .. }));
        Metrics {
            scenario: self.name.clone(),
            seed: self.seed,
            rows: self.rows.len(),
            triggered: self.maneuver.is_some(),
            trigger_step: self.maneuver.as_ref().map(|m| m.trigger_step),
            trigger_time: self
                .maneuver
                .as_ref()
                .map(|m| F::of_usize(m.trigger_step) * self.dt),
            trigger_fields: trigger_row.map(|r| r.fields),
            trigger_u_a_adjacent: trigger_row.map(|r| r.u_a_adjacent),
            lane_changes: usize::from(self.maneuver.is_some()),
            completed: self
                .maneuver
                .as_ref()
                .is_some_and(|m| m.completion_step.is_some()),
            completion_step: self.maneuver.as_ref().and_then(|m| m.completion_step),
            maneuver: self.maneuver.clone(),
            min_distance: self.min_distance(),
            max_abs_a_y,
            max_abs_psi_dot,
            max_abs_beta,
            max_abs_delta,
            limit_violation_rows: self.limit_violation_rows_with(&self.limits),
            collision,
            failure: self.failure.as_ref().map(|f| f.to_string()),
        }
    }

    /// Rows on which any control quantity exceeds `limits` (yaw-rate limit
    /// at the row's speed).
    pub fn limit_violation_rows_with(&self, limits: &DynamicLimits<F>) -> usize {
        self.rows
            .iter()
            .filter(|r| {
                let yaw_limit = limits.mu * limits.g / r.v.max(F::of(0.1));
                r.a_y.abs() > limits.a_y_max
                    || r.psi_dot.abs() > yaw_limit
                    || r.beta.abs() > limits.beta_max
                    || r.delta.abs() > limits.delta_max
            })
            .count()
    }

    /// Writes the run as CSV: one header line, one line per row. Numbers
    /// use the shortest round-trip float formatting, so equal runs
    /// produce byte-equal files.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(
            out,
            "step,t,phase,action,x,y,theta,v,a,lat_offset,a_y,psi_dot,beta,delta,\
             u_a,u_b,u_c,u_total,u_a_adj,triggered,min_distance"
        )?;
        for role in &self.other_roles {
            write!(out, ",{0}_x,{0}_y", role.key())?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.t,
                r.phase.as_str(),
                r.action.as_str(),
                r.x,
                r.y,
                r.theta,
                r.v,
                r.a,
                r.lat_offset,
                r.a_y,
                r.psi_dot,
                r.beta,
                r.delta,
                r.fields.u_a,
                r.fields.u_b,
                r.fields.u_c,
                r.fields.u_total,
                r.u_a_adjacent,
                u8::from(r.triggered),
                r.min_distance,
            )?;
            for p in &r.others {
                write!(out, ",{},{}", p.x, p.y)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
