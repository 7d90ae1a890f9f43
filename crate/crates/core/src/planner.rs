//! Per-step lane-change decision: sample the risk field, trigger when the
//! field says so, search for the best maneuver, then track its execution
//! phase to phase.
//!
//! The planner is a small state machine over [`PlanPhase`]: `Keeping`
//! until the trigger predicate fires, `Changing` while a maneuver is
//! active, `Completed` afterward. `Completed` is absorbing, so one run
//! performs at most one lane change.

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, ReferencePath, Vec2, VehicleState};
use crate::optimizer::{
    optimize, CandidateEval, OptimizerError, SwarmConfig, SwarmProblem, SwarmRun,
};
use crate::riskfield::{
    attraction_on_adjacent, should_change_lane, total_field, FieldParams, FieldSample, RoadFrame,
    SystemState, TriggerThresholds,
};
use crate::scalar::Real;
use crate::trajectory::{
    max_exceedances, reconstruct_controls, solve_quintic, BoundaryConditions, DynamicLimits,
    QuinticTrajectory, TrajectoryError, VehicleGeometry,
};

/// Errors from planning.
#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("best maneuver found still violates a limit by {worst:.4}")]
    NoFeasibleManeuver { worst: f64 },
    #[error("lane index {index} out of range for {lanes} lanes")]
    BadLaneIndex { index: usize, lanes: usize },
}

/// One lane of a circular road.
#[derive(Debug, Clone)]
pub struct Lane<F> {
    /// Lane number as configs name it (1 = outer, 2 = inner).
    pub id: u8,
    /// Centerline radius, m.
    pub radius: F,
    /// Centerline path.
    pub path: ReferencePath<F>,
}

/// Weights and scales of the maneuver cost.
///
/// Each term is a ratio in roughly `[0, 1]`: the longitudinal advance
/// against `delta_s_scale`, and the four control peaks against their hard
/// limits (the yaw-rate scale is `mu*g / reference_speed`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights<F> {
    pub efficiency: F,
    pub lateral_accel: F,
    pub yaw_rate: F,
    pub side_slip: F,
    pub steering: F,
    /// Scale dividing the longitudinal advance, m.
    pub delta_s_scale: F,
    /// Speed dividing `mu*g` in the yaw-rate scale, m/s.
    pub reference_speed: F,
}

impl<F: Real> Default for CostWeights<F> {
    fn default() -> Self {
        Self {
            efficiency: F::of(0.2),
            lateral_accel: F::of(0.2),
            yaw_rate: F::of(0.2),
            side_slip: F::of(0.2),
            steering: F::of(0.2),
            delta_s_scale: F::of(40.0),
            reference_speed: F::of(15.0),
        }
    }
}

/// Clearance the maneuver search requires between the ego and every
/// predicted neighbor orbit at every sample instant, m.
pub const MANEUVER_CLEARANCE: f64 = 2.1;

/// Constant-angular-rate prediction of a neighbor circling the road
/// center, extrapolated from one observed state.
#[derive(Debug, Clone, Copy)]
pub struct OrbitPrediction<F> {
    /// Center the orbit turns around.
    pub center: Vec2<F>,
    /// Orbit radius, m.
    pub radius: F,
    /// Polar angle at the prediction epoch, rad.
    pub angle0: F,
    /// Signed angular rate, rad/s (counterclockwise positive).
    pub angular_rate: F,
}

impl<F: Real> OrbitPrediction<F> {
    /// Projects `state` onto a circular orbit around `center`, keeping
    /// only the tangential velocity component. `None` when the state sits
    /// on the center itself.
    pub fn from_state(state: &VehicleState<F>, center: Vec2<F>) -> Option<Self> {
        let r_vec = state.position() - center;
        let radius = r_vec.norm();
        if !(radius > F::of(1e-9)) {
            return None;
        }
        let velocity = Vec2::from_angle(state.theta).scale(state.v);
        Some(Self {
            center,
            radius,
            angle0: r_vec.y.atan2(r_vec.x),
            angular_rate: r_vec.cross(velocity) / (radius * radius),
        })
    }

    /// Predicted position `tau` seconds past the epoch.
    pub fn position(&self, tau: F) -> Vec2<F> {
        self.center + Vec2::from_angle(self.angle0 + self.angular_rate * tau).scale(self.radius)
    }
}

/// Maneuver search problem over the decision vector `[t_e, delta_s]`:
/// duration of the lateral quintic and longitudinal advance over it.
///
/// The cost blends the normalized advance with the four normalized
/// control peaks; the violations are the per-constraint worst exceedances
/// over the sampled maneuver (the four control limits plus the clearance
/// against every predicted neighbor orbit), so the swarm's penalty steers
/// infeasible candidates out.
#[derive(Debug, Clone)]
pub struct ManeuverProblem<F> {
    path: ReferencePath<F>,
    s_start: F,
    d_start: F,
    d_dot_start: F,
    d_ddot_start: F,
    d_target: F,
    weights: CostWeights<F>,
    limits: DynamicLimits<F>,
    vehicle: VehicleGeometry<F>,
    dt_sample: F,
    obstacles: Vec<OrbitPrediction<F>>,
    clearance: F,
}

impl<F: Real> ManeuverProblem<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        path: ReferencePath<F>,
        s_start: F,
        d_start: F,
        d_dot_start: F,
        d_ddot_start: F,
        d_target: F,
        weights: CostWeights<F>,
        limits: DynamicLimits<F>,
        vehicle: VehicleGeometry<F>,
        dt_sample: F,
    ) -> Self {
        Self {
            path,
            s_start,
            d_start,
            d_dot_start,
            d_ddot_start,
            d_target,
            weights,
            limits,
            vehicle,
            dt_sample,
            obstacles: Vec::new(),
            clearance: F::of(MANEUVER_CLEARANCE),
        }
    }

    /// Adds predicted neighbor orbits the maneuver must clear by
    /// `clearance` meters at every sample instant.
    pub fn with_obstacles(mut self, obstacles: Vec<OrbitPrediction<F>>, clearance: F) -> Self {
        self.obstacles = obstacles;
        self.clearance = clearance;
        self
    }

    /// Lateral offset the maneuver must reach.
    pub fn d_target(&self) -> F {
        self.d_target
    }

    /// Solves the quintic a decision vector describes.
    pub fn trajectory(&self, t_e: F) -> Result<QuinticTrajectory<F>, TrajectoryError> {
        solve_quintic(&BoundaryConditions {
            t_s: F::zero(),
            t_e,
            y_s: self.d_start,
            y_dot_s: self.d_dot_start,
            y_ddot_s: self.d_ddot_start,
            y_e: self.d_target,
            y_dot_e: F::zero(),
            y_ddot_e: F::zero(),
        })
    }

    /// Worst shortfall of the required clearance against every predicted
    /// neighbor orbit over the sampled maneuver, clamped at zero.
    fn worst_clearance_violation(&self, traj: &QuinticTrajectory<F>, t_e: F, v_x: F) -> F {
        if self.obstacles.is_empty() {
            return F::zero();
        }
        let steps = (t_e / self.dt_sample).ceil().to_usize().unwrap_or(1).max(1);
        let mut worst = F::zero();
        for k in 0..=steps {
            let tau = (F::of_usize(k) * self.dt_sample).min(t_e);
            let Ok((d, _, _)) = traj.evaluate(tau) else {
                return F::infinity();
            };
            let p = self.path.sample(self.s_start + v_x * tau);
            let normal = Vec2::new(-p.heading.sin(), p.heading.cos());
            let ego = p.point + normal.scale(d);
            let nearest = self
                .obstacles
                .iter()
                .fold(F::infinity(), |acc, obs| acc.min(obs.position(tau).distance(ego)));
            worst = worst.max(self.clearance - nearest);
        }
        worst
    }
}

impl<F: Real> SwarmProblem<F> for ManeuverProblem<F> {
    fn constraint_count(&self) -> usize {
        5
    }

    fn evaluate(&self, x: &[F]) -> CandidateEval<F> {
        let infeasible =
            || CandidateEval { cost: F::infinity(), violations: vec![F::zero(); 5] };
        let [t_e, delta_s] = [x[0], x[1]];
        if !(t_e >= F::of(0.1)) || !(delta_s > F::zero()) {
            return infeasible();
        }
        let v_x = delta_s / t_e;
        let traj = match self.trajectory(t_e) {
            Ok(t) => t,
            Err(_) => return infeasible(),
        };
        let trace = match reconstruct_controls(
            &traj,
            &[v_x],
            &self.path,
            self.s_start,
            &self.vehicle,
            self.dt_sample,
        ) {
            Ok(t) => t,
            Err(_) => return infeasible(),
        };
        let w = &self.weights;
        let yaw_scale = self.limits.mu * self.limits.g / w.reference_speed;
        let cost = w.efficiency * delta_s / w.delta_s_scale
            + w.lateral_accel * trace.max_abs_a_y() / self.limits.a_y_max
            + w.yaw_rate * trace.max_abs_psi_dot() / yaw_scale
            + w.side_slip * trace.max_abs_beta() / self.limits.beta_max
            + w.steering * trace.max_abs_delta() / self.limits.delta_max;
        let mut violations = max_exceedances(&trace, &self.limits).to_vec();
        violations.push(self.worst_clearance_violation(&traj, t_e, v_x));
        CandidateEval { cost, violations }
    }
}

/// Lane-change execution phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanPhase {
    Keeping,
    Changing,
    Completed,
}

impl PlanPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanPhase::Keeping => "keeping",
            PlanPhase::Changing => "changing",
            PlanPhase::Completed => "completed",
        }
    }
}

/// A maneuver in flight.
#[derive(Debug, Clone)]
pub struct ActiveManeuver<F> {
    /// Lateral profile, with `t = 0` at the trigger step.
    pub trajectory: QuinticTrajectory<F>,
    /// Constant longitudinal speed over the maneuver, m/s.
    pub v_x: F,
    /// Arc length on the origin lane's path where the maneuver starts.
    pub s_start: F,
    /// Step the maneuver was committed at.
    pub start_step: usize,
    /// Lane index (into the planner's lane slice) the maneuver ends on.
    pub target_lane: usize,
    /// Longitudinal advance the search picked, m.
    pub delta_s: F,
    /// The swarm run that picked the maneuver.
    pub search: SwarmRun<F>,
}

/// Mutable planner state carried across steps.
///
/// `active` is `Some` exactly while `phase` is [`PlanPhase::Changing`].
#[derive(Debug, Clone)]
pub struct PlannerState<F> {
    pub phase: PlanPhase,
    pub active: Option<ActiveManeuver<F>>,
    /// Step the trigger fired at, once it has.
    pub trigger_step: Option<usize>,
    /// Index into the lane slice the ego currently tracks.
    pub current_lane: usize,
    pub thresholds: TriggerThresholds<F>,
}

impl<F: Real> PlannerState<F> {
    pub fn new(current_lane: usize, thresholds: TriggerThresholds<F>) -> Self {
        Self {
            phase: PlanPhase::Keeping,
            active: None,
            trigger_step: None,
            current_lane,
            thresholds,
        }
    }
}

/// Immutable planning context shared by every step of one run.
#[derive(Debug, Clone, Copy)]
pub struct PlanEnv<'a, F> {
    pub lanes: &'a [Lane<F>],
    /// Road center the circular frame is anchored at.
    pub center: Vec2<F>,
    /// Lane index the route wants the ego on.
    pub target_lane: usize,
    pub swarm: &'a SwarmConfig<F>,
    pub weights: &'a CostWeights<F>,
    pub limits: &'a DynamicLimits<F>,
    pub vehicle: &'a VehicleGeometry<F>,
    /// Simulation step, s.
    pub dt: F,
    /// Maneuver sampling step, s.
    pub dt_sample: F,
}

impl<'a, F: Real> PlanEnv<'a, F> {
    /// The lane the trigger comparison treats as "adjacent": the route
    /// target normally, the other lane when the ego is already there.
    pub fn adjacent_lane(&self, current: usize) -> usize {
        if current != self.target_lane {
            self.target_lane
        } else {
            (current + 1) % self.lanes.len()
        }
    }

    fn road_frame(&self) -> RoadFrame<F> {
        RoadFrame {
            center: self.center,
            target_lane_radius: self.lanes[self.target_lane].radius,
        }
    }
}

/// What one planning step decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanAction {
    /// Keep the current lane.
    Keep,
    /// A maneuver was committed this step.
    StartChange,
    /// A maneuver is still executing.
    Continue,
    /// The maneuver finished this step.
    Complete,
}

impl PlanAction {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanAction::Keep => "keep",
            PlanAction::StartChange => "start_change",
            PlanAction::Continue => "continue",
            PlanAction::Complete => "complete",
        }
    }
}

/// Outcome of one planning step: the action plus the field evaluation the
/// decision was based on.
#[derive(Debug)]
pub struct PlanStepOutcome<F> {
    pub action: PlanAction,
    pub sample: FieldSample<F>,
    /// Attraction the adjacent lane would offer the ego right now.
    pub u_a_adjacent: F,
    /// The search problem built at a [`PlanAction::StartChange`], for
    /// callers that want to re-run or benchmark it.
    pub problem: Option<ManeuverProblem<F>>,
}

/// Advances the planner one step against the current system state.
///
/// In `Keeping` the trigger predicate is evaluated and, when it fires, a
/// maneuver is searched, checked feasible, and committed (the committed
/// maneuver starts moving the ego from the *next* step on). In `Changing`
/// the maneuver clock is compared against its window to detect
/// completion. `Completed` only keeps sampling the field for the record.
pub fn plan_step<F: Real>(
    env: &PlanEnv<'_, F>,
    params: &FieldParams<F>,
    sys: &SystemState<F>,
    state: &mut PlannerState<F>,
    step: usize,
) -> Result<PlanStepOutcome<F>, PlanError> {
    if state.current_lane >= env.lanes.len() || env.target_lane >= env.lanes.len() {
        return Err(PlanError::BadLaneIndex {
            index: state.current_lane.max(env.target_lane),
            lanes: env.lanes.len(),
        });
    }
    debug_assert_eq!(
        state.active.is_some(),
        state.phase == PlanPhase::Changing,
        "active maneuver must exist exactly in the changing phase"
    );
    let frame = env.road_frame();
    let sample = total_field(sys, params, &frame);
    let adjacent = env.adjacent_lane(state.current_lane);
    let u_a_adjacent =
        attraction_on_adjacent(&sys.ego, params, &frame, env.lanes[adjacent].radius);

    let (action, problem) = match state.phase {
        PlanPhase::Keeping => {
            if should_change_lane(&sample, u_a_adjacent, &state.thresholds) {
                let problem = commit_maneuver(env, sys, state, step, adjacent)?;
                (PlanAction::StartChange, Some(problem))
            } else {
                (PlanAction::Keep, None)
            }
        }
        PlanPhase::Changing => {
            let maneuver = state.active.as_ref().expect("changing phase carries a maneuver");
            let elapsed = F::of_usize(step - maneuver.start_step) * env.dt;
            if elapsed >= maneuver.trajectory.t_e - F::of(1e-9) {
                state.current_lane = maneuver.target_lane;
                state.phase = PlanPhase::Completed;
                state.active = None;
                (PlanAction::Complete, None)
            } else {
                (PlanAction::Continue, None)
            }
        }
        PlanPhase::Completed => (PlanAction::Keep, None),
    };
    Ok(PlanStepOutcome { action, sample, u_a_adjacent, problem })
}

/// Searches for and commits a maneuver toward `target`; returns the
/// search problem.
fn commit_maneuver<F: Real>(
    env: &PlanEnv<'_, F>,
    sys: &SystemState<F>,
    state: &mut PlannerState<F>,
    step: usize,
    target: usize,
) -> Result<ManeuverProblem<F>, PlanError> {
    let origin = &env.lanes[state.current_lane];
    let fs = origin.path.to_frenet(&sys.ego)?;
    // On a counterclockwise circle, positive offset points inward, so the
    // target lane sits at the radius difference current - target.
    let d_target = origin.radius - env.lanes[target].radius;
    let obstacles: Vec<_> = [sys.front.as_ref(), sys.rear.as_ref(), sys.adjacent.as_ref()]
        .into_iter()
        .flatten()
        .filter_map(|v| OrbitPrediction::from_state(v, env.center))
        .collect();
    let problem = ManeuverProblem::new(
        origin.path.clone(),
        fs.s,
        fs.d,
        fs.d_dot,
        fs.d_ddot,
        d_target,
        *env.weights,
        *env.limits,
        *env.vehicle,
        env.dt_sample,
    )
    .with_obstacles(obstacles, F::of(MANEUVER_CLEARANCE));
    let run = optimize(&problem, env.swarm)?;
    let worst = run
        .best_eval
        .violations
        .iter()
        .fold(F::zero(), |acc, v| acc.max(*v));
    if worst > F::of(1e-9) {
        return Err(PlanError::NoFeasibleManeuver { worst: worst.to_f64().unwrap_or(f64::NAN) });
    }
    let t_e = run.best[0];
    let delta_s = run.best[1];
    let trajectory = problem.trajectory(t_e)?;
    state.active = Some(ActiveManeuver {
        trajectory,
        v_x: delta_s / t_e,
        s_start: fs.s,
        start_step: step,
        target_lane: target,
        delta_s,
        search: run,
    });
    state.phase = PlanPhase::Changing;
    state.trigger_step = Some(step);
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VehicleState;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn circle_lane(id: u8, radius: f64) -> Lane<f64> {
        let n = (std::f64::consts::TAU * radius / 0.5).ceil() as usize;
        let pts: Vec<_> = (0..=n)
            .map(|k| {
                Vec2::from_angle(std::f64::consts::TAU * k as f64 / n as f64).scale(radius)
            })
            .collect();
        Lane { id, radius, path: ReferencePath::new(&pts, 0.5).expect("lane builds") }
    }

    fn lanes() -> Vec<Lane<f64>> {
        vec![circle_lane(1, 68.5), circle_lane(2, 65.5)]
    }

    fn on_circle(radius: f64, angle: f64, v: f64) -> VehicleState<f64> {
        let pos = Vec2::from_angle(angle).scale(radius);
        VehicleState {
            v,
            kappa: 1.0 / radius,
            psi_dot: v / radius,
            ..VehicleState::at(pos.x, pos.y, angle + FRAC_PI_2)
        }
    }

    fn swarm() -> SwarmConfig<f64> {
        SwarmConfig { seed: 42, ..SwarmConfig::for_bounds(vec![(2.0, 16.0), (5.0, 40.0)]) }
    }

    struct Fixture {
        lanes: Vec<Lane<f64>>,
        swarm: SwarmConfig<f64>,
        weights: CostWeights<f64>,
        limits: DynamicLimits<f64>,
        vehicle: VehicleGeometry<f64>,
    }

    impl Fixture {
        fn new() -> Self {
            Self {
                lanes: lanes(),
                swarm: swarm(),
                weights: CostWeights::default(),
                limits: DynamicLimits::default(),
                vehicle: VehicleGeometry::default(),
            }
        }

        fn env(&self) -> PlanEnv<'_, f64> {
            PlanEnv {
                lanes: &self.lanes,
                center: Vec2::zero(),
                target_lane: 0,
                swarm: &self.swarm,
                weights: &self.weights,
                limits: &self.limits,
                vehicle: &self.vehicle,
                dt: 0.1,
                dt_sample: 0.05,
            }
        }
    }

    /// A crowded state that satisfies all three trigger conditions: slow
    /// front vehicle close ahead, open adjacent lane, ego short of the
    /// target lane. The neighbors move fast enough that clearing them
    /// leaves room in the decision box.
    fn triggering_state() -> SystemState<f64> {
        SystemState {
            ego: on_circle(65.5, 0.12, 5.0),
            front: Some(on_circle(65.5, 0.12 + 6.0 / 65.5, 3.5)),
            rear: Some(on_circle(68.5, 0.12 - 30.0 / 68.5, 3.5)),
            adjacent: Some(on_circle(68.5, 0.12 + 10.0 / 68.5, 4.0)),
        }
    }

    fn quiet_state() -> SystemState<f64> {
        SystemState { ego: on_circle(65.5, 0.1, 5.0), front: None, rear: None, adjacent: None }
    }

    #[test]
    fn keeping_without_pressure() {
        let fixture = Fixture::new();
        let env = fixture.env();
        let mut state = PlannerState::new(1, TriggerThresholds::default());
        let out = plan_step(&env, &FieldParams::default(), &quiet_state(), &mut state, 0)
            .expect("plan step succeeds");
        assert_eq!(out.action, PlanAction::Keep);
        assert_eq!(state.phase, PlanPhase::Keeping);
        assert!(state.active.is_none());
        assert!(out.problem.is_none());
    }

    #[test]
    fn trigger_commits_feasible_maneuver_and_completes() {
        let fixture = Fixture::new();
        let env = fixture.env();
        let params = FieldParams::default();
        let mut state = PlannerState::new(1, TriggerThresholds::default());

        let out = plan_step(&env, &params, &triggering_state(), &mut state, 7)
            .expect("plan step succeeds");
        assert_eq!(out.action, PlanAction::StartChange);
        assert_eq!(state.phase, PlanPhase::Changing);
        assert_eq!(state.trigger_step, Some(7));
        assert!(out.problem.is_some());
        let maneuver = state.active.clone().expect("maneuver committed");
        assert_eq!(maneuver.start_step, 7);
        assert_eq!(maneuver.target_lane, 0);
        assert!(maneuver.v_x > 0.0);
        assert_abs_diff_eq!(
            maneuver.trajectory.evaluate(maneuver.trajectory.t_e).expect("end in window").0,
            -3.0,
            epsilon = 1e-9
        );
        assert!(
            maneuver.search.best_eval.is_feasible(),
            "committed maneuver must respect every limit"
        );

        // Mid-maneuver steps continue, the step past the window completes.
        let quiet = quiet_state();
        let mid_step = 7 + 1;
        let out = plan_step(&env, &params, &quiet, &mut state, mid_step).expect("plan succeeds");
        assert_eq!(out.action, PlanAction::Continue);
        let done_step = 7 + (maneuver.trajectory.t_e / 0.1).ceil() as usize + 1;
        let out = plan_step(&env, &params, &quiet, &mut state, done_step).expect("plan succeeds");
        assert_eq!(out.action, PlanAction::Complete);
        assert_eq!(state.phase, PlanPhase::Completed);
        assert_eq!(state.current_lane, 0, "completion moves the tracked lane to the target");
        assert!(state.active.is_none());

        // Completed is absorbing: the same crowded state triggers nothing.
        let out = plan_step(&env, &params, &triggering_state(), &mut state, done_step + 1)
            .expect("plan succeeds");
        assert_eq!(out.action, PlanAction::Keep);
        assert_eq!(state.phase, PlanPhase::Completed);
    }

    #[test]
    fn infeasible_search_space_is_an_error() {
        // Durations of 2 s paired with advances of 30+ m force speeds
        // whose centripetal acceleration alone breaks the limit.
        let mut fixture = Fixture::new();
        fixture.swarm = SwarmConfig {
            seed: 42,
            ..SwarmConfig::for_bounds(vec![(2.0, 2.1), (30.0, 40.0)])
        };
        let env = fixture.env();
        let mut state = PlannerState::new(1, TriggerThresholds::default());
        let err = plan_step(&env, &FieldParams::default(), &triggering_state(), &mut state, 0);
        assert!(matches!(err, Err(PlanError::NoFeasibleManeuver { .. })), "got {err:?}");
        assert_eq!(state.phase, PlanPhase::Keeping, "failed commits must not change phase");
        assert!(state.active.is_none());
    }

    #[test]
    fn bad_lane_index_rejected() {
        let fixture = Fixture::new();
        let env = fixture.env();
        let mut state = PlannerState::new(5, TriggerThresholds::default());
        let err = plan_step(&env, &FieldParams::default(), &quiet_state(), &mut state, 0);
        assert!(matches!(err, Err(PlanError::BadLaneIndex { index: 5, lanes: 2 })));
    }

    #[test]
    fn maneuver_problem_cost_prefers_gentle_long_maneuvers() {
        let fixture = Fixture::new();
        let lane = &fixture.lanes[1];
        let problem = ManeuverProblem::new(
            lane.path.clone(),
            10.0,
            0.0,
            0.0,
            0.0,
            -3.0,
            CostWeights::default(),
            DynamicLimits::default(),
            VehicleGeometry::default(),
            0.05,
        );
        let quick = problem.evaluate(&[3.0, 20.0]);
        let gentle = problem.evaluate(&[16.0, 40.0]);
        // The quick maneuver moves 3 m laterally in 3 s: larger control
        // peaks dominate its cost despite the shorter advance.
        assert!(
            gentle.cost < quick.cost,
            "gentle {} should beat quick {}",
            gentle.cost,
            quick.cost
        );
        assert!(gentle.is_feasible());
    }

    #[test]
    fn maneuver_problem_guards_degenerate_decisions() {
        let fixture = Fixture::new();
        let lane = &fixture.lanes[1];
        let problem = ManeuverProblem::new(
            lane.path.clone(),
            0.0,
            0.0,
            0.0,
            0.0,
            -3.0,
            CostWeights::default(),
            DynamicLimits::default(),
            VehicleGeometry::default(),
            0.05,
        );
        assert!(problem.evaluate(&[0.05, 10.0]).cost.is_infinite());
        assert!(problem.evaluate(&[5.0, 0.0]).cost.is_infinite());
        assert!(problem.evaluate(&[5.0, -1.0]).cost.is_infinite());
    }

    #[test]
    fn obstacle_in_the_corridor_is_a_clearance_violation() {
        let fixture = Fixture::new();
        let lane = &fixture.lanes[1];
        let problem = ManeuverProblem::new(
            lane.path.clone(),
            10.0,
            0.0,
            0.0,
            0.0,
            -3.0,
            CostWeights::default(),
            DynamicLimits::default(),
            VehicleGeometry::default(),
            0.05,
        );
        let candidate = [16.0, 40.0];
        assert!(problem.evaluate(&candidate).is_feasible(), "empty road must stay feasible");

        // A parked vehicle 20 m down the origin lane sits in the corridor
        // while the ego is still merging out of it.
        let parked = on_circle(65.5, 30.0 / 65.5, 0.0);
        let orbit = OrbitPrediction::from_state(&parked, Vec2::zero()).expect("off center");
        assert_eq!(orbit.angular_rate, 0.0, "a parked vehicle predicts a fixed point");
        let blocked = problem.with_obstacles(vec![orbit], 2.1);
        let eval = blocked.evaluate(&candidate);
        assert!(!eval.is_feasible());
        assert!(
            eval.violations[4] > 0.4,
            "passing a parked vehicle at lateral mid-merge must violate clearance, got {}",
            eval.violations[4]
        );
    }

    #[test]
    fn orbit_prediction_tracks_a_circling_vehicle() {
        let v = on_circle(68.5, 0.3, 3.5);
        let orbit = OrbitPrediction::from_state(&v, Vec2::zero()).expect("off center");
        assert_abs_diff_eq!(orbit.radius, 68.5, epsilon = 1e-12);
        assert_abs_diff_eq!(orbit.angular_rate, 3.5 / 68.5, epsilon = 1e-12);
        // 10 s ahead the prediction matches the closed-form circular march.
        let ahead = orbit.position(10.0);
        let expected = Vec2::from_angle(0.3 + 10.0 * 3.5 / 68.5).scale(68.5);
        assert_abs_diff_eq!(ahead.x, expected.x, epsilon = 1e-9);
        assert_abs_diff_eq!(ahead.y, expected.y, epsilon = 1e-9);
    }

    #[test]
    fn adjacent_lane_resolution() {
        let fixture = Fixture::new();
        let env = fixture.env();
        assert_eq!(env.adjacent_lane(1), 0, "off-target lane points at the target");
        assert_eq!(env.adjacent_lane(0), 1, "on-target lane points at the other lane");
    }
}
