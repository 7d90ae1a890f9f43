//! Driving risk field on a curved road: goal attraction, car-following
//! repulsion, lane-change pressure, and the trigger predicate built on
//! them.
//!
//! All three components are evaluated around a circular road frame
//! ([`RoadFrame`]): polar angle about the road center stands in for
//! progress, and the radius of the route's target lane anchors both the
//! attraction reference and the gap checks in the adjacent lane.

use serde::{Deserialize, Serialize};

use crate::geometry::{Vec2, VehicleState};
use crate::scalar::{wrap_to_pi, wrap_to_tau, Real};

/// Errors from field evaluation.
#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("ego and front headings differ by less than {eps:.1e} rad, repulsion is degenerate")]
    DegenerateHeadings { eps: f64 },
    #[error("lane-change field needs a {role} vehicle")]
    MissingVehicle { role: &'static str },
    #[error("field parameters invalid: {reason}")]
    BadParams { reason: String },
}

/// Parameters of the three field components.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldParams<F> {
    /// Gain of the angular goal term of the attraction field.
    pub alpha: F,
    /// Gain of the tracking (quadratic-offset) term of the attraction
    /// field.
    pub beta: F,
    /// Radius normalizer of the angular goal term, m.
    pub r1: F,
    /// Symmetric positive-definite weight of the tracking term, row major.
    pub w: [[F; 2]; 2],
    /// Base repulsion gain.
    pub gamma0: F,
    /// Base repulsion range, m.
    pub sigma0: F,
    /// Ego-speed sensitivity of the repulsion gain.
    pub alpha_v: F,
    /// Front-speed sensitivity of the repulsion gain.
    pub beta_v: F,
    /// Speed sensitivity of the repulsion range.
    pub lambda_decay: F,
    /// Speed scale for the adaptive laws, m/s.
    pub v_safe: F,
    /// Gain of the lane-change field.
    pub lambda_lc: F,
    /// Weight coupling heading differences into the lane-change speed
    /// ratio.
    pub xi: F,
    /// Fixed heading-gap numerator of the repulsion and lane-change
    /// ratios, rad.
    pub delta_theta: F,
    /// Minimum front and rear arc gap in the adjacent lane before the
    /// lane-change field stops amplifying, m.
    pub min_gap: F,
    /// Smallest denominator magnitude substituted in the ratio terms.
    pub eps_den: F,
}

impl<F: Real> Default for FieldParams<F> {
    fn default() -> Self {
        Self {
            alpha: F::one(),
            beta: F::of(0.5),
            r1: F::of(65.5),
            w: [[F::one(), F::zero()], [F::zero(), F::one()]],
            gamma0: F::of(50.0),
            sigma0: F::of(5.0),
            alpha_v: F::of(0.5),
            beta_v: F::of(0.5),
            lambda_decay: F::of(0.5),
            v_safe: F::of(15.0),
            lambda_lc: F::of(100.0),
            xi: F::one(),
            delta_theta: F::of(0.15),
            min_gap: F::of(1.75),
            eps_den: F::of(1e-6),
        }
    }
}

impl<F: Real> FieldParams<F> {
    /// Validates the parameter set: finite entries, positive scales, and a
    /// symmetric positive-definite tracking weight.
    pub fn validate(&self) -> Result<(), FieldError> {
        let all = [
            self.alpha,
            self.beta,
            self.r1,
            self.w[0][0],
            self.w[0][1],
            self.w[1][0],
            self.w[1][1],
            self.gamma0,
            self.sigma0,
            self.alpha_v,
            self.beta_v,
            self.lambda_decay,
            self.v_safe,
            self.lambda_lc,
            self.xi,
            self.delta_theta,
            self.min_gap,
            self.eps_den,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(FieldError::BadParams { reason: "non-finite entry".into() });
        }
        for (name, value) in [
            ("r1", self.r1),
            ("sigma0", self.sigma0),
            ("v_safe", self.v_safe),
            ("eps_den", self.eps_den),
        ] {
            if !(value > F::zero()) {
                return Err(FieldError::BadParams { reason: format!("{name} must be positive") });
            }
        }
        let asym = (self.w[0][1] - self.w[1][0]).abs();
        if asym > F::of(1e-9) {
            return Err(FieldError::BadParams { reason: "w must be symmetric".into() });
        }
        let det = self.w[0][0] * self.w[1][1] - self.w[0][1] * self.w[1][0];
        if !(self.w[0][0] > F::zero()) || !(det > F::zero()) {
            return Err(FieldError::BadParams { reason: "w must be positive definite".into() });
        }
        Ok(())
    }
}

/// Circular frame the fields are evaluated in.
#[derive(Debug, Clone, Copy)]
pub struct RoadFrame<F> {
    /// Road center.
    pub center: Vec2<F>,
    /// Centerline radius of the route's target lane, m.
    pub target_lane_radius: F,
}

impl<F: Real> RoadFrame<F> {
    /// Polar angle of a position about the road center, in `[0, tau)`.
    pub fn polar_angle(&self, p: Vec2<F>) -> F {
        wrap_to_tau((p - self.center).angle())
    }

    /// Point on the target-lane centerline at the given polar angle.
    pub fn target_point(&self, angle: F) -> Vec2<F> {
        self.center + Vec2::from_angle(angle).scale(self.target_lane_radius)
    }
}

/// Everything the field sees at one instant: the ego and its neighbors by
/// role. `front` is the nearest same-lane leader (absent when the lane
/// ahead is clear); `rear` and `adjacent` live in the other lane.
#[derive(Debug, Clone)]
pub struct SystemState<F> {
    pub ego: VehicleState<F>,
    pub front: Option<VehicleState<F>>,
    pub rear: Option<VehicleState<F>>,
    pub adjacent: Option<VehicleState<F>>,
}

/// Per-vehicle state derivatives for field-rate probes.
#[derive(Debug, Clone, Copy)]
pub struct VehicleRates<F> {
    pub x_dot: F,
    pub y_dot: F,
    pub theta_dot: F,
    pub v_dot: F,
}

impl<F: Real> VehicleRates<F> {
    /// Kinematic derivatives of a state: velocity from speed and heading,
    /// heading rate from the stored yaw rate, speed rate from the stored
    /// acceleration.
    pub fn from_state(state: &VehicleState<F>) -> Self {
        Self {
            x_dot: state.v * state.theta.cos(),
            y_dot: state.v * state.theta.sin(),
            theta_dot: state.psi_dot,
            v_dot: state.a,
        }
    }
}

/// Derivatives for every vehicle in a [`SystemState`], role for role.
#[derive(Debug, Clone)]
pub struct SystemRates<F> {
    pub ego: VehicleRates<F>,
    pub front: Option<VehicleRates<F>>,
    pub rear: Option<VehicleRates<F>>,
    pub adjacent: Option<VehicleRates<F>>,
}

impl<F: Real> SystemRates<F> {
    /// Kinematic derivatives of every vehicle present.
    pub fn from_state(state: &SystemState<F>) -> Self {
        Self {
            ego: VehicleRates::from_state(&state.ego),
            front: state.front.as_ref().map(VehicleRates::from_state),
            rear: state.rear.as_ref().map(VehicleRates::from_state),
            adjacent: state.adjacent.as_ref().map(VehicleRates::from_state),
        }
    }
}

/// One evaluation of the field at the ego position.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FieldSample<F> {
    /// Goal attraction.
    pub u_a: F,
    /// Car-following repulsion, clamped to be non-negative.
    pub u_b: F,
    /// Lane-change pressure.
    pub u_c: F,
    /// Sum of the three components.
    pub u_total: F,
}

/// Component-wise time rates of a [`FieldSample`].
#[derive(Debug, Clone, Copy)]
pub struct FieldRates<F> {
    pub u_a: F,
    pub u_b: F,
    pub u_c: F,
    pub u_total: F,
}

/// Trigger thresholds on the field components.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerThresholds<F> {
    /// Repulsion must exceed this.
    pub u_b: F,
    /// Lane-change pressure must stay below this.
    pub u_c: F,
}

impl<F: Real> Default for TriggerThresholds<F> {
    fn default() -> Self {
        Self { u_b: F::of(10.0), u_c: F::of(150.0) }
    }
}

/// Goal attraction at the ego position.
///
/// The first term grows with the remaining angle to the goal (a full lap
/// measured backward from polar angle `tau`) and with the ego's radius
/// relative to `r1`; the second is the `w`-weighted squared offset from
/// `reference`, the point the route wants the ego on.
pub fn attraction<F: Real>(
    ego: &VehicleState<F>,
    reference: &VehicleState<F>,
    params: &FieldParams<F>,
    center: Vec2<F>,
) -> F {
    let rel = ego.position() - center;
    let radius = rel.norm();
    let angle = wrap_to_tau(rel.angle());
    let remaining = F::TAU() - angle;
    let radial = radius / params.r1;
    let goal_term = params.alpha * radial * radial * remaining * remaining;

    let offset = ego.position() - reference.position();
    let weighted = Vec2::new(
        params.w[0][0] * offset.x + params.w[0][1] * offset.y,
        params.w[1][0] * offset.x + params.w[1][1] * offset.y,
    );
    let tracking = params.beta * offset.dot(weighted);
    goal_term + tracking
}

/// Repulsion gain grown by ego and front speeds.
pub fn adaptive_gamma<F: Real>(params: &FieldParams<F>, v_ego: F, v_front: F) -> F {
    params.gamma0
        * (F::one() + params.alpha_v * v_ego / params.v_safe + params.beta_v * v_front / params.v_safe)
}

/// Repulsion range grown by the faster of the two speeds.
pub fn adaptive_sigma<F: Real>(params: &FieldParams<F>, v_max: F) -> F {
    params.sigma0 * (F::one() + params.lambda_decay * v_max / params.v_safe)
}

fn heading_gap<F: Real>(ego: &VehicleState<F>, front: &VehicleState<F>) -> F {
    wrap_to_pi(front.theta - ego.theta)
}

fn repulsion_from_gap<F: Real>(
    ego: &VehicleState<F>,
    front: &VehicleState<F>,
    params: &FieldParams<F>,
    gap: F,
) -> F {
    let gamma = adaptive_gamma(params, ego.v, front.v);
    let sigma = adaptive_sigma(params, ego.v.max(front.v));
    let dist_sq = (ego.position() - front.position()).norm_sq();
    let falloff = (-dist_sq / (F::of(2.0) * sigma * sigma)).exp();
    gamma * (params.delta_theta / gap) * falloff
}

/// Car-following repulsion from the front vehicle.
///
/// Scales with the adaptive gain, decays as a Gaussian in distance with
/// the adaptive range, and divides the fixed angular gap `delta_theta` by
/// the actual ego-front heading gap. A heading gap smaller than
/// `eps_den` is degenerate and an error here; [`total_field`] substitutes
/// the clamped denominator instead.
pub fn repulsion<F: Real>(
    ego: &VehicleState<F>,
    front: &VehicleState<F>,
    params: &FieldParams<F>,
) -> Result<F, FieldError> {
    let gap = heading_gap(ego, front);
    if gap.abs() < params.eps_den {
        return Err(FieldError::DegenerateHeadings {
            eps: params.eps_den.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(repulsion_from_gap(ego, front, params, gap))
}

/// Keeps the sign, enforces a minimum magnitude. Zero counts as positive.
fn clamp_denominator<F: Real>(x: F, eps: F) -> F {
    if x.abs() >= eps {
        x
    } else if x < F::zero() {
        -eps
    } else {
        eps
    }
}

fn repulsion_clamped<F: Real>(
    ego: &VehicleState<F>,
    front: &VehicleState<F>,
    params: &FieldParams<F>,
) -> F {
    let gap = clamp_denominator(heading_gap(ego, front), params.eps_den);
    repulsion_from_gap(ego, front, params, gap)
}

/// Negative spatial gradient of the repulsion at the ego position: the
/// force `u_b * (p_ego - p_front) / sigma^2` pushing the ego away from the
/// front vehicle. Zero exactly at coincidence.
pub fn repulsion_gradient<F: Real>(
    ego: &VehicleState<F>,
    front: &VehicleState<F>,
    params: &FieldParams<F>,
) -> Result<Vec2<F>, FieldError> {
    let u_b = repulsion(ego, front, params)?;
    let sigma = adaptive_sigma(params, ego.v.max(front.v));
    Ok((ego.position() - front.position()).scale(u_b / (sigma * sigma)))
}

/// Lane-change pressure.
///
/// The ratio compares the ego's speed surplus over the adjacent-lane
/// traffic (the faster of the interfering and rear vehicles, softened by
/// `xi * delta_theta`) against the speed and heading spread of that
/// traffic itself. The factor from [`gap_factor`] leaves the ratio alone
/// when the adjacent lane has room and multiplies it tenfold when either
/// arc gap around the ego's shadow is `min_gap` or less.
pub fn lane_change_field<F: Real>(
    state: &SystemState<F>,
    params: &FieldParams<F>,
    frame: &RoadFrame<F>,
) -> Result<F, FieldError> {
    let rear = state.rear.as_ref().ok_or(FieldError::MissingVehicle { role: "rear" })?;
    let adjacent =
        state.adjacent.as_ref().ok_or(FieldError::MissingVehicle { role: "adjacent" })?;
    let numerator = state.ego.v - rear.v.max(adjacent.v) + params.xi * params.delta_theta;
    let spread = (adjacent.v - rear.v) + params.xi * wrap_to_pi(adjacent.theta - rear.theta);
    let denominator = clamp_denominator(spread, params.eps_den);
    let phi = gap_factor(state, params, frame)?;
    Ok(params.lambda_lc * (numerator / denominator).abs() * phi)
}

/// Room factor of the lane-change field: 1 when both arc gaps between the
/// ego's adjacent-lane shadow and the interfering / rear vehicles exceed
/// `min_gap`, 10 otherwise.
pub fn gap_factor<F: Real>(
    state: &SystemState<F>,
    params: &FieldParams<F>,
    frame: &RoadFrame<F>,
) -> Result<F, FieldError> {
    let rear = state.rear.as_ref().ok_or(FieldError::MissingVehicle { role: "rear" })?;
    let adjacent =
        state.adjacent.as_ref().ok_or(FieldError::MissingVehicle { role: "adjacent" })?;
    let ego_angle = frame.polar_angle(state.ego.position());
    let radius = frame.target_lane_radius;
    let gap_ahead = wrap_to_pi(frame.polar_angle(adjacent.position()) - ego_angle) * radius;
    let gap_behind = wrap_to_pi(ego_angle - frame.polar_angle(rear.position())) * radius;
    let open = gap_ahead.abs() > params.min_gap && gap_behind.abs() > params.min_gap;
    Ok(if open { F::one() } else { F::of(10.0) })
}

/// Evaluates all three components at the ego position.
///
/// Never fails: without a front vehicle `u_b` is 0, without both a rear
/// and an adjacent vehicle `u_c` is 0, and a degenerate ego-front heading
/// gap falls back to the sign-preserving clamped denominator. `u_b` is
/// clamped to be non-negative.
pub fn total_field<F: Real>(
    state: &SystemState<F>,
    params: &FieldParams<F>,
    frame: &RoadFrame<F>,
) -> FieldSample<F> {
    let ego_angle = frame.polar_angle(state.ego.position());
    let reference = VehicleState::at(
        frame.target_point(ego_angle).x,
        frame.target_point(ego_angle).y,
        wrap_to_pi(ego_angle + F::FRAC_PI_2()),
    );
    let u_a = attraction(&state.ego, &reference, params, frame.center);
    let u_b = match &state.front {
        Some(front) => repulsion_clamped(&state.ego, front, params).max(F::zero()),
        None => F::zero(),
    };
    let u_c = match lane_change_field(state, params, frame) {
        Ok(u) => u,
        Err(FieldError::MissingVehicle { .. }) => F::zero(),
        Err(_) => unreachable!("lane_change_field only fails on missing vehicles"),
    };
    FieldSample { u_a, u_b, u_c, u_total: u_a + u_b + u_c }
}

/// Attraction the ego would feel on the adjacent lane: same polar angle,
/// radius moved to `adjacent_radius`, same target reference.
pub fn attraction_on_adjacent<F: Real>(
    ego: &VehicleState<F>,
    params: &FieldParams<F>,
    frame: &RoadFrame<F>,
    adjacent_radius: F,
) -> F {
    let angle = frame.polar_angle(ego.position());
    let shadow_pos = frame.center + Vec2::from_angle(angle).scale(adjacent_radius);
    let shadow = VehicleState {
        x: shadow_pos.x,
        y: shadow_pos.y,
        ..*ego
    };
    let reference = VehicleState::at(
        frame.target_point(angle).x,
        frame.target_point(angle).y,
        wrap_to_pi(angle + F::FRAC_PI_2()),
    );
    attraction(&shadow, &reference, params, frame.center)
}

/// Forward-difference time rates of the field components under the given
/// state derivatives: every vehicle is advanced by `dt_probe`, the field
/// re-evaluated, and the difference divided by `dt_probe`.
pub fn field_evolution_rate<F: Real>(
    state: &SystemState<F>,
    rates: &SystemRates<F>,
    params: &FieldParams<F>,
    frame: &RoadFrame<F>,
    dt_probe: F,
) -> FieldRates<F> {
    let advance = |s: &VehicleState<F>, r: &VehicleRates<F>| VehicleState {
        x: s.x + r.x_dot * dt_probe,
        y: s.y + r.y_dot * dt_probe,
        theta: wrap_to_pi(s.theta + r.theta_dot * dt_probe),
        v: s.v + r.v_dot * dt_probe,
        ..*s
    };
    let advance_opt = |s: &Option<VehicleState<F>>, r: &Option<VehicleRates<F>>| match (s, r) {
        (Some(s), Some(r)) => Some(advance(s, r)),
        (Some(s), None) => Some(*s),
        _ => None,
    };
    let advanced = SystemState {
        ego: advance(&state.ego, &rates.ego),
        front: advance_opt(&state.front, &rates.front),
        rear: advance_opt(&state.rear, &rates.rear),
        adjacent: advance_opt(&state.adjacent, &rates.adjacent),
    };
    let before = total_field(state, params, frame);
    let after = total_field(&advanced, params, frame);
    FieldRates {
        u_a: (after.u_a - before.u_a) / dt_probe,
        u_b: (after.u_b - before.u_b) / dt_probe,
        u_c: (after.u_c - before.u_c) / dt_probe,
        u_total: (after.u_total - before.u_total) / dt_probe,
    }
}

/// Lane-change trigger: repulsion above its threshold, lane-change
/// pressure below its ceiling, and the current lane's attraction strictly
/// above what the adjacent lane would offer. All three strict.
pub fn should_change_lane<F: Real>(
    sample: &FieldSample<F>,
    u_a_adjacent: F,
    thresholds: &TriggerThresholds<F>,
) -> bool {
    sample.u_b > thresholds.u_b && sample.u_c < thresholds.u_c && sample.u_a > u_a_adjacent
}
