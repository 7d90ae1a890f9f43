//! Quintic lateral trajectories and the control quantities they imply.
//!
//! A lane change is a quintic polynomial `d(t)` in the path frame, pinned by
//! position / velocity / acceleration at both ends of a time window. From a
//! sampled profile and the road curvature underneath, the module
//! reconstructs lateral acceleration, yaw rate, side slip, and steering
//! angle, and checks them against hard limits.

use crate::geometry::ReferencePath;
use crate::scalar::Real;

/// Errors from trajectory construction and sampling.
#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("time window [{t_s:.3}, {t_e:.3}] is shorter than 0.1 s")]
    WindowTooShort { t_s: f64, t_e: f64 },
    #[error("t = {t:.4} outside trajectory window [{t_s:.4}, {t_e:.4}]")]
    OutOfWindow { t: f64, t_s: f64, t_e: f64 },
    #[error("boundary system is singular (window {duration:.3} s)")]
    SingularSystem { duration: f64 },
    #[error("sample step must be positive, got {got}")]
    BadSampleStep { got: f64 },
    #[error("speed profile has {got} samples, trace needs 1 or {expected}")]
    ProfileLengthMismatch { expected: usize, got: usize },
    #[error("speed must be positive, got {v} at sample {index}")]
    NonPositiveSpeed { index: usize, v: f64 },
}

/// Boundary values pinning a quintic on `[t_s, t_e]`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryConditions<F> {
    pub t_s: F,
    pub t_e: F,
    pub y_s: F,
    pub y_dot_s: F,
    pub y_ddot_s: F,
    pub y_e: F,
    pub y_dot_e: F,
    pub y_ddot_e: F,
}

/// Quintic `y(t) = sum a_i (t - t_s)^i` on the window `[t_s, t_e]`.
#[derive(Debug, Clone, Copy)]
pub struct QuinticTrajectory<F> {
    /// Coefficients in the time-shifted variable `t - t_s`, constant term
    /// first.
    pub coeffs: [F; 6],
    pub t_s: F,
    pub t_e: F,
}

/// Solves the 6x6 boundary system for the quintic pinned by `bc`.
///
/// The system is assembled in the shifted variable `tau = t - t_s`, which
/// keeps it well conditioned for any window placement.
pub fn solve_quintic<F: Real>(bc: &BoundaryConditions<F>) -> Result<QuinticTrajectory<F>, TrajectoryError> {
    let duration = bc.t_e - bc.t_s;
    if !(duration >= F::of(0.1)) {
        return Err(TrajectoryError::WindowTooShort {
            t_s: bc.t_s.to_f64().unwrap_or(f64::NAN),
            t_e: bc.t_e.to_f64().unwrap_or(f64::NAN),
        });
    }
    let z = F::zero();
    let one = F::one();
    let two = F::of(2.0);
    let t = duration;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let matrix = [
        [one, z, z, z, z, z],
        [z, one, z, z, z, z],
        [z, z, two, z, z, z],
        [one, t, t2, t3, t4, t5],
        [z, one, two * t, F::of(3.0) * t2, F::of(4.0) * t3, F::of(5.0) * t4],
        [z, z, two, F::of(6.0) * t, F::of(12.0) * t2, F::of(20.0) * t3],
    ];
    let rhs = [bc.y_s, bc.y_dot_s, bc.y_ddot_s, bc.y_e, bc.y_dot_e, bc.y_ddot_e];
    let coeffs = solve6(matrix, rhs).ok_or(TrajectoryError::SingularSystem {
        duration: duration.to_f64().unwrap_or(f64::NAN),
    })?;
    Ok(QuinticTrajectory { coeffs, t_s: bc.t_s, t_e: bc.t_e })
}

/// Gaussian elimination with partial pivoting on a 6x6 system.
fn solve6<F: Real>(mut m: [[F; 6]; 6], mut b: [F; 6]) -> Option<[F; 6]> {
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&i, &j| {
                m[i][col].abs().partial_cmp(&m[j][col].abs()).expect("matrix entries are finite")
            })
            .expect("range is non-empty");
        if m[pivot][col].abs() == F::zero() {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..6 {
            let factor = m[row][col] / m[col][col];
            if factor == F::zero() {
                continue;
            }
            for k in col..6 {
                let sub = factor * m[col][k];
                m[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    let mut x = [F::zero(); 6];
    for row in (0..6).rev() {
        let mut acc = b[row];
        for k in row + 1..6 {
            acc = acc - m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

impl<F: Real> QuinticTrajectory<F> {
    pub fn duration(&self) -> F {
        self.t_e - self.t_s
    }

    /// Position, velocity, and acceleration at time `t`.
    ///
    /// `t` must lie inside the window (with a 1e-9 slack for rounding at
    /// the ends).
    pub fn evaluate(&self, t: F) -> Result<(F, F, F), TrajectoryError> {
        let slack = F::of(1e-9) * self.t_e.abs().max(F::one());
        if t < self.t_s - slack || t > self.t_e + slack {
            return Err(TrajectoryError::OutOfWindow {
                t: t.to_f64().unwrap_or(f64::NAN),
                t_s: self.t_s.to_f64().unwrap_or(f64::NAN),
                t_e: self.t_e.to_f64().unwrap_or(f64::NAN),
            });
        }
        let tau = (t - self.t_s).max(F::zero()).min(self.duration());
        let [a0, a1, a2, a3, a4, a5] = self.coeffs;
        let y = ((((a5 * tau + a4) * tau + a3) * tau + a2) * tau + a1) * tau + a0;
        let y_dot = (((F::of(5.0) * a5 * tau + F::of(4.0) * a4) * tau + F::of(3.0) * a3) * tau
            + F::of(2.0) * a2)
            * tau
            + a1;
        let y_ddot = ((F::of(20.0) * a5 * tau + F::of(12.0) * a4) * tau + F::of(6.0) * a3) * tau
            + F::of(2.0) * a2;
        Ok((y, y_dot, y_ddot))
    }

    /// Coefficients of the same polynomial in absolute time, constant term
    /// first: `y(t) = sum b_j t^j`.
    ///
    /// Expanded binomially from the shifted coefficients; useful for
    /// checking the trajectory against the unshifted boundary matrix.
    pub fn absolute_coeffs(&self) -> [F; 6] {
        let mut b = [F::zero(); 6];
        // Pascal's triangle row by row for the binomial coefficients.
        let mut binom = [[0.0f64; 6]; 6];
        for i in 0..6 {
            binom[i][0] = 1.0;
            for j in 1..=i {
                binom[i][j] = binom[i - 1][j - 1] + if j <= i - 1 { binom[i - 1][j] } else { 0.0 };
            }
        }
        let neg_ts = -self.t_s;
        for i in 0..6 {
            let mut power = F::one();
            // (t - t_s)^i = sum_j C(i,j) t^j (-t_s)^(i-j), accumulated from
            // j = i downward so `power` tracks (-t_s)^(i-j).
            for j in (0..=i).rev() {
                b[j] += self.coeffs[i] * F::of(binom[i][j]) * power;
                power = power * neg_ts;
            }
        }
        b
    }
}

/// Axle geometry used to map motion curvature to steering and side slip.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct VehicleGeometry<F> {
    /// Wheelbase, m.
    pub wheelbase: F,
    /// Rear axle to center of gravity, m.
    pub rear_axle_to_cg: F,
}

impl<F: Real> Default for VehicleGeometry<F> {
    fn default() -> Self {
        Self { wheelbase: F::of(2.7), rear_axle_to_cg: F::of(1.35) }
    }
}

/// Hard limits on the reconstructed control quantities.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DynamicLimits<F> {
    /// Lateral acceleration bound, m/s^2.
    pub a_y_max: F,
    /// Road friction coefficient for the yaw-rate bound `mu*g/v`.
    pub mu: F,
    /// Gravity, m/s^2.
    pub g: F,
    /// Side-slip bound, rad.
    pub beta_max: F,
    /// Steering-angle bound, rad.
    pub delta_max: F,
}

impl<F: Real> Default for DynamicLimits<F> {
    fn default() -> Self {
        Self {
            a_y_max: F::of(0.4 * 9.81),
            mu: F::of(0.85),
            g: F::of(9.81),
            beta_max: F::of(10.0f64.to_radians()),
            delta_max: F::of(2.0f64.to_radians()),
        }
    }
}

/// Sampled control quantities along a lateral trajectory.
///
/// All vectors share one length; index `k` belongs to time `t[k]`.
#[derive(Debug, Clone)]
pub struct ControlTrace<F> {
    pub t: Vec<F>,
    /// Lateral offset.
    pub y: Vec<F>,
    pub y_dot: Vec<F>,
    pub y_ddot: Vec<F>,
    /// Longitudinal speed used at each sample.
    pub v_x: Vec<F>,
    /// Lateral acceleration including the road's curvature underneath.
    pub a_y: Vec<F>,
    pub psi_dot: Vec<F>,
    /// Side slip, rad.
    pub beta: Vec<F>,
    /// Front steering angle, rad.
    pub delta: Vec<F>,
}

impl<F: Real> ControlTrace<F> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn max_abs(values: &[F]) -> F {
        values.iter().fold(F::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_a_y(&self) -> F {
        Self::max_abs(&self.a_y)
    }

    pub fn max_abs_psi_dot(&self) -> F {
        Self::max_abs(&self.psi_dot)
    }

    pub fn max_abs_beta(&self) -> F {
        Self::max_abs(&self.beta)
    }

    pub fn max_abs_delta(&self) -> F {
        Self::max_abs(&self.delta)
    }
}

/// Number of samples `reconstruct_controls` produces for a window of this
/// duration at step `dt`: every multiple of `dt` inside the window, plus
/// the window end when it is not itself a multiple.
pub fn sample_count<F: Real>(duration: F, dt: F) -> usize {
    let n = (duration / dt).to_f64().map(|x| x.floor() as usize).unwrap_or(0);
    let last = F::of_usize(n) * dt;
    if duration - last > F::of(1e-9) {
        n + 2
    } else {
        n + 1
    }
}

/// Samples the trajectory at step `dt` and reconstructs the control
/// quantities over the road curvature underneath.
///
/// `vx_profile` is the longitudinal speed: one entry (constant) or one per
/// sample. `s0` is the arc length on `path` where the window starts; the
/// vehicle advances along the path at the profile speed. The motion
/// curvature added by the lane change is `y_ddot / v_x^2`; steering and
/// side slip come from that added curvature through the axle geometry,
/// while lateral acceleration and yaw rate also carry the road term
/// `v_x^2 * kappa_path` and `v_x * kappa_path`.
pub fn reconstruct_controls<F: Real>(
    traj: &QuinticTrajectory<F>,
    vx_profile: &[F],
    path: &ReferencePath<F>,
    s0: F,
    geometry: &VehicleGeometry<F>,
    dt: F,
) -> Result<ControlTrace<F>, TrajectoryError> {
    if !(dt > F::zero()) {
        return Err(TrajectoryError::BadSampleStep { got: dt.to_f64().unwrap_or(f64::NAN) });
    }
    let n = sample_count(traj.duration(), dt);
    if vx_profile.len() != 1 && vx_profile.len() != n {
        return Err(TrajectoryError::ProfileLengthMismatch { expected: n, got: vx_profile.len() });
    }
    let speed_at = |k: usize| if vx_profile.len() == 1 { vx_profile[0] } else { vx_profile[k] };
    for k in 0..n {
        let v = speed_at(k);
        if !(v > F::zero()) {
            return Err(TrajectoryError::NonPositiveSpeed {
                index: k,
                v: v.to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let mut trace = ControlTrace {
        t: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        y_dot: Vec::with_capacity(n),
        y_ddot: Vec::with_capacity(n),
        v_x: Vec::with_capacity(n),
        a_y: Vec::with_capacity(n),
        psi_dot: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
    };
    let mut s = s0;
    let mut prev_v = speed_at(0);
    let mut prev_tau = F::zero();
    for k in 0..n {
        let tau = (F::of_usize(k) * dt).min(traj.duration());
        let t = traj.t_s + tau;
        let v = speed_at(k);
        // Trapezoidal advance along the path; exact for a constant profile.
        s += (prev_v + v) * F::of(0.5) * (tau - prev_tau);
        prev_v = v;
        prev_tau = tau;

        let (y, y_dot, y_ddot) = traj.evaluate(t)?;
        let kappa_path = path.sample(s).curvature;
        let kappa_offset = y_ddot / (v * v);
        let kappa_total = kappa_path + kappa_offset;

        trace.t.push(t);
        trace.y.push(y);
        trace.y_dot.push(y_dot);
        trace.y_ddot.push(y_ddot);
        trace.v_x.push(v);
        trace.a_y.push(v * v * kappa_total);
        trace.psi_dot.push(v * kappa_total);
        trace.beta.push((geometry.rear_axle_to_cg * kappa_offset).atan());
        trace.delta.push((geometry.wheelbase * kappa_offset).atan());
    }
    Ok(trace)
}

/// One limit violation at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation<F> {
    pub kind: ConstraintKind,
    /// Time of the violating sample.
    pub t: F,
    /// Exceedance above the limit (always > 0).
    pub magnitude: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    LateralAccel,
    YawRate,
    SideSlip,
    Steering,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] = [
        ConstraintKind::LateralAccel,
        ConstraintKind::YawRate,
        ConstraintKind::SideSlip,
        ConstraintKind::Steering,
    ];
}

/// Checks every sample of `trace` against `limits`; one entry per
/// violating sample. The yaw-rate limit is speed-dependent,
/// `mu*g / max(v, 0.1)`.
pub fn check_constraints<F: Real>(trace: &ControlTrace<F>, limits: &DynamicLimits<F>) -> Vec<Violation<F>> {
    let mut violations = Vec::new();
    for k in 0..trace.len() {
        let t = trace.t[k];
        let mut push = |kind, value: F, limit: F| {
            let excess = value.abs() - limit;
            if excess > F::zero() {
                violations.push(Violation { kind, t, magnitude: excess });
            }
        };
        push(ConstraintKind::LateralAccel, trace.a_y[k], limits.a_y_max);
        let yaw_limit = limits.mu * limits.g / trace.v_x[k].max(F::of(0.1));
        push(ConstraintKind::YawRate, trace.psi_dot[k], yaw_limit);
        push(ConstraintKind::SideSlip, trace.beta[k], limits.beta_max);
        push(ConstraintKind::Steering, trace.delta[k], limits.delta_max);
    }
    violations
}

/// Largest exceedance per constraint over the whole trace, in
/// [`ConstraintKind::ALL`] order; zero where the limit holds.
pub fn max_exceedances<F: Real>(trace: &ControlTrace<F>, limits: &DynamicLimits<F>) -> [F; 4] {
    let mut out = [F::zero(); 4];
    for violation in check_constraints(trace, limits) {
        let slot = ConstraintKind::ALL
            .iter()
            .position(|k| *k == violation.kind)
            .expect("ALL covers every kind");
        out[slot] = out[slot].max(violation.magnitude);
    }
    out
}
