//! Reference paths and global <-> path-frame state transforms.
//!
//! A [`ReferencePath`] is built from waypoints, resampled to a uniform arc
//! step, and carries interpolated heading and curvature at every station.
//! [`ReferencePath::to_frenet`] and [`ReferencePath::to_global`] convert full
//! kinematic states (position, heading, speed, acceleration, curvature)
//! between the global plane and the path frame, and are exact inverses away
//! from the `1 - kappa*d = 0` singularity.

use serde::{Deserialize, Serialize};

use crate::scalar::{angle_lerp, wrap_to_pi, Real};

/// Minimum `1 - kappa*d` before the path frame degenerates.
const SINGULARITY_EPS: f64 = 1e-6;
/// Two input waypoints closer than this are considered duplicates.
const DUPLICATE_EPS: f64 = 1e-9;

/// Errors from path construction and frame transforms.
#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("need at least 3 waypoints, got {got}")]
    TooFewWaypoints { got: usize },
    #[error("waypoints {index} and {next} coincide", next = index + 1)]
    DuplicateWaypoint { index: usize },
    #[error("resample step must be positive and finite, got {got}")]
    BadResampleStep { got: f64 },
    #[error("path frame is singular at s = {s:.3}: 1 - kappa*d = {one_minus_kd:.3e}")]
    SingularTransform { s: f64, one_minus_kd: f64 },
    #[error("arc length {s:.3} outside path domain [0, {total:.3}]")]
    OutOfRange { s: f64, total: f64 },
}

/// Planar vector with just the operations the crate needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Vec2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self { x: F::zero(), y: F::zero() }
    }

    /// Unit vector at the given angle from the +x axis.
    pub fn from_angle(angle: F) -> Self {
        Self { x: angle.cos(), y: angle.sin() }
    }

    pub fn dot(self, other: Self) -> F {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product `self x other`.
    pub fn cross(self, other: Self) -> F {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    pub fn norm(self) -> F {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> F {
        (self - other).norm()
    }

    /// Counterclockwise perpendicular (left normal of a tangent).
    pub fn perp(self) -> Self {
        Self { x: -self.y, y: self.x }
    }

    /// Polar angle about the origin, in `[-pi, pi]`.
    pub fn angle(self) -> F {
        self.y.atan2(self.x)
    }

    pub fn scale(self, k: F) -> Self {
        Self { x: self.x * k, y: self.y * k }
    }
}

impl<F: Real> std::ops::Add for Vec2<F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { x: self.x + rhs.x, y: self.y + rhs.y }
    }
}

impl<F: Real> std::ops::Sub for Vec2<F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { x: self.x - rhs.x, y: self.y - rhs.y }
    }
}

/// Global planar vehicle state.
///
/// `kappa` is the curvature of the vehicle's own motion (signed, left turn
/// positive), not the curvature of any road it happens to be on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleState<F> {
    pub x: F,
    pub y: F,
    /// Heading, wrapped to `[-pi, pi)`.
    pub theta: F,
    /// Speed along the heading, >= 0.
    pub v: F,
    /// Longitudinal acceleration.
    pub a: F,
    /// Motion curvature, 1/m.
    pub kappa: F,
    /// Yaw rate, rad/s.
    pub psi_dot: F,
}

impl<F: Real> VehicleState<F> {
    /// A state at rest with everything else zeroed.
    pub fn at(x: F, y: F, theta: F) -> Self {
        Self {
            x,
            y,
            theta: wrap_to_pi(theta),
            v: F::zero(),
            a: F::zero(),
            kappa: F::zero(),
            psi_dot: F::zero(),
        }
    }

    pub fn position(&self) -> Vec2<F> {
        Vec2::new(self.x, self.y)
    }

    /// Global velocity vector `v * (cos theta, sin theta)`.
    pub fn velocity(&self) -> Vec2<F> {
        Vec2::from_angle(self.theta).scale(self.v)
    }

    /// Global acceleration vector: tangential `a` plus centripetal
    /// `v^2 * kappa` along the left normal.
    pub fn acceleration(&self) -> Vec2<F> {
        let tangent = Vec2::from_angle(self.theta);
        tangent.scale(self.a) + tangent.perp().scale(self.v * self.v * self.kappa)
    }
}

/// State in the frame of a reference path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrenetState<F> {
    /// Arc length along the path.
    pub s: F,
    /// Signed lateral offset, positive to the left of the path.
    pub d: F,
    pub s_dot: F,
    pub d_dot: F,
    pub s_ddot: F,
    pub d_ddot: F,
}

/// Pose of the path at one arc length.
#[derive(Debug, Clone, Copy)]
pub struct PathPoint<F> {
    pub point: Vec2<F>,
    /// Tangent heading, `[-pi, pi)`.
    pub heading: F,
    /// Signed curvature, left turn positive.
    pub curvature: F,
}

/// Result of projecting a point onto the path.
#[derive(Debug, Clone, Copy)]
pub struct Projection<F> {
    /// Arc length of the closest path point.
    pub s: F,
    /// Signed lateral offset of the query point, positive left.
    pub d: F,
    /// The closest path point itself.
    pub point: Vec2<F>,
}

/// Piecewise-linear reference path resampled at a uniform arc step, with
/// heading and curvature interpolated from the original waypoints.
#[derive(Debug, Clone)]
pub struct ReferencePath<F> {
    points: Vec<Vec2<F>>,
    cumulative_s: Vec<F>,
    headings: Vec<F>,
    curvatures: Vec<F>,
    closed: bool,
}

impl<F: Real> ReferencePath<F> {
    /// Builds a path through `waypoints`, resampled at `resample_step`
    /// meters of arc.
    ///
    /// Heading comes from central differences and curvature from the
    /// wrapped heading change per arc length, both evaluated at the
    /// original waypoints (one-sided at the ends of an open path) and
    /// linearly interpolated to the resampled stations. A path whose first
    /// and last waypoints coincide is treated as closed: derivatives wrap
    /// around the seam instead of going one-sided.
    pub fn new(waypoints: &[Vec2<F>], resample_step: F) -> Result<Self, GeometryError> {
        if waypoints.len() < 3 {
            return Err(GeometryError::TooFewWaypoints { got: waypoints.len() });
        }
        if !(resample_step > F::zero()) || !resample_step.is_finite() {
            return Err(GeometryError::BadResampleStep {
                got: resample_step.to_f64().unwrap_or(f64::NAN),
            });
        }
        let dup_eps = F::of(DUPLICATE_EPS);
        for (i, pair) in waypoints.windows(2).enumerate() {
            if pair[0].distance(pair[1]) <= dup_eps {
                return Err(GeometryError::DuplicateWaypoint { index: i });
            }
        }

        let n = waypoints.len();
        let closed = waypoints[0].distance(waypoints[n - 1]) <= dup_eps;

        // Arc length along the input polyline.
        let mut arc = Vec::with_capacity(n);
        arc.push(F::zero());
        for pair in waypoints.windows(2) {
            let last = *arc.last().expect("arc is seeded with 0");
            arc.push(last + pair[0].distance(pair[1]));
        }
        let total = *arc.last().expect("arc is non-empty");

        // Derivatives at the input waypoints. For a closed path the
        // neighbors wrap (index n-1 aliases index 0), keeping heading and
        // curvature continuous across the seam.
        let prev_next = |i: usize| -> (usize, usize, F) {
            if closed {
                let prev = if i == 0 { n - 2 } else { i - 1 };
                let next = if i >= n - 2 { (i + 1) % (n - 1) } else { i + 1 };
                // Arc span between the neighbors, measured through i.
                let before = if i == 0 { total - arc[n - 2] } else { arc[i] - arc[prev] };
                let after = if i >= n - 2 { total - arc[i] + arc[next] } else { arc[next] - arc[i] };
                (prev, next, before + after)
            } else if i == 0 {
                (0, 1, arc[1])
            } else if i == n - 1 {
                (n - 2, n - 1, total - arc[n - 2])
            } else {
                (i - 1, i + 1, arc[i + 1] - arc[i - 1])
            }
        };
        let vertex_headings: Vec<F> = (0..n)
            .map(|i| {
                let (prev, next, _) = prev_next(i);
                (waypoints[next] - waypoints[prev]).angle()
            })
            .collect();
        let vertex_curvatures: Vec<F> = (0..n)
            .map(|i| {
                let (prev, next, span) = prev_next(i);
                wrap_to_pi(vertex_headings[next] - vertex_headings[prev]) / span
            })
            .collect();

        // Resample: stations every `resample_step`, plus the endpoint.
        let mut stations = Vec::new();
        let mut k = 0usize;
        loop {
            let s = F::of_usize(k) * resample_step;
            if s >= total {
                break;
            }
            stations.push(s);
            k += 1;
        }
        stations.push(total);

        let mut points = Vec::with_capacity(stations.len());
        let mut headings = Vec::with_capacity(stations.len());
        let mut curvatures = Vec::with_capacity(stations.len());
        let mut seg = 0usize;
        for &station in &stations {
            while seg + 2 < n && arc[seg + 1] < station {
                seg += 1;
            }
            let span = arc[seg + 1] - arc[seg];
            let t = ((station - arc[seg]) / span).max(F::zero()).min(F::one());
            let p = waypoints[seg] + (waypoints[seg + 1] - waypoints[seg]).scale(t);
            points.push(p);
            headings.push(angle_lerp(vertex_headings[seg], vertex_headings[seg + 1], t));
            curvatures.push(
                vertex_curvatures[seg] + (vertex_curvatures[seg + 1] - vertex_curvatures[seg]) * t,
            );
        }

        Ok(Self { points, cumulative_s: stations, headings, curvatures, closed })
    }

    /// Total arc length.
    pub fn total_length(&self) -> F {
        *self.cumulative_s.last().expect("paths have at least 2 stations")
    }

    /// Whether the first and last waypoints coincided at construction.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Number of resampled stations.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Arc lengths of the resampled stations, strictly increasing from 0.
    pub fn stations(&self) -> &[F] {
        &self.cumulative_s
    }

    /// Wraps (closed) or clamps (open) an arc length into the path domain.
    pub fn normalize_s(&self, s: F) -> F {
        let total = self.total_length();
        if self.closed {
            let wrapped = s % total;
            if wrapped < F::zero() {
                wrapped + total
            } else {
                wrapped
            }
        } else {
            s.max(F::zero()).min(total)
        }
    }

    fn segment_index(&self, s: F) -> usize {
        // Largest i with cumulative_s[i] <= s, capped to the last segment.
        match self.cumulative_s.binary_search_by(|probe| {
            probe.partial_cmp(&s).expect("stations and queries are finite")
        }) {
            Ok(i) => i.min(self.points.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.points.len() - 2),
        }
    }

    /// Pose of the path at arc length `s`, clamped (open) or wrapped
    /// (closed) into the domain.
    pub fn sample(&self, s: F) -> PathPoint<F> {
        let s = self.normalize_s(s);
        let i = self.segment_index(s);
        let span = self.cumulative_s[i + 1] - self.cumulative_s[i];
        let t = ((s - self.cumulative_s[i]) / span).max(F::zero()).min(F::one());
        PathPoint {
            point: self.points[i] + (self.points[i + 1] - self.points[i]).scale(t),
            heading: angle_lerp(self.headings[i], self.headings[i + 1], t),
            curvature: self.curvatures[i] + (self.curvatures[i + 1] - self.curvatures[i]) * t,
        }
    }

    /// Closest path point to `p` by global search over every segment.
    /// Ties resolve to the smallest arc length. The offset `d` is signed
    /// positive when `p` lies left of the path tangent.
    pub fn project(&self, p: Vec2<F>) -> Projection<F> {
        let mut best_i = 0usize;
        let mut best_t = F::zero();
        let mut best_d2 = F::infinity();
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let ab = self.points[i + 1] - a;
            let len2 = ab.norm_sq();
            let t = ((p - a).dot(ab) / len2).max(F::zero()).min(F::one());
            let foot = a + ab.scale(t);
            let d2 = (p - foot).norm_sq();
            // Strict improvement keeps the earliest (smallest-s) candidate.
            if d2 < best_d2 {
                best_d2 = d2;
                best_i = i;
                best_t = t;
            }
        }
        let i = best_i;
        let span = self.cumulative_s[i + 1] - self.cumulative_s[i];
        let s = self.cumulative_s[i] + span * best_t;
        let tangent = Vec2::from_angle(angle_lerp(self.headings[i], self.headings[i + 1], best_t));
        let foot = self.points[i] + (self.points[i + 1] - self.points[i]).scale(best_t);
        let offset = p - foot;
        let d = offset.norm() * sign_or_one(tangent.cross(offset));
        Projection { s, d, point: foot }
    }

    /// Projection refined so that `(p - P(s))` is exactly orthogonal to the
    /// interpolated tangent at `s`, which makes `to_global(to_frenet(x))`
    /// close to round-trip precision. Returns `(s, d)`.
    fn refine_projection(&self, p: Vec2<F>, seed_s: F) -> (F, F) {
        let total = self.total_length();
        let residual = |s: F| {
            let pp = self.sample(s);
            (p - pp.point).dot(Vec2::from_angle(pp.heading))
        };
        // The residual decreases through the root (it is ~ -(s - s*)
        // locally), so bracket with lo below and hi above the seed.
        let mut half = F::of(0.75);
        let (mut lo, mut hi);
        loop {
            lo = seed_s - half;
            hi = seed_s + half;
            if !self.closed {
                lo = lo.max(F::zero());
                hi = hi.min(total);
            }
            if residual(lo) >= F::zero() && residual(hi) <= F::zero() {
                break;
            }
            half = half + half;
            let span_exhausted = if self.closed {
                half > total
            } else {
                lo <= F::zero() && hi >= total
            };
            if span_exhausted {
                // No sign change anywhere: the seed (an endpoint of an open
                // path, typically) is the best answer available.
                let pp = self.sample(seed_s);
                let tangent = Vec2::from_angle(pp.heading);
                let offset = p - pp.point;
                return (seed_s, offset.norm() * sign_or_one(tangent.cross(offset)));
            }
        }
        let tol = F::of(1e-11) * total.max(F::one());
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = (lo + hi) * F::of(0.5);
            if residual(mid) >= F::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = self.normalize_s((lo + hi) * F::of(0.5));
        let pp = self.sample(s);
        let offset = p - pp.point;
        let d = offset.norm() * sign_or_one(Vec2::from_angle(pp.heading).cross(offset));
        (s, d)
    }

    /// Transforms a global state into this path's frame.
    ///
    /// Fails with [`GeometryError::SingularTransform`] when the state sits
    /// at (or past) the local center of curvature, where the frame folds.
    pub fn to_frenet(&self, state: &VehicleState<F>) -> Result<FrenetState<F>, GeometryError> {
        let p = state.position();
        let seed = self.project(p);
        let (s, d) = self.refine_projection(p, seed.s);
        let pp = self.sample(s);
        let kappa = pp.curvature;
        let one_kd = F::one() - kappa * d;
        if one_kd <= F::of(SINGULARITY_EPS) {
            return Err(GeometryError::SingularTransform {
                s: s.to_f64().unwrap_or(f64::NAN),
                one_minus_kd: one_kd.to_f64().unwrap_or(f64::NAN),
            });
        }
        let (sin_psi, cos_psi) = pp.heading.sin_cos();
        let vel = state.velocity();
        let acc = state.acceleration();

        let s_dot = (vel.x * cos_psi + vel.y * sin_psi) / one_kd;
        let d_dot = vel.y * cos_psi - vel.x * sin_psi;
        let centripetal = kappa * s_dot * s_dot;
        let s_ddot = (acc.x * cos_psi + acc.y * sin_psi) / one_kd + centripetal / one_kd;
        let d_ddot = acc.y * cos_psi - acc.x * sin_psi - centripetal;

        Ok(FrenetState { s, d, s_dot, d_dot, s_ddot, d_ddot })
    }

    /// Transforms a path-frame state back to the global plane.
    ///
    /// For an open path `s` must lie in `[0, total_length]`; a closed path
    /// wraps. The returned speed is the full planar speed, the heading
    /// includes the drift angle `atan2(d_dot, s_dot * (1 - kappa*d))`, and
    /// acceleration / curvature / yaw rate describe the vehicle's own
    /// motion.
    pub fn to_global(&self, fs: &FrenetState<F>) -> Result<VehicleState<F>, GeometryError> {
        let total = self.total_length();
        if !self.closed && (fs.s < -F::of(1e-9) || fs.s > total + F::of(1e-9)) {
            return Err(GeometryError::OutOfRange {
                s: fs.s.to_f64().unwrap_or(f64::NAN),
                total: total.to_f64().unwrap_or(f64::NAN),
            });
        }
        let pp = self.sample(fs.s);
        let kappa = pp.curvature;
        let one_kd = F::one() - kappa * fs.d;
        if one_kd <= F::of(SINGULARITY_EPS) {
            return Err(GeometryError::SingularTransform {
                s: fs.s.to_f64().unwrap_or(f64::NAN),
                one_minus_kd: one_kd.to_f64().unwrap_or(f64::NAN),
            });
        }
        let (sin_psi, cos_psi) = pp.heading.sin_cos();

        let x = pp.point.x - fs.d * sin_psi;
        let y = pp.point.y + fs.d * cos_psi;

        // Velocity: rotate the path-frame components by the path heading.
        let vt = fs.s_dot * one_kd;
        let vx = vt * cos_psi - fs.d_dot * sin_psi;
        let vy = vt * sin_psi + fs.d_dot * cos_psi;
        let v = vx.hypot(vy);
        let theta = wrap_to_pi(pp.heading + fs.d_dot.atan2(vt));

        // Acceleration: invert the frame equations, then split the global
        // vector into tangential and centripetal parts along the heading.
        let centripetal = kappa * fs.s_dot * fs.s_dot;
        let at_frame = fs.s_ddot * one_kd - centripetal;
        let an_frame = fs.d_ddot + centripetal;
        let ax = at_frame * cos_psi - an_frame * sin_psi;
        let ay = at_frame * sin_psi + an_frame * cos_psi;
        let tangent = Vec2::from_angle(theta);
        let acc = Vec2::new(ax, ay);
        let a = acc.dot(tangent);
        let a_normal = acc.dot(tangent.perp());
        let kappa_veh = if v > F::of(1e-12) { a_normal / (v * v) } else { F::zero() };

        Ok(VehicleState {
            x,
            y,
            theta,
            v,
            a,
            kappa: kappa_veh,
            psi_dot: v * kappa_veh,
        })
    }
}

fn sign_or_one<F: Real>(x: F) -> F {
    if x < F::zero() {
        -F::one()
    } else {
        F::one()
    }
}
