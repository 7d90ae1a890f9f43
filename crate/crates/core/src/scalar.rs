//! Scalar abstraction: every numeric routine in this crate is generic over
//! [`Real`], which `f32` and `f64` implement.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::distr::uniform::SampleUniform;
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar the crate's math runs on.
///
/// The supertraits cover arithmetic, transcendentals, the constants
/// (`PI`, `TAU`), conversion from primitives, uniform sampling, serde
/// round-trips of configuration and traces, and the thread-safety bounds
/// the parallel optimizer needs.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + SampleUniform
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type. Lossy only for
    /// `f32`, and only beyond its precision.
    fn of(x: f64) -> Self;

    /// Converts a count into this scalar type.
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_to_pi<F: Real>(angle: F) -> F {
    let tau = F::TAU();
    let shifted = (angle + F::PI()) % tau;
    let shifted = if shifted < F::zero() { shifted + tau } else { shifted };
    shifted - F::PI()
}

/// Wraps an angle to `[0, tau)`.
pub fn wrap_to_tau<F: Real>(angle: F) -> F {
    let tau = F::TAU();
    let wrapped = angle % tau;
    if wrapped < F::zero() {
        wrapped + tau
    } else {
        wrapped
    }
}

/// Interpolates between two angles along the short way round, wrapping the
/// result to `[-pi, pi)`. `t = 0` gives `a`, `t = 1` gives `b`.
pub fn angle_lerp<F: Real>(a: F, b: F, t: F) -> F {
    wrap_to_pi(a + wrap_to_pi(b - a) * t)
}
