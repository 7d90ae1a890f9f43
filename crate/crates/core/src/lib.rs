//! Lane-change planning on curved two-lane roads.
//!
//! The library models a subject vehicle driving on a circular two-lane road
//! among slower traffic. A risk field over the road plane (goal attraction,
//! car-following repulsion, lane-change pressure) decides *when* to leave the
//! current lane; a quintic lateral polynomial in the path frame describes
//! *how*; and a particle swarm with time-varying inertia and acceleration
//! coefficients picks the maneuver duration and longitudinal advance that
//! minimize a comfort/efficiency cost under hard dynamic limits.
//!
//! Modules, bottom up:
//!
//! * [`scalar`]: the [`Real`] trait the whole crate is generic over
//!   (`f32` or `f64`).
//! * [`geometry`]: reference paths from waypoints, projection, and the
//!   global <-> path-frame state transforms.
//! * [`trajectory`]: quintic boundary-value solves, sampling, and
//!   reconstruction of yaw rate / lateral acceleration / side slip /
//!   steering from a lateral profile.
//! * [`riskfield`]: the three field components, their adaptive parameters,
//!   the repulsion gradient, and the lane-change trigger predicate.
//! * [`optimizer`]: the swarm optimizer (adaptive and fixed-parameter
//!   modes), penalty bookkeeping, and a grid-search oracle.
//! * [`planner`]: phase bookkeeping and the per-step decision that turns
//!   field samples into maneuvers.
//! * [`sim`]: closed-loop batch simulation of a scenario, trace capture,
//!   and summary metrics.
//! * [`config`]: JSON scenario configs and waypoint CSV input.
//!
//! Everything numeric is generic over [`Real`]; the aliases below fix the
//! common `f64` instantiations.

pub mod config;
pub mod geometry;
pub mod optimizer;
pub mod planner;
pub mod riskfield;
pub mod scalar;
pub mod sim;
pub mod trajectory;

pub use scalar::Real;

/// Double-precision reference path.
pub type Path64 = geometry::ReferencePath<f64>;
/// Double-precision global vehicle state.
pub type VehicleState64 = geometry::VehicleState<f64>;
/// Double-precision path-frame state.
pub type FrenetState64 = geometry::FrenetState<f64>;
/// Double-precision field parameter set.
pub type FieldParams64 = riskfield::FieldParams<f64>;
/// Double-precision swarm configuration.
pub type SwarmConfig64 = optimizer::SwarmConfig<f64>;
/// Double-precision scenario, ready to run.
pub type Scenario64 = sim::Scenario<f64>;
