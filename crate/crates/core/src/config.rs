//! Scenario configuration files.
//!
//! A scenario file is JSON (conventionally `.cfg`). Only the road and the
//! vehicle list are required; every tuning section falls back to the
//! defaults of its type:
//!
//! ```json
//! {
//!     "name": "case1",
//!     "seed": 42,
//!     "road": {
//!         "center": [0.0, 0.0],
//!         "inner_edge_radius": 64.0,
//!         "outer_edge_radius": 70.0,
//!         "lane_width": 3.0
//!     },
//!     "target_lane": 1,
//!     "vehicles": [
//!         { "role": "SV", "lane": 2, "angle_deg": 0.0, "speed": 5.0 }
//!     ]
//! }
//! ```
//!
//! Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use std::path::Path;

use serde::Deserialize;

use crate::geometry::Vec2;
use crate::optimizer::SwarmConfig;
use crate::planner::CostWeights;
use crate::riskfield::{FieldParams, TriggerThresholds};
use crate::scalar::Real;
use crate::sim::Role;
use crate::trajectory::{DynamicLimits, VehicleGeometry};

/// Errors from reading configuration and waypoint files.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Waypoint {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Road geometry: a circular two-lane road described by its edge radii.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = ""))]
pub struct RoadConfig<F: Real> {
    /// Road center, `[x, y]` in meters.
    #[serde(default = "default_center")]
    pub center: [F; 2],
    pub inner_edge_radius: F,
    pub outer_edge_radius: F,
    pub lane_width: F,
}

/// One vehicle entry.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig<F> {
    pub role: Role,
    /// Lane id: 1 is the outer lane, 2 the inner lane.
    pub lane: u8,
    /// Initial polar angle about the road center, degrees.
    pub angle_deg: F,
    /// Constant speed, m/s.
    pub speed: F,
}

/// Top-level scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = ""))]
pub struct ScenarioConfig<F: Real> {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub road: RoadConfig<F>,
    /// Lane id the route targets; a change is considered once the fields
    /// favor it.
    #[serde(default = "default_target_lane")]
    pub target_lane: u8,
    pub vehicles: Vec<VehicleConfig<F>>,
    /// Simulation step, s.
    #[serde(default = "default_dt")]
    pub dt: F,
    /// Simulated steps; the trace has `horizon + 1` rows.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Maneuver sampling step, s.
    #[serde(default = "default_dt_sample")]
    pub dt_sample: F,
    #[serde(default)]
    pub field_params: FieldParams<F>,
    #[serde(default)]
    pub thresholds: TriggerThresholds<F>,
    #[serde(default)]
    pub swarm: SwarmConfig<F>,
    #[serde(default)]
    pub cost_weights: CostWeights<F>,
    #[serde(default)]
    pub limits: DynamicLimits<F>,
    #[serde(default)]
    pub vehicle: VehicleGeometry<F>,
}

fn default_name() -> String {
    "scenario".to_owned()
}

fn default_center<F: Real>() -> [F; 2] {
    [F::zero(), F::zero()]
}

fn default_target_lane() -> u8 {
    1
}

fn default_dt<F: Real>() -> F {
    F::of(0.1)
}

fn default_horizon() -> usize {
    200
}

fn default_dt_sample<F: Real>() -> F {
    F::of(0.05)
}

/// Parses a scenario file.
pub fn load_config<F: Real>(path: impl AsRef<Path>) -> Result<ScenarioConfig<F>, ConfigError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: display.clone(),
        source,
    })?;
    parse_config(&text, &display)
}

/// Parses scenario JSON; `origin` names the source in errors.
pub fn parse_config<F: Real>(text: &str, origin: &str) -> Result<ScenarioConfig<F>, ConfigError> {
    serde_json::from_str(text).map_err(|source| ConfigError::Parse {
        path: origin.to_owned(),
        source,
    })
}

/// Reads waypoints from a CSV file of `x,y` lines. A single header line
/// is allowed; blank lines and `#` comments are skipped.
pub fn load_waypoints<F: Real>(path: impl AsRef<Path>) -> Result<Vec<Vec2<F>>, ConfigError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: display.clone(),
        source,
    })?;
    parse_waypoints(&text, &display)
}

/// Parses waypoint CSV text; `origin` names the source in errors.
pub fn parse_waypoints<F: Real>(text: &str, origin: &str) -> Result<Vec<Vec2<F>>, ConfigError> {
    let mut points = Vec::new();
    let mut first_content = true;
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| ConfigError::Waypoint {
            path: origin.to_owned(),
            line: index + 1,
            reason,
        };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(bad(format!("expected 'x,y', got {raw:?}")));
        }
        match (cells[0].parse::<f64>(), cells[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => points.push(Vec2::new(F::of(x), F::of(y))),
            // The first content line may be a column header.
            _ if first_content => {}
            _ => return Err(bad(format!("expected numbers, got {raw:?}"))),
        }
        first_content = false;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimal_config_gets_defaults() {
        let text = r#"{
            "road": { "inner_edge_radius": 64.0, "outer_edge_radius": 70.0, "lane_width": 3.0 },
            "vehicles": [ { "role": "SV", "lane": 2, "angle_deg": 0.0, "speed": 5.0 } ]
        }"#;
        let config: ScenarioConfig<f64> = parse_config(text, "inline").expect("minimal parses");
        assert_eq!(config.name, "scenario");
        assert_eq!(config.seed, 0);
        assert_eq!(config.target_lane, 1);
        assert_abs_diff_eq!(config.road.center[0], 0.0);
        assert_abs_diff_eq!(config.dt, 0.1);
        assert_eq!(config.horizon, 200);
        assert_abs_diff_eq!(config.dt_sample, 0.05);
        assert_abs_diff_eq!(config.field_params.gamma0, 50.0);
        assert_abs_diff_eq!(config.thresholds.u_b, 10.0);
        assert_abs_diff_eq!(config.limits.a_y_max, 0.4 * 9.81);
        assert_abs_diff_eq!(config.vehicle.wheelbase, 2.7);
        assert_eq!(config.swarm.particles, 40);
        assert_abs_diff_eq!(config.cost_weights.efficiency, 0.2);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let text = r#"{
            "road": { "inner_edge_radius": 64.0, "outer_edge_radius": 70.0, "lane_width": 3.0 },
            "vehicles": [ { "role": "SV", "lane": 2, "angle_deg": 0.0, "speed": 5.0 } ],
            "field_params": { "gamma0": 80.0 },
            "swarm": { "mode": "fixed", "seed": 7 }
        }"#;
        let config: ScenarioConfig<f64> = parse_config(text, "inline").expect("partial parses");
        assert_abs_diff_eq!(config.field_params.gamma0, 80.0);
        assert_abs_diff_eq!(config.field_params.sigma0, 5.0, epsilon = 0.0);
        assert_eq!(config.swarm.seed, 7);
        assert_eq!(config.swarm.particles, 40, "unset swarm fields keep defaults");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{
            "road": { "inner_edge_radius": 64.0, "outer_edge_radius": 70.0, "lane_width": 3.0 },
            "vehicles": [],
            "horizonn": 100
        }"#;
        let err = parse_config::<f64>(text, "inline").expect_err("typo must fail");
        assert!(err.to_string().contains("inline"), "error names the source: {err}");
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_config::<f64>("/nonexistent/scenario.cfg").expect_err("must fail");
        assert!(matches!(err, ConfigError::Io { .. }), "got: {err}");
        assert!(err.to_string().contains("/nonexistent/scenario.cfg"));
    }

    #[test]
    fn waypoints_parse_with_header_and_comments() {
        let text = "x,y\n# ring segment\n0.0, 1.0\n2.5,3.5\n\n4.0,5.0\n";
        let points: Vec<Vec2<f64>> = parse_waypoints(text, "inline").expect("waypoints parse");
        assert_eq!(points.len(), 3);
        assert_abs_diff_eq!(points[0].x, 0.0);
        assert_abs_diff_eq!(points[0].y, 1.0);
        assert_abs_diff_eq!(points[2].y, 5.0);
    }

    #[test]
    fn waypoint_garbage_mid_file_is_an_error() {
        let text = "0.0,1.0\nnot,numbers\n";
        let err = parse_waypoints::<f64>(text, "inline").expect_err("must fail");
        let msg = err.to_string();
        assert!(msg.contains("inline:2"), "error carries line number: {msg}");
    }

    #[test]
    fn waypoint_wrong_arity_is_an_error() {
        let err = parse_waypoints::<f64>("1.0,2.0,3.0\n", "inline").expect_err("must fail");
        assert!(err.to_string().contains(":1:"), "got: {err}");
    }
}
