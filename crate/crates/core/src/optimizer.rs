//! Particle swarm optimizer with time-varying inertia and acceleration
//! coefficients, a violation-share penalty, and a grid-search oracle for
//! cross-checking results.
//!
//! Two modes share one code path: [`SwarmMode::Adaptive`] sweeps the
//! inertia quadratically from `w_max` to `w_min` and trades the cognitive
//! coefficient for the social one linearly over the run;
//! [`SwarmMode::Fixed`] holds the classic constants `(0.7, 2.0, 2.0)`.
//! Runs are deterministic for a given seed: every particle draws from its
//! own counter-based stream, and reductions visit particles in index
//! order.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Errors from swarm configuration.
#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("swarm needs at least one dimension of bounds")]
    EmptyBounds,
    #[error("bounds for dimension {dim} are not an interval: [{lo}, {hi}]")]
    BadBounds { dim: usize, lo: f64, hi: f64 },
    #[error("velocity bounds for dimension {dim} are not an interval around zero")]
    BadVelocityBounds { dim: usize },
    #[error("swarm needs at least one particle")]
    NoParticles,
    #[error("swarm needs at least one iteration")]
    NoIterations,
}

/// Coefficient schedule of the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwarmMode {
    /// Quadratic inertia sweep, linearly traded acceleration coefficients.
    Adaptive,
    /// Classic fixed coefficients (0.7, 2.0, 2.0).
    Fixed,
}

/// Swarm configuration.
///
/// `bounds` defines the search box per dimension; `v_min`/`v_max` clamp
/// the per-dimension velocity. [`SwarmConfig::for_bounds`] fills
/// everything else with the defaults (40 particles, 100 iterations,
/// inertia 0.9 -> 0.4, cognitive 2.5 -> 0.5, social 0.5 -> 2.5, velocity
/// clamp at 20% of each dimension's span).
///
/// [`SwarmConfig::default`] is `for_bounds` over the maneuver decision
/// box: duration 2..16 s, arc advance 5..40 m.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig<F> {
    pub mode: SwarmMode,
    pub particles: usize,
    pub iterations: usize,
    pub w_max: F,
    pub w_min: F,
    pub c1_start: F,
    pub c1_end: F,
    pub c2_start: F,
    pub c2_end: F,
    /// Per-dimension `(lo, hi)` search box.
    pub bounds: Vec<(F, F)>,
    pub v_min: Vec<F>,
    pub v_max: Vec<F>,
    pub seed: u64,
    /// Stop after this many consecutive iterations whose best-cost
    /// improvement stays below `stall_tolerance`.
    pub stall_iterations: usize,
    pub stall_tolerance: F,
}

impl<F: Real> Default for SwarmConfig<F> {
    fn default() -> Self {
        Self::for_bounds(Self::maneuver_bounds())
    }
}

impl<F: Real> SwarmConfig<F> {
    /// Default configuration over the given search box.
    pub fn for_bounds(bounds: Vec<(F, F)>) -> Self {
        let fraction = F::of(0.2);
        let v_max: Vec<F> = bounds.iter().map(|&(lo, hi)| (hi - lo) * fraction).collect();
        let v_min = v_max.iter().map(|&v| -v).collect();
        Self {
            mode: SwarmMode::Adaptive,
            particles: 40,
            iterations: 100,
            w_max: F::of(0.9),
            w_min: F::of(0.4),
            c1_start: F::of(2.5),
            c1_end: F::of(0.5),
            c2_start: F::of(0.5),
            c2_end: F::of(2.5),
            bounds,
            v_min,
            v_max,
            seed: 0,
            stall_iterations: 15,
            stall_tolerance: F::of(1e-8),
        }
    }

    pub fn dimensions(&self) -> usize {
        self.bounds.len()
    }

    /// The maneuver decision box: duration in seconds, arc advance in
    /// meters.
    pub fn maneuver_bounds() -> Vec<(F, F)> {
        vec![(F::of(2.0), F::of(16.0)), (F::of(5.0), F::of(40.0))]
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.bounds.is_empty() {
            return Err(OptimizerError::EmptyBounds);
        }
        for (dim, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(OptimizerError::BadBounds {
                    dim,
                    lo: lo.to_f64().unwrap_or(f64::NAN),
                    hi: hi.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if self.v_min.len() != self.bounds.len() || self.v_max.len() != self.bounds.len() {
            return Err(OptimizerError::BadVelocityBounds { dim: self.bounds.len() });
        }
        for dim in 0..self.bounds.len() {
            if !(self.v_min[dim] < F::zero()) || !(self.v_max[dim] > F::zero()) {
                return Err(OptimizerError::BadVelocityBounds { dim });
            }
        }
        if self.particles == 0 {
            return Err(OptimizerError::NoParticles);
        }
        if self.iterations == 0 {
            return Err(OptimizerError::NoIterations);
        }
        Ok(())
    }
}

/// Inertia and acceleration coefficients at iteration `t` of `T`.
///
/// Adaptive mode: `w(t) = w_max - (w_max - w_min) * (2t/T - (t/T)^2)`,
/// `c1` and `c2` linear between their endpoints. Fixed mode ignores `t`.
pub fn adaptive_params<F: Real>(cfg: &SwarmConfig<F>, t: usize) -> (F, F, F) {
    match cfg.mode {
        SwarmMode::Fixed => (F::of(0.7), F::of(2.0), F::of(2.0)),
        SwarmMode::Adaptive => {
            let tau = F::of_usize(t) / F::of_usize(cfg.iterations);
            let ramp = (F::of(2.0) - tau) * tau;
            let w = cfg.w_max - (cfg.w_max - cfg.w_min) * ramp;
            let c1 = cfg.c1_start + (cfg.c1_end - cfg.c1_start) * tau;
            let c2 = cfg.c2_start + (cfg.c2_end - cfg.c2_start) * tau;
            (w, c1, c2)
        }
    }
}

/// Cost and per-constraint violation magnitudes of one candidate.
#[derive(Debug, Clone)]
pub struct CandidateEval<F> {
    pub cost: F,
    /// One non-negative magnitude per constraint; empty when the problem
    /// is unconstrained.
    pub violations: Vec<F>,
}

impl<F: Real> CandidateEval<F> {
    pub fn unconstrained(cost: F) -> Self {
        Self { cost, violations: Vec::new() }
    }

    pub fn is_feasible(&self) -> bool {
        self.violations.iter().all(|v| *v <= F::zero())
    }
}

/// A problem the swarm can minimize.
pub trait SwarmProblem<F: Real>: Sync {
    /// Number of violation magnitudes [`SwarmProblem::evaluate`] reports.
    fn constraint_count(&self) -> usize {
        0
    }

    fn evaluate(&self, x: &[F]) -> CandidateEval<F>;
}

/// Adapter turning a plain `Fn(&[F]) -> F` into an unconstrained problem.
pub struct Unconstrained<G>(pub G);

impl<F: Real, G: Fn(&[F]) -> F + Sync> SwarmProblem<F> for Unconstrained<G> {
    fn evaluate(&self, x: &[F]) -> CandidateEval<F> {
        CandidateEval::unconstrained((self.0)(x))
    }
}

/// Violation share and weighted penalty per constraint over a population.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBreakdown<F> {
    /// `L_j`: constraint `j`'s share of the population's total violation.
    /// Sums to 1 when any violation is positive, all zeros otherwise.
    pub shares: Vec<F>,
    /// `phi_j = L_j * S_j` where `S_j` is the violation sum of constraint
    /// `j`.
    pub phi: Vec<F>,
}

/// Violation-share penalty over a population: each row is one candidate's
/// violation magnitudes, `m` is the constraint count.
pub fn penalty<F: Real>(rows: &[Vec<F>], m: usize) -> PenaltyBreakdown<F> {
    let mut sums = vec![F::zero(); m];
    for row in rows {
        debug_assert_eq!(row.len(), m, "every row must carry {m} magnitudes");
        for (slot, &v) in sums.iter_mut().zip(row.iter()) {
            *slot += v;
        }
    }
    let total: F = sums.iter().copied().sum();
    let shares: Vec<F> = if total > F::zero() {
        sums.iter().map(|&s| s / total).collect()
    } else {
        vec![F::zero(); m]
    };
    let phi = shares.iter().zip(sums.iter()).map(|(&l, &s)| l * s).collect();
    PenaltyBreakdown { shares, phi }
}

/// Fitness the swarm ranks candidates by: the raw cost plus the
/// candidate's own violation-share penalty (each violation weighted by its
/// share of the candidate's total violation).
pub fn penalized_fitness<F: Real>(eval: &CandidateEval<F>) -> F {
    let breakdown = penalty(std::slice::from_ref(&eval.violations), eval.violations.len());
    eval.cost + breakdown.phi.iter().copied().sum()
}

/// Result of one swarm run.
#[derive(Debug, Clone)]
pub struct SwarmRun<F> {
    /// Best position found.
    pub best: Vec<F>,
    /// Penalized fitness of `best`.
    pub best_cost: F,
    /// Cost and violations of `best` as the problem reported them.
    pub best_eval: CandidateEval<F>,
    /// Best penalized fitness after initialization (index 0) and after
    /// each iteration. Non-increasing.
    pub history: Vec<F>,
    /// Iterations actually run (at most `cfg.iterations`, fewer on stall).
    pub iterations: usize,
    pub wall: Duration,
}

struct Particle<F> {
    x: Vec<F>,
    v: Vec<F>,
    best_x: Vec<F>,
    best_fitness: F,
    best_eval: CandidateEval<F>,
    rng: ChaCha8Rng,
}

/// Runs the swarm on `problem`.
///
/// Cost evaluations run in parallel; the result is still deterministic
/// for a fixed seed because every particle owns an independent RNG stream
/// and best-candidate reductions scan particles in index order, keeping
/// the earliest on ties.
pub fn optimize<F: Real, P: SwarmProblem<F>>(
    problem: &P,
    cfg: &SwarmConfig<F>,
) -> Result<SwarmRun<F>, OptimizerError> {
    cfg.validate()?;
    let start = Instant::now();
    let dims = cfg.dimensions();

    let mut particles: Vec<Particle<F>> = (0..cfg.particles)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let x: Vec<F> =
                cfg.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            Particle {
                x: x.clone(),
                v: vec![F::zero(); dims],
                best_x: x,
                best_fitness: F::infinity(),
                best_eval: CandidateEval::unconstrained(F::infinity()),
                rng,
            }
        })
        .collect();

    particles.par_iter_mut().for_each(|p| {
        let eval = problem.evaluate(&p.x);
        p.best_fitness = penalized_fitness(&eval);
        p.best_eval = eval;
    });

    let mut g_best_idx = best_index(&particles);
    let mut g_best_x = particles[g_best_idx].best_x.clone();
    let mut g_best_fitness = particles[g_best_idx].best_fitness;
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    history.push(g_best_fitness);

    let mut stall = 0usize;
    let mut iterations = 0usize;
    for t in 0..cfg.iterations {
        let (w, c1, c2) = adaptive_params(cfg, t);
        particles.par_iter_mut().for_each(|p| {
            for k in 0..dims {
                let r1: F = p.rng.random_range(F::zero()..F::one());
                let r2: F = p.rng.random_range(F::zero()..F::one());
                let mut v = w * p.v[k]
                    + c1 * r1 * (p.best_x[k] - p.x[k])
                    + c2 * r2 * (g_best_x[k] - p.x[k]);
                v = v.max(cfg.v_min[k]).min(cfg.v_max[k]);
                let mut x = p.x[k] + v;
                let (lo, hi) = cfg.bounds[k];
                // A clamped position also zeroes that velocity component,
                // so particles do not pile up pressure against the wall.
                if x < lo {
                    x = lo;
                    v = F::zero();
                } else if x > hi {
                    x = hi;
                    v = F::zero();
                }
                p.x[k] = x;
                p.v[k] = v;
            }
            let eval = problem.evaluate(&p.x);
            let fitness = penalized_fitness(&eval);
            if fitness < p.best_fitness {
                p.best_fitness = fitness;
                p.best_x.copy_from_slice(&p.x);
                p.best_eval = eval;
            }
        });
        iterations = t + 1;

        g_best_idx = best_index(&particles);
        let improvement = g_best_fitness - particles[g_best_idx].best_fitness;
        if particles[g_best_idx].best_fitness < g_best_fitness {
            g_best_fitness = particles[g_best_idx].best_fitness;
            g_best_x.copy_from_slice(&particles[g_best_idx].best_x);
        }
        history.push(g_best_fitness);

        if improvement < cfg.stall_tolerance {
            stall += 1;
            if stall >= cfg.stall_iterations {
                break;
            }
        } else {
            stall = 0;
        }
    }

    let best_eval = particles[g_best_idx].best_eval.clone();
    Ok(SwarmRun {
        best: g_best_x,
        best_cost: g_best_fitness,
        best_eval,
        history,
        iterations,
        wall: start.elapsed(),
    })
}

/// Index of the best personal best, scanning in order so ties keep the
/// earliest particle.
fn best_index<F: Real>(particles: &[Particle<F>]) -> usize {
    let mut best = 0usize;
    for (i, p) in particles.iter().enumerate().skip(1) {
        if p.best_fitness < particles[best].best_fitness {
            best = i;
        }
    }
    best
}

/// First history index at or below `target`, if the run ever got there.
pub fn iterations_to<F: Real>(history: &[F], target: F) -> Option<usize> {
    history.iter().position(|&h| h <= target)
}

/// Exhaustive grid minimum of the penalized fitness: `steps` points per
/// dimension, bounds inclusive, ties keeping the first point in row-major
/// order. The oracle the swarm is checked against.
pub fn grid_search<F: Real, P: SwarmProblem<F>>(
    problem: &P,
    bounds: &[(F, F)],
    steps: usize,
) -> (Vec<F>, F) {
    assert!(steps >= 2, "grid needs at least 2 steps per dimension");
    assert!(!bounds.is_empty(), "grid needs at least one dimension");
    let dims = bounds.len();
    let mut index = vec![0usize; dims];
    let mut best_x: Option<Vec<F>> = None;
    let mut best_fitness = F::infinity();
    let mut point = vec![F::zero(); dims];
    loop {
        for k in 0..dims {
            let (lo, hi) = bounds[k];
            let frac = F::of_usize(index[k]) / F::of_usize(steps - 1);
            point[k] = lo + (hi - lo) * frac;
        }
        let fitness = penalized_fitness(&problem.evaluate(&point));
        if fitness < best_fitness {
            best_fitness = fitness;
            best_x = Some(point.clone());
        }
        // Odometer increment, first dimension slowest (row-major).
        let mut k = dims;
        loop {
            if k == 0 {
                return (best_x.expect("grid visited at least one point"), best_fitness);
            }
            k -= 1;
            index[k] += 1;
            if index[k] < steps {
                break;
            }
            index[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sphere_cfg(dims: usize, seed: u64) -> SwarmConfig<f64> {
        SwarmConfig { seed, ..SwarmConfig::for_bounds(vec![(-5.0, 5.0); dims]) }
    }

    fn sphere() -> Unconstrained<impl Fn(&[f64]) -> f64 + Sync> {
        Unconstrained(|x: &[f64]| x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let cfg = sphere_cfg(2, 0);
        let (w0, c1_0, c2_0) = adaptive_params(&cfg, 0);
        assert_abs_diff_eq!(w0, 0.9);
        assert_abs_diff_eq!(c1_0, 2.5);
        assert_abs_diff_eq!(c2_0, 0.5);
        let (w_end, c1_end, c2_end) = adaptive_params(&cfg, cfg.iterations);
        assert_abs_diff_eq!(w_end, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(c1_end, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c2_end, 2.5, epsilon = 1e-15);
        // Quadratic ramp: three quarters of the sweep done at T/2.
        let (w_mid, _, _) = adaptive_params(&cfg, cfg.iterations / 2);
        assert_abs_diff_eq!(w_mid, 0.9 - 0.75 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fixed_mode_ignores_time() {
        let cfg = SwarmConfig { mode: SwarmMode::Fixed, ..sphere_cfg(2, 0) };
        for t in [0, 13, 50, 100] {
            assert_eq!(adaptive_params(&cfg, t), (0.7, 2.0, 2.0));
        }
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let mut cfg = sphere_cfg(2, 0);
        cfg.bounds.clear();
        assert!(matches!(cfg.validate(), Err(OptimizerError::EmptyBounds)));

        let mut cfg = sphere_cfg(2, 0);
        cfg.bounds[1] = (3.0, 3.0);
        assert!(matches!(cfg.validate(), Err(OptimizerError::BadBounds { dim: 1, .. })));

        let mut cfg = sphere_cfg(2, 0);
        cfg.v_max[0] = 0.0;
        assert!(matches!(cfg.validate(), Err(OptimizerError::BadVelocityBounds { dim: 0 })));

        let mut cfg = sphere_cfg(2, 0);
        cfg.particles = 0;
        assert!(matches!(cfg.validate(), Err(OptimizerError::NoParticles)));

        let mut cfg = sphere_cfg(2, 0);
        cfg.iterations = 0;
        assert!(matches!(cfg.validate(), Err(OptimizerError::NoIterations)));
    }

    #[test]
    fn penalty_shares_sum_to_one_or_zero() {
        let rows = vec![vec![1.0, 0.0, 3.0], vec![0.5, 0.0, 0.5]];
        let breakdown = penalty(&rows, 3);
        let sum: f64 = breakdown.shares.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(breakdown.shares[0], 1.5 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(breakdown.phi[2], (3.5 / 5.0) * 3.5, epsilon = 1e-12);

        let clean = penalty::<f64>(&vec![vec![0.0, 0.0]; 4], 2);
        assert_eq!(clean.shares, vec![0.0, 0.0]);
        assert_eq!(clean.phi, vec![0.0, 0.0]);
    }

    #[test]
    fn penalized_fitness_feasible_is_raw_cost() {
        let eval = CandidateEval { cost: 1.25, violations: vec![0.0, 0.0, 0.0, 0.0] };
        assert_abs_diff_eq!(penalized_fitness(&eval), 1.25);
        // One dominating violation gets its full magnitude back.
        let eval = CandidateEval { cost: 1.0, violations: vec![2.0, 0.0] };
        assert_abs_diff_eq!(penalized_fitness(&eval), 1.0 + 2.0, epsilon = 1e-12);
        // Two equal violations split the shares: 1 + 0.5*2 + 0.5*2.
        let eval = CandidateEval { cost: 1.0, violations: vec![2.0, 2.0] };
        assert_abs_diff_eq!(penalized_fitness(&eval), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_converges_and_history_is_monotone() {
        let run = optimize(&sphere(), &sphere_cfg(4, 7)).expect("valid config");
        assert!(
            run.best_cost < 1e-4,
            "4-D sphere should reach 1e-4, got {:.3e}",
            run.best_cost
        );
        for pair in run.history.windows(2) {
            assert!(pair[1] <= pair[0], "history must never increase");
        }
        assert_eq!(run.history.len(), run.iterations + 1);
        for (k, &x) in run.best.iter().enumerate() {
            assert!((-5.0..=5.0).contains(&x), "dimension {k} escaped the box: {x}");
        }
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = sphere_cfg(3, 123);
        let a = optimize(&sphere(), &cfg).expect("valid config");
        let b = optimize(&sphere(), &cfg).expect("valid config");
        assert_eq!(a.history, b.history, "same seed must reproduce the exact history");
        assert_eq!(a.best, b.best);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn different_seeds_differ() {
        let a = optimize(&sphere(), &sphere_cfg(3, 1)).expect("valid config");
        let b = optimize(&sphere(), &sphere_cfg(3, 2)).expect("valid config");
        assert_ne!(a.history, b.history, "different seeds should explore differently");
    }

    #[test]
    fn stall_cuts_the_run_short() {
        // A constant cost stalls immediately: 15 flat iterations then stop.
        let flat = Unconstrained(|_: &[f64]| 1.0);
        let run = optimize(&flat, &sphere_cfg(2, 5)).expect("valid config");
        assert_eq!(run.iterations, 15, "flat cost should stop at the stall window");
    }

    #[test]
    fn constrained_best_prefers_feasible_region() {
        // Cost pulls toward x = -5, the constraint x >= 1 pushes back;
        // with the violation penalized the swarm settles at x = 1.
        struct Pull;
        impl SwarmProblem<f64> for Pull {
            fn constraint_count(&self) -> usize {
                1
            }
            fn evaluate(&self, x: &[f64]) -> CandidateEval<f64> {
                CandidateEval { cost: x[0] + 5.0, violations: vec![(1.0 - x[0]).max(0.0) * 10.0] }
            }
        }
        let cfg = SwarmConfig { seed: 3, ..SwarmConfig::for_bounds(vec![(-5.0, 5.0)]) };
        let run = optimize(&Pull, &cfg).expect("valid config");
        assert!(
            (run.best[0] - 1.0).abs() < 1e-2,
            "penalty should hold the best near the boundary, got {}",
            run.best[0]
        );
        assert!(run.best_eval.is_feasible() || run.best_eval.violations[0] < 1e-2);
    }

    #[test]
    fn grid_search_finds_sphere_minimum() {
        // 21 steps over [-5, 5] puts a grid point exactly on 0.
        let (x, cost) = grid_search(&sphere(), &[(-5.0, 5.0), (-5.0, 5.0)], 21);
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cost, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_search_tie_keeps_first_row_major() {
        // Constant cost: every point ties, the first (lo, lo) wins.
        let flat = Unconstrained(|_: &[f64]| 2.0);
        let (x, _) = grid_search(&flat, &[(1.0, 3.0), (10.0, 30.0)], 3);
        assert_eq!(x, vec![1.0, 10.0]);
    }

    #[test]
    fn iterations_to_scans_history() {
        let history = vec![10.0, 5.0, 1.0, 0.5, 0.5];
        assert_eq!(iterations_to(&history, 1.0), Some(2));
        assert_eq!(iterations_to(&history, 0.1), None);
        assert_eq!(iterations_to(&history, 20.0), Some(0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn history_monotone_and_in_bounds(seed in 0u64..1000) {
            let cfg = SwarmConfig { iterations: 30, ..sphere_cfg(3, seed) };
            let run = optimize(&sphere(), &cfg).expect("valid config");
            for pair in run.history.windows(2) {
                prop_assert!(pair[1] <= pair[0]);
            }
            for &x in &run.best {
                prop_assert!((-5.0..=5.0).contains(&x));
            }
        }

        #[test]
        fn penalty_shares_partition(rows in proptest::collection::vec(
            proptest::collection::vec(0.0f64..10.0, 4), 1..20)
        ) {
            let breakdown = penalty(&rows, 4);
            let total: f64 = rows.iter().flatten().sum();
            let share_sum: f64 = breakdown.shares.iter().sum();
            if total > 0.0 {
                prop_assert!((share_sum - 1.0).abs() < 1e-12, "shares sum to {share_sum}");
            } else {
                prop_assert_eq!(share_sum, 0.0);
            }
            for &l in &breakdown.shares {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&l));
            }
        }
    }
}
