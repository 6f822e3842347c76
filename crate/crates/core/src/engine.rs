//! Deterministic, seedable noise generation and Euler–Maruyama integration,
//! plus a parallel ensemble runner whose results are independent of the
//! worker schedule.
//!
//! Two noise species appear in the measurement model: white bath noise with
//! variance density ε (⟨ξ(t)ξ(t′)⟩ = ε δ(t−t′)) and quenched Gaussian vectors
//! drawn once per trial from a prescribed covariance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::{CoreError, Result};

/// Negative-eigenvalue slack accepted (and clipped) in PSD covariances.
pub const PSD_TOL: f64 = 1e-10;

/// splitmix64 finalizer; the basis of the counter-based seed derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trajectory seed derived from a master seed and a trajectory index.
/// Deterministic and schedule-independent.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Seed for nested index spaces, e.g. (k-index, trajectory-index).
pub fn derive_seed2(master_seed: u64, outer: u64, inner: u64) -> u64 {
    derive_seed(derive_seed(master_seed, outer), inner)
}

/// The crate-wide RNG, seeded per trajectory.
pub fn rng_for_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Noise specification: white variance density plus an optional static
/// (quenched) covariance for per-trial vectors.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    /// Variance density of the white bath noise: ⟨ξ(t)ξ(t′)⟩ = ε δ(t−t′).
    pub white_amplitude: f64,
    /// Covariance of a zero-mean Gaussian vector drawn once per trajectory
    /// and added to the drift as a constant bias.
    pub static_covariance: Option<DMatrix<f64>>,
}

impl NoiseSpec {
    pub fn white(epsilon: f64) -> Self {
        Self {
            white_amplitude: epsilon,
            static_covariance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.white_amplitude >= 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "white amplitude must be >= 0, got {}",
                self.white_amplitude
            )));
        }
        if let Some(cov) = &self.static_covariance {
            pivoted_cholesky(cov)?;
        }
        Ok(())
    }
}

/// Pivoted Cholesky factor L (n×r, original row order) of a symmetric PSD
/// matrix, so that A = L Lᵀ up to rank truncation at [`PSD_TOL`].
///
/// Rank-deficient inputs are handled exactly: for the 6×6 singlet covariance
/// [[I, −I], [−I, I]] the factor reproduces ξ₂ = −ξ₁ bit-exactly.
pub fn pivoted_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::Dimension {
            expected: n,
            got: a.ncols(),
            context: "covariance must be square".into(),
        });
    }
    let sym = (a - a.transpose()).amax();
    let scale = a.amax().max(1.0);
    if sym > 1e-10 * scale {
        return Err(CoreError::Covariance(format!(
            "matrix not symmetric, asymmetry {sym}"
        )));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    while !active.is_empty() {
        // largest remaining diagonal pivots next
        let (pos, &piv) = active
            .iter()
            .enumerate()
            .max_by(|x, y| d[*x.1].total_cmp(&d[*y.1]))
            .unwrap();
        if d[piv] <= PSD_TOL * scale {
            // remaining diagonal must be nonnegative up to tolerance
            if let Some(&bad) = active.iter().find(|&&i| d[i] < -PSD_TOL * scale) {
                return Err(CoreError::Covariance(format!(
                    "negative residual diagonal {} at index {bad}",
                    d[bad]
                )));
            }
            break;
        }
        active.swap_remove(pos);
        let root = d[piv].sqrt();
        l[(piv, rank)] = root;
        for &i in &active {
            let mut s = a[(i, piv)];
            for j in 0..rank {
                s -= l[(i, j)] * l[(piv, j)];
            }
            let v = s / root;
            l[(i, rank)] = v;
            d[i] -= v * v;
        }
        rank += 1;
    }
    Ok(l.columns(0, rank).into_owned())
}

/// Zero-mean Gaussian vector with the given covariance; deterministic for a
/// fixed seed.
pub fn sample_static_noise(cov: &DMatrix<f64>, seed: u64) -> Result<DVector<f64>> {
    let l = pivoted_cholesky(cov)?;
    let mut rng = rng_for_seed(seed);
    Ok(sample_with_factor(&l, &mut rng))
}

/// Draws x = L z with z standard normal, reusing a precomputed factor.
pub fn sample_with_factor(l: &DMatrix<f64>, rng: &mut impl Rng) -> DVector<f64> {
    let z = DVector::from_fn(l.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    l * z
}

/// An SDE with local drift and additive noise on a uniform time grid.
pub struct SdeProblem<F>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    pub state_dimension: usize,
    /// Writes the drift at (state, t) into the output slice.
    pub drift: F,
    pub noise: NoiseSpec,
    pub initial_state: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Abort when any |state component| exceeds this bound.
    pub divergence_limit: f64,
}

impl<F> SdeProblem<F>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidInput(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > self.t_start) {
            return Err(CoreError::InvalidInput("t_end must exceed t_start".into()));
        }
        if self.initial_state.len() != self.state_dimension {
            return Err(CoreError::Dimension {
                expected: self.state_dimension,
                got: self.initial_state.len(),
                context: "initial state".into(),
            });
        }
        self.noise.validate()
    }
}

/// One Euler–Maruyama trajectory with seed provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Reduced ensemble statistics with Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_trajectories: usize,
    pub final_states: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    /// Per-component mean of the final state.
    pub mean_final: Vec<f64>,
    /// Per-component sample variance of the final state.
    pub var_final: Vec<f64>,
    /// Per-component standard error: sample-std / sqrt(n).
    pub stderr_final: Vec<f64>,
}

/// Euler–Maruyama integration:
/// state_{n+1} = state_n + drift·dt + √(ε·dt)·η_n, bit-reproducible for a
/// fixed (seed, dt).
pub fn integrate_sde<F>(problem: &SdeProblem<F>, seed: u64) -> Result<Trajectory>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    problem.validate()?;
    let mut rng = rng_for_seed(seed);
    let dim = problem.state_dimension;
    let quenched: Option<DVector<f64>> = match &problem.noise.static_covariance {
        Some(cov) => {
            let v = sample_static_noise(cov, splitmix64(seed))?;
            if v.len() != dim {
                return Err(CoreError::Dimension {
                    expected: dim,
                    got: v.len(),
                    context: "static covariance".into(),
                });
            }
            Some(v)
        }
        None => None,
    };
    let n_steps = ((problem.t_end - problem.t_start) / problem.dt).round() as usize;
    let sigma = (problem.noise.white_amplitude * problem.dt).sqrt();
    let mut state = problem.initial_state.clone();
    let mut drift = vec![0.0; dim];
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(problem.t_start);
    states.push(state.clone());
    for step in 0..n_steps {
        let t = problem.t_start + step as f64 * problem.dt;
        (problem.drift)(&state, t, &mut drift);
        for i in 0..dim {
            let mut dx = drift[i] * problem.dt;
            if let Some(q) = &quenched {
                dx += q[i] * problem.dt;
            }
            if sigma > 0.0 {
                dx += sigma * rng.sample::<f64, _>(StandardNormal);
            }
            state[i] += dx;
            if !state[i].is_finite() || state[i].abs() > problem.divergence_limit {
                return Err(CoreError::Divergence {
                    time: t + problem.dt,
                    trajectory: None,
                });
            }
        }
        // uniform grid, recomputed from t_start to avoid accumulation drift
        times.push(problem.t_start + (step + 1) as f64 * problem.dt);
        states.push(state.clone());
    }
    Ok(Trajectory { times, states, seed })
}

/// Runs n trajectories in parallel with per-trajectory seeds
/// hash(master_seed, index); the reduction is accumulated in index order so
/// the result does not depend on the worker schedule.
pub fn run_ensemble<F>(problem: &SdeProblem<F>, n: usize, master_seed: u64) -> Result<EnsembleResult>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    if n < 1 {
        return Err(CoreError::InvalidInput("ensemble size must be >= 1".into()));
    }
    problem.validate()?;
    let results: Vec<Result<Trajectory>> = (0..n)
        .into_par_iter()
        .map(|i| integrate_sde(problem, derive_seed(master_seed, i as u64)))
        .collect();
    let mut final_states = Vec::with_capacity(n);
    let mut seeds = Vec::with_capacity(n);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(traj) => {
                seeds.push(traj.seed);
                final_states.push(traj.final_state().to_vec());
            }
            Err(CoreError::Divergence { time, .. }) => {
                return Err(CoreError::Divergence {
                    time,
                    trajectory: Some(i),
                })
            }
            Err(e) => return Err(e),
        }
    }
    let dim = problem.state_dimension;
    let mut mean = vec![0.0; dim];
    for s in &final_states {
        for i in 0..dim {
            mean[i] += s[i];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; dim];
    if n > 1 {
        for s in &final_states {
            for i in 0..dim {
                let d = s[i] - mean[i];
                var[i] += d * d;
            }
        }
        for v in &mut var {
            *v /= (n - 1) as f64;
        }
    }
    let stderr = var.iter().map(|v| (v / n as f64).sqrt()).collect();
    Ok(EnsembleResult {
        n_trajectories: n,
        final_states,
        seeds,
        mean_final: mean,
        var_final: var,
        stderr_final: stderr,
    })
}

/// Deterministic parallel map over trial indices: trial i runs with seed
/// hash(master_seed, i) and results come back in index order.
pub fn parallel_trials<T, G>(n: usize, master_seed: u64, trial: G) -> Vec<T>
where
    T: Send,
    G: Fn(usize, u64) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| trial(i, derive_seed(master_seed, i as u64)))
        .collect()
}

/// Mean and standard error of a sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn simple_problem<F>(drift: F, eps: f64, x0: f64, t_end: f64, dt: f64) -> SdeProblem<F>
    where
        F: Fn(&[f64], f64, &mut [f64]) + Sync,
    {
        SdeProblem {
            state_dimension: 1,
            drift,
            noise: NoiseSpec::white(eps),
            initial_state: vec![x0],
            t_start: 0.0,
            t_end,
            dt,
            divergence_limit: 1e6,
        }
    }

    #[test]
    fn zero_dynamics_constant_trajectory() {
        let p = simple_problem(|_, _, out| out[0] = 0.0, 0.0, 1.0, 1.0, 0.01);
        let traj = integrate_sde(&p, 7).unwrap();
        assert!(traj.states.iter().all(|s| s[0] == 1.0));
        assert_eq!(traj.times.len(), 101);
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let dt = 1e-4;
        let p = simple_problem(|x, _, out| out[0] = -x[0], 0.0, 1.0, 1.0, dt);
        let traj = integrate_sde(&p, 0).unwrap();
        let expected = (-1.0f64).exp();
        assert!((traj.final_state()[0] - expected).abs() < 10.0 * dt);
    }

    #[test]
    fn brownian_variance_law() {
        let p = simple_problem(|_, _, out| out[0] = 0.0, 2.0, 0.0, 1.0, 0.01);
        let res = run_ensemble(&p, 10_000, 123).unwrap();
        // Var = eps * t = 2 within 5%
        assert!((res.var_final[0] - 2.0).abs() < 0.1, "var = {}", res.var_final[0]);
        // zero-drift symmetry: mean 0 within 3 stderr
        assert!(res.mean_final[0].abs() < 3.0 * res.stderr_final[0]);
    }

    #[test]
    fn ensemble_determinism_bit_identical() {
        let p = simple_problem(|x, _, out| out[0] = x[0] - x[0].powi(3), 0.5, 0.0, 2.0, 0.01);
        let a = run_ensemble(&p, 64, 42).unwrap();
        let b = run_ensemble(&p, 64, 42).unwrap();
        assert_eq!(a, b);
        // singleton ensemble equals direct integration with the derived seed
        let single = run_ensemble(&p, 1, 42).unwrap();
        let direct = integrate_sde(&p, derive_seed(42, 0)).unwrap();
        assert_eq!(single.final_states[0], direct.final_state().to_vec());
    }

    #[test]
    fn determinism_independent_of_worker_count() {
        let p = simple_problem(|x, _, out| out[0] = -x[0], 1.0, 0.0, 1.0, 0.01);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_ensemble(&p, 128, 9).unwrap());
        let b = pool4.install(|| run_ensemble(&p, 128, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn per_step_noise_variance_scaling() {
        // single-step statistics over 1e6 steps: variance eps*dt within 1%
        let eps = 0.7;
        let dt = 0.01;
        let p = simple_problem(|_, _, out| out[0] = 0.0, eps, 0.0, 1e4 * dt, dt);
        let traj = integrate_sde(&p, 3).unwrap();
        let mut increments = Vec::with_capacity(traj.states.len() - 1);
        for w in traj.states.windows(2) {
            increments.push(w[1][0] - w[0][0]);
        }
        // accumulate more steps from further seeds
        for seed in 4..103u64 {
            let t = integrate_sde(&p, seed).unwrap();
            for w in t.states.windows(2) {
                increments.push(w[1][0] - w[0][0]);
            }
        }
        assert!(increments.len() >= 1_000_000);
        let mean = increments.iter().sum::<f64>() / increments.len() as f64;
        let var = increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (increments.len() - 1) as f64;
        assert!((var / (eps * dt) - 1.0).abs() < 0.01, "var ratio {}", var / (eps * dt));
    }

    #[test]
    fn dt_refinement_first_order() {
        let run = |dt: f64| {
            let p = simple_problem(|x, _, out| out[0] = x[0] - x[0].powi(3), 0.0, 0.3, 2.0, dt);
            integrate_sde(&p, 0).unwrap().final_state()[0]
        };
        let exact = run(1e-6);
        let coarse = (run(0.02) - exact).abs();
        let fine = (run(0.01) - exact).abs();
        // halving dt roughly halves the error
        assert!(fine < 0.75 * coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn divergence_reported_with_time() {
        let p = simple_problem(|x, _, out| out[0] = x[0] * x[0] * x[0], 0.0, 2.0, 10.0, 0.1);
        match integrate_sde(&p, 0) {
            Err(CoreError::Divergence { time, .. }) => assert!(time > 0.0 && time < 10.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn static_noise_zero_covariance() {
        let cov = DMatrix::zeros(3, 3);
        let v = sample_static_noise(&cov, 1).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn static_noise_identity_covariance_lln() {
        let cov = DMatrix::<f64>::identity(3, 3);
        let n = 100_000;
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        for i in 0..n {
            let v = sample_static_noise(&cov, derive_seed(55, i)).unwrap();
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        let tol = 3.0 / (n as f64).sqrt() * 2.0; // fourth-moment slack on diagonal
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc[(i, j)] - expect).abs() < tol, "entry ({i},{j}) = {}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn singlet_covariance_exact_negation() {
        // 6x6 block [[I, -I], [-I, I]]
        let mut cov = DMatrix::<f64>::zeros(6, 6);
        for i in 0..3 {
            cov[(i, i)] = 1.0;
            cov[(i + 3, i + 3)] = 1.0;
            cov[(i, i + 3)] = -1.0;
            cov[(i + 3, i)] = -1.0;
        }
        for seed in 0..200u64 {
            let v = sample_static_noise(&cov, seed).unwrap();
            for i in 0..3 {
                assert_eq!(v[i + 3], -v[i], "negation must be exact");
            }
        }
        // each component is standard normal: check variance loosely
        let n = 20_000;
        let mut var = 0.0;
        for seed in 0..n {
            let v = sample_static_noise(&cov, derive_seed(9, seed)).unwrap();
            var += v[0] * v[0];
        }
        var /= n as f64;
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let mut cov = DMatrix::<f64>::identity(2, 2);
        cov[(0, 1)] = 2.0;
        cov[(1, 0)] = 2.0;
        assert!(matches!(
            sample_static_noise(&cov, 0),
            Err(CoreError::Covariance(_))
        ));
    }

    #[test]
    fn cholesky_reconstructs_psd_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.5, 2.0, 3.0, 1.0, 0.5, 1.0, 2.0]);
        let l = pivoted_cholesky(&a).unwrap();
        let rec = &l * l.transpose();
        assert_abs_diff_eq!((rec - a).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn derived_seeds_distinct() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u64 {
            assert!(seen.insert(derive_seed(0xDEAD_BEEF, i)));
        }
    }
}
