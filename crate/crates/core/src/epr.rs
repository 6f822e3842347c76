//! Two spatially separated apparatuses measuring an entangled pair:
//! quantum-correlated quenched noise, joint outcome statistics, the
//! correlation function C(B₁,B₂) and the CHSH combination, cross-checked by
//! a deterministic quadrature oracle.
//!
//! Each trial draws the pair (ξ₁, ξ₂) once from the 6×6 covariance built
//! from the shared state (off-diagonal block Tr(ρ Sᵢ⁽¹⁾Sⱼ⁽²⁾)), then
//! integrates both meters with biases ξᵢ·Bᵢ plus independent white bath
//! noise. For the singlet the draw satisfies ξ₂ = −ξ₁ exactly.

use nalgebra::{DMatrix, Matrix4, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erf;

use crate::engine::{self, mean_stderr, pivoted_cholesky};
use crate::measurement::{drift_phi, fixed_points, ApparatusParams, DecisionTracker, Readout};
use crate::quantum::{
    expectation, make_singlet, on_first, on_second, spin_along, spin_components,
    spin_correlation_matrix, spin_lowering, spin_raising, DensityMatrix,
};
use crate::{CoreError, Result};

type M4 = Matrix4<Complex64>;

/// Configuration of one EPR run: two apparatuses (fields carried inside),
/// the shared dim-4 initial state, and integration controls.
#[derive(Debug, Clone)]
pub struct EprConfig {
    pub apparatus1: ApparatusParams,
    pub apparatus2: ApparatusParams,
    pub shared_rho0: DensityMatrix,
    /// When set, |B₁|·|B₂| = γ is enforced at validation (within 1e−10).
    pub enforce_field_constraint: bool,
    /// Exploration switch: refresh the quenched-noise covariance from the
    /// evolving ρ(t) instead of freezing it at t = 0.
    pub update_covariance: bool,
    pub t_end: f64,
    pub dt: f64,
}

impl EprConfig {
    /// Singlet pair with fields of magnitude √γ along the given azimuthal
    /// angles in the x–z plane; satisfies the |B₁||B₂| = γ constraint.
    pub fn singlet_with_angles(base: &ApparatusParams, angle1: f64, angle2: f64) -> Self {
        let b = base.gamma.sqrt();
        let field = |a: f64| [b * a.sin(), 0.0, b * a.cos()];
        let mut a1 = base.clone();
        a1.b_field = field(angle1);
        let mut a2 = base.clone();
        a2.b_field = field(angle2);
        Self {
            apparatus1: a1,
            apparatus2: a2,
            shared_rho0: make_singlet(),
            enforce_field_constraint: true,
            update_covariance: false,
            t_end: 6.0 / base.gamma.max(0.5),
            dt: 0.005,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.apparatus1.validate()?;
        self.apparatus2.validate()?;
        if self.shared_rho0.dim() != 4 {
            return Err(CoreError::Dimension {
                expected: 4,
                got: self.shared_rho0.dim(),
                context: "EPR shared state".into(),
            });
        }
        if self.enforce_field_constraint {
            let prod = self.apparatus1.b_norm() * self.apparatus2.b_norm();
            if (prod - self.apparatus1.gamma).abs() > 1e-10 {
                return Err(CoreError::InvalidInput(format!(
                    "field-strength constraint |B1||B2| = gamma violated: {prod} vs {}",
                    self.apparatus1.gamma
                )));
            }
        }
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(CoreError::InvalidInput("need dt > 0 and t_end > 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one EPR trial with the quenched noise vectors that drove it.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub readout1: Readout,
    pub readout2: Readout,
    pub xi1: [f64; 3],
    pub xi2: [f64; 3],
    pub seed: u64,
}

/// Correlation estimate over decided trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub c: f64,
    pub stderr: f64,
    pub n_decided: usize,
    pub n_undecided: usize,
    /// Set when the undecided fraction exceeds 10%.
    pub quality_warning: bool,
}

/// The four correlation estimates and the combined CHSH statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ChshResult {
    pub correlations: [CorrelationEstimate; 4],
    pub statistic: f64,
    pub stderr: f64,
    /// Violation verdict at 3σ: statistic − 3·stderr > 2.
    pub violation_3sigma: bool,
}

/// 6×6 covariance of (ξ₁, ξ₂): symmetrized self blocks
/// Tr(ρ (SᵢSⱼ+SⱼSᵢ)/2 ⊗ I) (= I₃ for spin 1/2) and cross block
/// Tr(ρ Sᵢ⁽¹⁾Sⱼ⁽²⁾).
pub fn epr_noise_covariance(rho: &DensityMatrix) -> Result<DMatrix<f64>> {
    let cross = spin_correlation_matrix(rho)?;
    let s = spin_components();
    let mut cov = DMatrix::<f64>::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            let sym = (&s[i] * &s[j] + &s[j] * &s[i]) * Complex64::new(0.5, 0.0);
            cov[(i, j)] = expectation(rho, &on_first(&sym));
            cov[(i + 3, j + 3)] = expectation(rho, &on_second(&sym));
            cov[(i, j + 3)] = cross[(i, j)];
            cov[(j + 3, i)] = cross[(i, j)];
        }
    }
    Ok(cov)
}

/// Draws the quenched pair (ξ₁, ξ₂) from the state's 6×6 covariance.
pub fn sample_epr_noise(rho: &DensityMatrix, seed: u64) -> Result<([f64; 3], [f64; 3])> {
    let cov = epr_noise_covariance(rho)?;
    let v = engine::sample_static_noise(&cov, seed).map_err(|e| match e {
        CoreError::Covariance(msg) => {
            CoreError::Covariance(format!("state-derived covariance: {msg}"))
        }
        other => other,
    })?;
    Ok(([v[0], v[1], v[2]], [v[3], v[4], v[5]]))
}

fn to_m4(rho: &DensityMatrix) -> M4 {
    let m = rho.matrix();
    M4::from_fn(|i, j| m[(i, j)])
}

fn from_m4(m: &M4) -> DensityMatrix {
    DensityMatrix::new_unchecked(DMatrix::from_fn(4, 4, |i, j| m[(i, j)]))
}

/// Static operators for the pair master equation.
struct PairOps {
    s3: [M4; 2],
    s_minus: [M4; 2],
    s_plus: [M4; 2],
    sdotb_hat: [M4; 2],
}

impl PairOps {
    fn new(c: &EprConfig) -> Self {
        let emb = |op: &DMatrix<Complex64>, side: usize| -> M4 {
            let full = if side == 0 { on_first(op) } else { on_second(op) };
            M4::from_fn(|i, j| full[(i, j)])
        };
        let s3 = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1., 0.),
                Complex64::new(0., 0.),
                Complex64::new(0., 0.),
                Complex64::new(-1., 0.),
            ],
        );
        let aps = [&c.apparatus1, &c.apparatus2];
        PairOps {
            s3: [emb(&s3, 0), emb(&s3, 1)],
            s_minus: [emb(&spin_lowering(), 0), emb(&spin_lowering(), 1)],
            s_plus: [emb(&spin_raising(), 0), emb(&spin_raising(), 1)],
            sdotb_hat: [
                emb(&spin_along(&aps[0].b_hat()), 0),
                emb(&spin_along(&aps[1].b_hat()), 1),
            ],
        }
    }
}

fn dissipator(l: &M4, l_dag: &M4, rho: &M4) -> M4 {
    let ldl = l_dag * l;
    l * rho * l_dag * Complex64::new(2.0, 0.0) - ldl * rho - rho * ldl
}

fn pair_rhs(rho: &M4, ops: &PairOps, phis: [f64; 2], aps: [&ApparatusParams; 2]) -> M4 {
    let mut out = M4::zeros();
    for i in 0..2 {
        let p = aps[i];
        let a = p.rate_a(phis[i]);
        if p.omega != 0.0 {
            let comm = ops.s3[i] * rho - rho * ops.s3[i];
            out += comm * Complex64::new(0.0, -p.omega);
        }
        if a > 0.0 {
            out += dissipator(&ops.s_minus[i], &ops.s_plus[i], rho) * Complex64::new(a, 0.0);
        }
        if p.b0 > 0.0 {
            out += dissipator(&ops.s_plus[i], &ops.s_minus[i], rho) * Complex64::new(p.b0, 0.0);
        }
        if p.c0 > 0.0 {
            out += dissipator(&ops.s3[i], &ops.s3[i], rho) * Complex64::new(p.c0, 0.0);
        }
    }
    out
}

/// One EPR trial: quenched noise sampled once, both meters integrated with
/// the ρ-feedback term, independent white bath noise per meter.
pub fn run_epr_trial(config: &EprConfig, seed: u64) -> Result<PairOutcome> {
    config.validate()?;
    let aps = [&config.apparatus1, &config.apparatus2];
    // quenched draw: a fixed standard-normal 6-vector mapped through the
    // covariance factor (refreshed from rho(t) only in exploration mode)
    let cov_seed = (seed ^ 0xA5A5_A5A5_A5A5_A5A5).wrapping_mul(0x2545_F491_4F6C_DD1D) | 1;
    let mut z_rng = engine::rng_for_seed(cov_seed);
    let z = nalgebra::DVector::from_fn(6, |_, _| z_rng.sample::<f64, _>(StandardNormal));
    let quenched_from = |rho_dm: &DensityMatrix| -> Result<([f64; 3], [f64; 3])> {
        let cov = epr_noise_covariance(rho_dm)?;
        let l = pivoted_cholesky(&cov)?;
        let v = &l * z.rows(0, l.ncols());
        Ok(([v[0], v[1], v[2]], [v[3], v[4], v[5]]))
    };
    let (mut xi1, mut xi2) = quenched_from(&config.shared_rho0)?;
    let dot = |xi: &[f64; 3], b: &[f64; 3]| xi[0] * b[0] + xi[1] * b[1] + xi[2] * b[2];
    let mut biases = [dot(&xi1, &aps[0].b_field), dot(&xi2, &aps[1].b_field)];

    let spin_static = aps.iter().all(|p| p.mu == 0.0 && p.b0 == 0.0 && p.c0 == 0.0 && p.omega == 0.0);
    let ops = if spin_static { None } else { Some(PairOps::new(config)) };

    let mut rng = engine::rng_for_seed(seed);
    let n_steps = (config.t_end / config.dt).round() as usize;
    let dt = config.dt;
    let mut rho = to_m4(&config.shared_rho0);
    let mut phis = [0.0f64; 2];
    let mut trackers = [DecisionTracker::default(), DecisionTracker::default()];
    let thresholds = [
        0.5 * fixed_points(aps[0]).0,
        0.5 * fixed_points(aps[1]).0,
    ];
    let limits = [
        1e6 * fixed_points(aps[0]).0.max(1.0),
        1e6 * fixed_points(aps[1]).0.max(1.0),
    ];
    let sigmas = [
        (aps[0].epsilon * dt).sqrt(),
        (aps[1].epsilon * dt).sqrt(),
    ];
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let sexp: [f64; 2] = if let Some(ops) = &ops {
            [
                (rho * ops.sdotb_hat[0]).trace().re,
                (rho * ops.sdotb_hat[1]).trace().re,
            ]
        } else {
            [0.0, 0.0] // mu = 0 on the static fast path
        };
        for i in 0..2 {
            let mut dphi = (drift_phi(phis[i], sexp[i], aps[i]) + biases[i]) * dt;
            if sigmas[i] > 0.0 {
                dphi += sigmas[i] * rng.sample::<f64, _>(StandardNormal);
            }
            phis[i] += dphi;
            if !phis[i].is_finite() || phis[i].abs() > limits[i] {
                return Err(CoreError::Divergence { time: t + dt, trajectory: None });
            }
            trackers[i].update(t + dt, phis[i], thresholds[i]);
        }
        if let Some(ops) = &ops {
            let rhs = pair_rhs(&rho, ops, phis, aps);
            rho += rhs * Complex64::new(dt, 0.0);
            // exact Hermitization kills accumulated asymmetry
            rho = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
            if config.update_covariance && step % 20 == 19 {
                let (a, b) = quenched_from(&from_m4(&rho))?;
                xi1 = a;
                xi2 = b;
                biases = [dot(&xi1, &aps[0].b_field), dot(&xi2, &aps[1].b_field)];
            }
        }
    }
    let (readout1, _) = trackers[0].finish(phis[0], thresholds[0]);
    let (readout2, _) = trackers[1].finish(phis[1], thresholds[1]);
    Ok(PairOutcome {
        readout1,
        readout2,
        xi1,
        xi2,
        seed,
    })
}

/// Monte Carlo estimate of ⟨readout₁·readout₂⟩ over decided trials.
pub fn estimate_correlation(
    config: &EprConfig,
    n: usize,
    master_seed: u64,
) -> Result<CorrelationEstimate> {
    config.validate()?;
    let outcomes = run_epr_trials(config, n, master_seed)?;
    correlation_from_outcomes(&outcomes)
}

/// Runs n EPR trials in parallel with deterministic per-trial seeds.
pub fn run_epr_trials(config: &EprConfig, n: usize, master_seed: u64) -> Result<Vec<PairOutcome>> {
    if n < 1 {
        return Err(CoreError::InvalidInput("need n >= 1 trials".into()));
    }
    let results = engine::parallel_trials(n, master_seed, |_, seed| run_epr_trial(config, seed));
    results.into_iter().collect()
}

pub fn correlation_from_outcomes(outcomes: &[PairOutcome]) -> Result<CorrelationEstimate> {
    let mut products = Vec::with_capacity(outcomes.len());
    let mut n_undecided = 0;
    for o in outcomes {
        match (o.readout1.sign(), o.readout2.sign()) {
            (Some(a), Some(b)) => products.push(a * b),
            _ => n_undecided += 1,
        }
    }
    if products.is_empty() {
        return Err(CoreError::InvalidInput(
            "no decided trials; cannot estimate correlation".into(),
        ));
    }
    let (c, stderr) = mean_stderr(&products);
    let quality_warning = n_undecided as f64 > 0.1 * outcomes.len() as f64;
    Ok(CorrelationEstimate {
        c,
        stderr,
        n_decided: products.len(),
        n_undecided,
        quality_warning,
    })
}

/// Exact erf-model correlation for the singlet by deterministic quadrature:
/// C = −E[erf(α x) erf(β (x cos θ + y sin θ))] with x, y standard normal,
/// α = |B₁|/√γ, β = |B₂|/√γ. The y-average is taken in closed form; the
/// remaining 1-D Gaussian integral is done by Simpson quadrature to 1e−8.
pub fn correlation_quadrature_oracle(config: &EprConfig) -> Result<f64> {
    config.validate()?;
    if (config.apparatus1.gamma - config.apparatus2.gamma).abs() > 1e-12 {
        return Err(CoreError::InvalidInput(
            "quadrature oracle assumes a common gamma".into(),
        ));
    }
    // the oracle is derived for the singlet's exact anti-correlation
    let cov = epr_noise_covariance(&config.shared_rho0)?;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { -1.0 } else { 0.0 };
            if (cov[(i, j + 3)] - want).abs() > 1e-10 {
                return Err(CoreError::InvalidInput(
                    "quadrature oracle requires the singlet state (xi2 = -xi1)".into(),
                ));
            }
        }
    }
    let gamma = config.apparatus1.gamma;
    let alpha = config.apparatus1.b_norm() / gamma.sqrt();
    let beta = config.apparatus2.b_norm() / gamma.sqrt();
    let cos_t = angle_cosine(&config.apparatus1.b_field, &config.apparatus2.b_field);
    Ok(erf_model_correlation(alpha, beta, cos_t))
}

/// cos of the angle between two field vectors.
pub fn angle_cosine(b1: &[f64; 3], b2: &[f64; 3]) -> f64 {
    let v1 = Vector3::from_column_slice(b1);
    let v2 = Vector3::from_column_slice(b2);
    v1.dot(&v2) / (v1.norm() * v2.norm())
}

/// −E[erf(αx)·erf(β(x cosθ + y sinθ))] for x, y iid standard normal.
pub fn erf_model_correlation(alpha: f64, beta: f64, cos_theta: f64) -> f64 {
    let sin_sq = (1.0 - cos_theta * cos_theta).max(0.0);
    let shrink = (1.0 + 2.0 * beta * beta * sin_sq).sqrt();
    let inner = beta * cos_theta / shrink;
    // Simpson rule over x in [-10, 10] with Gaussian weight
    let n = 4000; // even
    let a = -10.0;
    let h = 20.0 / n as f64;
    let f = |x: f64| {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            * erf(alpha * x)
            * erf(inner * x)
    };
    let mut sum = f(a) + f(-a);
    for i in 1..n {
        let x = a + i as f64 * h;
        sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    -(sum * h / 3.0)
}

/// CHSH combination |C(B₁,B₂) + C(B₁′,B₂) − C(B₁,B₂′) + C(B₁′,B₂′)| under
/// the idealized substitution C = −cos θ. `angles` are the four pair angles
/// θ(B₁,B₂), θ(B₁′,B₂), θ(B₁,B₂′), θ(B₁′,B₂′).
pub fn chsh_ideal(angles: [f64; 4]) -> f64 {
    let c: Vec<f64> = angles.iter().map(|t| -t.cos()).collect();
    (c[0] + c[1] - c[2] + c[3]).abs()
}

/// The erf-model CHSH statistic from the quadrature oracle over four configs.
pub fn chsh_oracle(configs: &[EprConfig; 4]) -> Result<f64> {
    let mut c = [0.0; 4];
    for (i, cfg) in configs.iter().enumerate() {
        c[i] = correlation_quadrature_oracle(cfg)?;
    }
    Ok((c[0] + c[1] - c[2] + c[3]).abs())
}

/// Monte Carlo CHSH statistic. The configs must share the same initial state
/// and differ only in field directions; order is
/// (B₁,B₂), (B₁′,B₂), (B₁,B₂′), (B₁′,B₂′).
pub fn chsh_statistic(
    configs: &[EprConfig; 4],
    n_per_config: usize,
    master_seed: u64,
) -> Result<ChshResult> {
    for cfg in &configs[1..] {
        if cfg.shared_rho0 != configs[0].shared_rho0 {
            return Err(CoreError::InvalidInput(
                "all four CHSH configs must share the initial state".into(),
            ));
        }
    }
    let estimates: Vec<CorrelationEstimate> = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| estimate_correlation(cfg, n_per_config, engine::derive_seed(master_seed, i as u64)))
        .collect::<Result<_>>()?;
    let c: Vec<f64> = estimates.iter().map(|e| e.c).collect();
    let statistic = (c[0] + c[1] - c[2] + c[3]).abs();
    let stderr = estimates
        .iter()
        .map(|e| e.stderr * e.stderr)
        .sum::<f64>()
        .sqrt();
    let correlations: [CorrelationEstimate; 4] = estimates.try_into().expect("four estimates");
    Ok(ChshResult {
        statistic,
        stderr,
        violation_3sigma: statistic - 3.0 * stderr > 2.0,
        correlations,
    })
}

/// The four singlet configs for a CHSH run at detector angles
/// (B₁, B₁′) = (0°, 90°) and (B₂, B₂′) = (45°, 135°) in the x–z plane,
/// ordered (B₁,B₂), (B₁′,B₂), (B₁,B₂′), (B₁′,B₂′).
pub fn chsh_configs(base: &ApparatusParams) -> [EprConfig; 4] {
    use std::f64::consts::PI;
    let (a, ap, b, bp) = (0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0);
    [
        EprConfig::singlet_with_angles(base, a, b),
        EprConfig::singlet_with_angles(base, ap, b),
        EprConfig::singlet_with_angles(base, a, bp),
        EprConfig::singlet_with_angles(base, ap, bp),
    ]
}

/// Recommended apparatus for erf-regime EPR runs: deep wells (γ = 4,
/// φ₊ = 2) with bath amplitude ε = 1, the value at which the paper's
/// parameter-free erf formula is exact in the linearized dynamics.
pub fn erf_regime_apparatus() -> ApparatusParams {
    ApparatusParams {
        gamma: 4.0,
        lambda: 6.0,
        epsilon: 1.0,
        ..ApparatusParams::default()
    }
}
