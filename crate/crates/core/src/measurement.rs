//! Single-apparatus measurement model: coupled evolution of the double-well
//! order parameter φ and the spin density matrix, with the SSB readout, the
//! t₀ time-scale estimate and the erf readout probability.
//!
//! dφ/dt = γφ − (λ/3!)φ³ + μ⟨S⟩·B + ξ, with white noise ξ of variance
//! density ε. The spin obeys a Lindblad-form master equation whose up/down
//! rates satisfy detailed balance a = exp(−μφ|B|/kT)·b₀, so a growing meter
//! reading pulls the spin into the matching ground state (positive feedback).

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erf;

use crate::engine::{self, mean_stderr};
use crate::quantum::DensityMatrix;
use crate::{CoreError, Result};

type M2 = Matrix2<Complex64>;

/// Scalar coefficients plus the magnetic-field 3-vector defining one
/// measurement apparatus. Natural units ħ = k_B = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ApparatusParams {
    /// Linear instability rate (> 0 for a double well).
    pub gamma: f64,
    /// Quartic coupling λ (> 0, confining).
    pub lambda: f64,
    /// Spin–meter coupling μ (≥ 0).
    pub mu: f64,
    /// Bath white-noise variance density ε (≥ 0).
    pub epsilon: f64,
    /// Applied magnetic field.
    pub b_field: [f64; 3],
    /// Larmor frequency ω.
    pub omega: f64,
    /// Bath temperature (> 0).
    pub k_t: f64,
    /// Bare bath rate b₀ (≥ 0); the opposite rate is a = e^{−μφ|B|/kT}·b₀.
    pub b0: f64,
    /// Dephasing rate c₀ (≥ 0).
    pub c0: f64,
    /// Prefactor g in the t₀ formula (> 0, default 1; the source model
    /// leaves it unspecified).
    pub g: f64,
}

impl Default for ApparatusParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 6.0,
            mu: 0.0,
            epsilon: 0.01,
            b_field: [0.0, 0.0, 1.0],
            omega: 0.0,
            k_t: 1.0,
            b0: 0.0,
            c0: 0.0,
            g: 1.0,
        }
    }
}

impl ApparatusParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.gamma > 0.0, format!("gamma must be > 0, got {}", self.gamma)),
            (self.lambda > 0.0, format!("lambda must be > 0, got {}", self.lambda)),
            (self.mu >= 0.0, format!("mu must be >= 0, got {}", self.mu)),
            (self.epsilon >= 0.0, format!("epsilon must be >= 0, got {}", self.epsilon)),
            (self.k_t > 0.0, format!("kT must be > 0, got {}", self.k_t)),
            (self.b0 >= 0.0, format!("b0 must be >= 0, got {}", self.b0)),
            (self.c0 >= 0.0, format!("c0 must be >= 0, got {}", self.c0)),
            (self.g > 0.0, format!("g must be > 0, got {}", self.g)),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(CoreError::InvalidInput(msg));
            }
        }
        Ok(())
    }

    pub fn b_norm(&self) -> f64 {
        let [x, y, z] = self.b_field;
        (x * x + y * y + z * z).sqrt()
    }

    pub fn b_hat(&self) -> [f64; 3] {
        let n = self.b_norm();
        let [x, y, z] = self.b_field;
        [x / n, y / n, z / n]
    }

    /// Downward rate a(φ) = e^{−μφ|B|/kT}·b₀ (detailed balance).
    pub fn rate_a(&self, phi: f64) -> f64 {
        (-self.mu * phi * self.b_norm() / self.k_t).exp() * self.b0
    }
}

/// Meter readout of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Plus,
    Minus,
    Undecided,
}

impl Readout {
    pub fn sign(self) -> Option<f64> {
        match self {
            Readout::Plus => Some(1.0),
            Readout::Minus => Some(-1.0),
            Readout::Undecided => None,
        }
    }
}

/// Outcome of a single measurement trial.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub readout: Readout,
    pub final_phi: f64,
    pub final_rho: DensityMatrix,
    /// First time |φ| reached 0.5·φ₊ without a later sign change.
    pub decision_time: Option<f64>,
}

/// Drift of the meter: γφ − (λ/6)φ³ + μ·⟨S⟩·B̂·|B|.
pub fn drift_phi(phi: f64, spin_exp_along_b: f64, p: &ApparatusParams) -> f64 {
    p.gamma * phi - p.lambda / 6.0 * phi.powi(3) + p.mu * spin_exp_along_b * p.b_norm()
}

/// Zero-drift roots ±√(6γ/λ) of the symmetric double well.
pub fn fixed_points(p: &ApparatusParams) -> (f64, f64) {
    let root = (6.0 * p.gamma / p.lambda).sqrt();
    (root, -root)
}

/// Master-equation right-hand side on a 2×2 state:
/// −iω[S₃,ρ] + a·D[S₋]ρ + b·D[S₊]ρ + c·D[S₃]ρ with
/// D[L]ρ = 2LρL† − {L†L, ρ} (the dissipator bracket plus its h.c.).
fn master_rhs2(rho: &M2, omega: f64, a: f64, b: f64, c: f64) -> M2 {
    let p = rho[(0, 0)];
    let q = rho[(0, 1)];
    let pd = rho[(1, 1)];
    // component form of the dissipators for S± = S₁ ± iS₂ (entries 2):
    // populations relax at 8a (down) / 8b (up); coherences at 4(a+b+c).
    let dp = Complex64::new(8.0, 0.0) * (b * pd - a * p);
    let dq = q * Complex64::new(-4.0 * (a + b + c), -2.0 * omega);
    let mut out = M2::zeros();
    out[(0, 0)] = dp;
    out[(1, 1)] = -dp;
    out[(0, 1)] = dq;
    out[(1, 0)] = dq.conj();
    out
}

fn to_m2(rho: &DensityMatrix) -> M2 {
    let m = rho.matrix();
    M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn from_m2(m: &M2) -> DensityMatrix {
    let d = nalgebra::DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
    DensityMatrix::new_unchecked(d)
}

fn step_rho2(rho: &mut M2, phi: f64, dt: f64, p: &ApparatusParams) -> Result<()> {
    let a = p.rate_a(phi);
    let b = p.b0;
    let c = p.c0;
    if dt * a.max(b).max(c) >= 0.1 {
        return Err(CoreError::StepSize(format!(
            "dt * max(a,b,c) = {} >= 0.1; reduce dt",
            dt * a.max(b).max(c)
        )));
    }
    let rhs = master_rhs2(rho, p.omega, a, b, c);
    *rho += rhs * Complex64::new(dt, 0.0);
    // Hermiticity is exact by the component construction; check positivity
    let det = (rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)]).re;
    let pmin = rho[(0, 0)].re.min(rho[(1, 1)].re);
    if det < -1e-8 || pmin < -1e-8 {
        return Err(CoreError::StepSize(format!(
            "positivity lost: det = {det}, min population = {pmin}"
        )));
    }
    Ok(())
}

/// Exact propagator of the master equation over dt at fixed φ (the rates are
/// constant within a step, so populations relax toward b/(a+b) at rate
/// 8(a+b) and the coherence decays at 4(a+b+c) while rotating at 2ω).
/// Unconditionally stable, which matters because the detailed-balance rate
/// grows exponentially as φ rolls downhill.
fn exact_step_rho2(rho: &mut M2, phi: f64, dt: f64, p: &ApparatusParams) {
    let a = p.rate_a(phi);
    let b = p.b0;
    let c = p.c0;
    let s = a + b;
    let pop = rho[(0, 0)].re;
    let new_pop = if s > 0.0 {
        let p_inf = b / s;
        let decay = (-8.0 * s * dt).exp();
        p_inf + (pop - p_inf) * decay
    } else {
        pop
    };
    let trace = rho[(0, 0)].re + rho[(1, 1)].re;
    rho[(0, 0)] = Complex64::new(new_pop, 0.0);
    rho[(1, 1)] = Complex64::new(trace - new_pop, 0.0);
    let q = rho[(0, 1)]
        * Complex64::new(-4.0 * (a + b + c) * dt, 0.0).exp()
        * Complex64::new(0.0, -2.0 * p.omega * dt).exp();
    rho[(0, 1)] = q;
    rho[(1, 0)] = q.conj();
}

/// One explicit step of the spin master equation at fixed meter value φ.
/// Trace is preserved to 1e−12 and Hermiticity exactly.
pub fn evolve_density_matrix(
    rho: &DensityMatrix,
    phi: f64,
    dt: f64,
    p: &ApparatusParams,
) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(CoreError::Dimension {
            expected: 2,
            got: rho.dim(),
            context: "single-spin master equation".into(),
        });
    }
    let mut m = to_m2(rho);
    step_rho2(&mut m, phi, dt, p)?;
    Ok(from_m2(&m))
}

/// Spin expectation along B̂ computed directly from the 2×2 components.
fn spin_exp_b(rho: &M2, b_hat: &[f64; 3]) -> f64 {
    let p = rho[(0, 0)].re;
    let pd = rho[(1, 1)].re;
    let q = rho[(0, 1)];
    b_hat[2] * (p - pd) + 2.0 * (q * Complex64::new(b_hat[0], b_hat[1])).re
}

/// Tracks the "first threshold crossing without a later sign change" rule.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct DecisionTracker {
    candidate: Option<(f64, f64)>, // (time, sign)
}

impl DecisionTracker {
    pub(crate) fn update(&mut self, t: f64, phi: f64, threshold: f64) {
        if let Some((_, sign)) = self.candidate {
            if phi * sign < 0.0 {
                self.candidate = None;
            }
        }
        if self.candidate.is_none() && phi.abs() >= threshold {
            self.candidate = Some((t, phi.signum()));
        }
    }

    pub(crate) fn finish(&self, final_phi: f64, threshold: f64) -> (Readout, Option<f64>) {
        match self.candidate {
            Some((t, sign)) if final_phi.abs() >= threshold => {
                let readout = if sign > 0.0 { Readout::Plus } else { Readout::Minus };
                (readout, Some(t))
            }
            _ => (Readout::Undecided, None),
        }
    }
}

/// Jointly steps φ and ρ, feeding ⟨S⟩·B into the meter drift and φ into the
/// bath rates; returns the readout, final state and decision time.
pub fn run_measurement(
    rho0: &DensityMatrix,
    p: &ApparatusParams,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<MeasurementOutcome> {
    run_measurement_biased(rho0, p, 0.0, t_end, dt, seed)
}

/// As [`run_measurement`] with an extra constant drift bias (used by the EPR
/// trials for the quenched-noise term ξ·B).
pub fn run_measurement_biased(
    rho0: &DensityMatrix,
    p: &ApparatusParams,
    bias: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<MeasurementOutcome> {
    p.validate()?;
    if rho0.dim() != 2 {
        return Err(CoreError::Dimension {
            expected: 2,
            got: rho0.dim(),
            context: "run_measurement".into(),
        });
    }
    let (phi_plus, _) = fixed_points(p);
    let threshold = 0.5 * phi_plus;
    let limit = 1e6 * phi_plus.max(1.0);
    let b_hat = p.b_hat();
    let spin_static = p.mu == 0.0 && p.b0 == 0.0 && p.c0 == 0.0 && p.omega == 0.0;

    let mut rng = engine::rng_for_seed(seed);
    let n_steps = (t_end / dt).round() as usize;
    let sigma = (p.epsilon * dt).sqrt();
    let mut phi = 0.0f64;
    let mut rho = to_m2(rho0);
    let mut tracker = DecisionTracker::default();
    let mut sexp = spin_exp_b(&rho, &b_hat);
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let mut dphi = (drift_phi(phi, sexp, p) + bias) * dt;
        if sigma > 0.0 {
            dphi += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        phi += dphi;
        if !phi.is_finite() || phi.abs() > limit {
            return Err(CoreError::Divergence { time: t + dt, trajectory: None });
        }
        if !spin_static {
            exact_step_rho2(&mut rho, phi, dt, p);
            sexp = spin_exp_b(&rho, &b_hat);
        }
        tracker.update(t + dt, phi, threshold);
    }
    let (readout, decision_time) = tracker.finish(phi, threshold);
    Ok(MeasurementOutcome {
        readout,
        final_phi: phi,
        final_rho: from_m2(&rho),
        decision_time,
    })
}

/// Ensemble statistics of repeated measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStats {
    pub n: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_undecided: usize,
    /// P₊ over decided trials, with binomial standard error.
    pub p_plus: f64,
    pub p_plus_stderr: f64,
    pub median_decision_time: Option<f64>,
    pub mean_final_phi: f64,
    /// ρ↑↑ averaged over trials that read +1.
    pub mean_up_population_given_plus: Option<f64>,
}

/// Runs n independent trials in parallel with deterministic per-trial seeds
/// and returns the per-trial outcomes in index order. The seed of trial i is
/// `engine::derive_seed(master_seed, i)`.
pub fn measure_trials(
    rho0: &DensityMatrix,
    p: &ApparatusParams,
    t_end: f64,
    dt: f64,
    n: usize,
    master_seed: u64,
) -> Result<Vec<MeasurementOutcome>> {
    let outcomes = engine::parallel_trials(n, master_seed, |_, seed| {
        run_measurement(rho0, p, t_end, dt, seed)
    });
    outcomes
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            o.map_err(|e| match e {
                CoreError::Divergence { time, .. } => CoreError::Divergence {
                    time,
                    trajectory: Some(i),
                },
                other => other,
            })
        })
        .collect()
}

/// Ensemble statistics over per-trial outcomes.
pub fn stats_from_outcomes(outcomes: &[MeasurementOutcome]) -> MeasurementStats {
    let n = outcomes.len();
    let mut n_plus = 0;
    let mut n_minus = 0;
    let mut n_undecided = 0;
    let mut times = Vec::new();
    let mut phis = Vec::with_capacity(n);
    let mut up_pop = Vec::new();
    for o in outcomes {
        match o.readout {
            Readout::Plus => {
                n_plus += 1;
                up_pop.push(o.final_rho.entry(0, 0).re);
            }
            Readout::Minus => n_minus += 1,
            Readout::Undecided => n_undecided += 1,
        }
        if let Some(t) = o.decision_time {
            times.push(t);
        }
        phis.push(o.final_phi);
    }
    let decided = n_plus + n_minus;
    let p_plus = if decided > 0 { n_plus as f64 / decided as f64 } else { f64::NAN };
    let p_plus_stderr = if decided > 0 {
        (p_plus * (1.0 - p_plus) / decided as f64).sqrt()
    } else {
        f64::NAN
    };
    times.sort_by(f64::total_cmp);
    let median_decision_time = if times.is_empty() {
        None
    } else {
        Some(times[times.len() / 2])
    };
    let (mean_final_phi, _) = mean_stderr(&phis);
    let mean_up_population_given_plus = if up_pop.is_empty() {
        None
    } else {
        Some(up_pop.iter().sum::<f64>() / up_pop.len() as f64)
    };
    MeasurementStats {
        n,
        n_plus,
        n_minus,
        n_undecided,
        p_plus,
        p_plus_stderr,
        median_decision_time,
        mean_final_phi,
        mean_up_population_given_plus,
    }
}

/// Runs n independent trials in parallel with deterministic per-trial seeds.
pub fn measure_ensemble(
    rho0: &DensityMatrix,
    p: &ApparatusParams,
    t_end: f64,
    dt: f64,
    n: usize,
    master_seed: u64,
) -> Result<MeasurementStats> {
    Ok(stats_from_outcomes(&measure_trials(
        rho0,
        p,
        t_end,
        dt,
        n,
        master_seed,
    )?))
}

/// Leading-log estimate of the measurement time:
/// t₀ = (2γ)⁻¹ ln[(g/γ)(δ² + ε/γ)]⁻¹ with δ = (μ/γ)⟨S⟩·B.
///
/// An argument ≥ 1 signals an instantaneous decision (t₀ ≤ 0 is returned);
/// an argument ≤ 0 is a domain error.
pub fn measurement_time(p: &ApparatusParams, delta: f64) -> Result<f64> {
    p.validate()?;
    let arg = (p.g / p.gamma) * (delta * delta + p.epsilon / p.gamma);
    if arg <= 0.0 {
        return Err(CoreError::Domain(format!(
            "t0 formula argument must be positive, got {arg}"
        )));
    }
    Ok(-(arg.ln()) / (2.0 * p.gamma))
}

/// Readout probability P₊ = (1 + erf(δ/√(2 ε_eff)))/2.
pub fn p_plus_erf(delta: f64, eps_eff: f64) -> Result<f64> {
    if !(eps_eff > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "eps_eff must be > 0, got {eps_eff}"
        )));
    }
    Ok((1.0 + erf(delta / (2.0 * eps_eff).sqrt())) / 2.0)
}

/// Effective readout variance ε_eff = ε/(2γ), matching the linearized
/// growth from the unstable point (√(2ε_eff) = γ^{−1/2} when ε = 1).
pub fn default_eps_eff(p: &ApparatusParams) -> f64 {
    p.epsilon / (2.0 * p.gamma)
}
