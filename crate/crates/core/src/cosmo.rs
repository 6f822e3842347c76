//! Inflationary mode functions, the conformal-time kernels of the effective
//! action, and the reheating-era Langevin estimate of the density-fluctuation
//! power spectrum.
//!
//! Everything lives in conformal time η < 0 with a(η) = −1/(Hη); the mode
//! equation is v″ + (k² − 2/η²)v = 0 with Bunch–Davies initial data deep
//! inside the horizon.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::engine::{self, mean_stderr};
use crate::{CoreError, Result};

/// De Sitter background: constant Hubble rate and a conformal-time window.
#[derive(Debug, Clone, PartialEq)]
pub struct InflationParams {
    pub hubble: f64,
    pub eta_start: f64,
    pub eta_end: f64,
}

impl InflationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hubble > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "Hubble rate must be > 0, got {}",
                self.hubble
            )));
        }
        if !(self.eta_start < self.eta_end && self.eta_end < 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "need eta_start < eta_end < 0, got ({}, {})",
                self.eta_start, self.eta_end
            )));
        }
        Ok(())
    }

    /// Scale factor a(η) = −1/(Hη).
    pub fn scale_factor(&self, eta: f64) -> f64 {
        -1.0 / (self.hubble * eta)
    }
}

/// Mode amplitude and conformal-time derivative at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub k: f64,
    pub eta: f64,
    pub v: Complex64,
    pub dv: Complex64,
}

impl ModeState {
    /// Conserved Wronskian v·conj(v′) − conj(v)·v′ (purely imaginary).
    pub fn wronskian(&self) -> Complex64 {
        self.v * self.dv.conj() - self.v.conj() * self.dv
    }
}

/// Reheating-era parameters of the λφ⁴ measuring interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReheatingParams {
    /// Quartic coupling λ (> 0).
    pub lambda: f64,
    /// Typical order-parameter amplitude φ₀ during reheating.
    pub phi0: f64,
    /// Reheating duration Δt (> 0).
    pub delta_t: f64,
    /// Integration steps across the window.
    pub n_steps: usize,
    /// Include the −V′ restoring term and the retarded-memory convolution
    /// (comparison switch; the reduced equation is φ̈_k ≈ ξ_k).
    pub include_restoring_terms: bool,
}

impl ReheatingParams {
    pub fn new(lambda: f64, phi0: f64, delta_t: f64) -> Self {
        Self {
            lambda,
            phi0,
            delta_t,
            n_steps: 200,
            include_restoring_terms: false,
        }
    }

    /// Convenience setter for the special case Δt ≈ φ₀/φ̇₀.
    pub fn delta_t_from_rolling(mut self, phi0: f64, phi0_dot: f64) -> Self {
        self.phi0 = phi0;
        self.delta_t = phi0 / phi0_dot;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.delta_t > 0.0) || self.n_steps < 2 {
            return Err(CoreError::InvalidInput(
                "need lambda >= 0, delta_t > 0 and at least 2 steps".into(),
            ));
        }
        Ok(())
    }
}

/// Power-spectrum estimates over a wavenumber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub k: Vec<f64>,
    pub power: Vec<f64>,
    pub stderr: Vec<f64>,
    /// The standard horizon-crossing reference (H/2π)².
    pub reference: f64,
}

/// Squeezed-mode solution v(η) = k^{−1/2}(1 − i/(kη)) e^{−ikη}.
///
/// The growth factor matches 1 + i·H·a/k since aH = −1/η; the plane-wave
/// phase is restored so the Wronskian is conserved.
pub fn analytic_mode(k: f64, eta: f64, _hubble: f64) -> Complex64 {
    let phase = Complex64::new(0.0, -k * eta).exp();
    k.powf(-0.5) * (Complex64::new(1.0, 0.0) - Complex64::new(0.0, 1.0) / (k * eta)) * phase
}

/// Conformal-time derivative of [`analytic_mode`].
pub fn analytic_mode_derivative(k: f64, eta: f64, _hubble: f64) -> Complex64 {
    let phase = Complex64::new(0.0, -k * eta).exp();
    let i = Complex64::new(0.0, 1.0);
    // d/deta [ (1 - i/(k eta)) e^{-ik eta} ] * k^{-1/2}
    k.powf(-0.5) * phase * (i / (k * eta * eta) + (-i * k) * (Complex64::new(1.0, 0.0) - i / (k * eta)))
}

/// Integrates v″ + (k² − 2/η²)v = 0 over the conformal window with RK4,
/// starting from the Bunch–Davies (analytic) solution at η_start.
/// Returns the trajectory of [`ModeState`]s on a uniform η grid.
pub fn integrate_mode(k: f64, params: &InflationParams, d_eta: f64) -> Result<Vec<ModeState>> {
    params.validate()?;
    if !(k > 0.0) || !(d_eta > 0.0) {
        return Err(CoreError::InvalidInput("need k > 0 and d_eta > 0".into()));
    }
    let n_steps = ((params.eta_end - params.eta_start) / d_eta).round() as usize;
    if n_steps == 0 {
        return Err(CoreError::InvalidInput("window shorter than one step".into()));
    }
    let h = (params.eta_end - params.eta_start) / n_steps as f64;
    let mut eta = params.eta_start;
    let mut v = analytic_mode(k, eta, params.hubble);
    let mut dv = analytic_mode_derivative(k, eta, params.hubble);
    let accel = |eta: f64, v: Complex64| -> Complex64 { -(k * k - 2.0 / (eta * eta)) * v };
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(ModeState { k, eta, v, dv });
    let w0 = out[0].wronskian();
    for step in 0..n_steps {
        let (k1v, k1a) = (dv, accel(eta, v));
        let (k2v, k2a) = (dv + k1a * (h / 2.0), accel(eta + h / 2.0, v + k1v * (h / 2.0)));
        let (k3v, k3a) = (dv + k2a * (h / 2.0), accel(eta + h / 2.0, v + k2v * (h / 2.0)));
        let (k4v, k4a) = (dv + k3a * h, accel(eta + h, v + k3v * h));
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        dv += (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * (h / 6.0);
        eta = params.eta_start + (step + 1) as f64 * h;
        out.push(ModeState { k, eta, v, dv });
    }
    let w_end = out.last().unwrap().wronskian();
    let drift = (w_end - w0).norm() / w0.norm().max(1e-300);
    if drift > 1e-8 {
        return Err(CoreError::StepSize(format!(
            "Wronskian drift {drift:.3e} exceeds 1e-8; reduce d_eta"
        )));
    }
    Ok(out)
}

/// Leading-order (k⁰) kernel brackets at a pair of conformal times:
/// retarded (η′³ − η³)/(3η′η) and statistical −1/η′² − (η/η′ + η′/η)/2.
pub fn evaluate_kernels(eta: f64, eta_prime: f64) -> (f64, f64) {
    let g_ret = (eta_prime.powi(3) - eta.powi(3)) / (3.0 * eta_prime * eta);
    let g_stat = -1.0 / (eta_prime * eta_prime) - 0.5 * (eta / eta_prime + eta_prime / eta);
    (g_ret, g_stat)
}

/// Per-mode statistical noise variance density at horizon crossing:
/// q_k = λ²φ₀⁴ · (H²/(2k³)) · |equal-time bracket at kη = −1| = λ²φ₀⁴H²/k³.
///
/// The H²/(2k³) factor is the squeezed-mode variance scale; the bracket is
/// the dimensionless equal-time value of the statistical kernel.
pub fn mode_noise_density(k: f64, rp: &ReheatingParams, ip: &InflationParams) -> f64 {
    let bracket = {
        // kernels in the dimensionless variable kη, at horizon crossing
        let (_, g_stat) = evaluate_kernels(-1.0, -1.0);
        g_stat.abs()
    };
    rp.lambda * rp.lambda * rp.phi0.powi(4) * ip.hubble * ip.hubble / (2.0 * k.powi(3)) * bracket
}

/// Ensemble estimate of |φ_k|² from the reduced reheating Langevin equation
/// φ̈_k = ξ_k integrated over Δt, with white noise of density
/// [`mode_noise_density`]. Returns (mean, stderr).
pub fn reheating_langevin(
    k: f64,
    rp: &ReheatingParams,
    ip: &InflationParams,
    n: usize,
    master_seed: u64,
) -> Result<(f64, f64)> {
    rp.validate()?;
    ip.validate()?;
    if n < 1 {
        return Err(CoreError::InvalidInput("need n >= 1".into()));
    }
    let q = mode_noise_density(k, rp, ip);
    let samples = engine::parallel_trials(n, master_seed, |_, seed| {
        simulate_mode_amplitude(k, rp, q, seed)
    });
    let values: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    Ok(mean_stderr(&values))
}

fn simulate_mode_amplitude(k: f64, rp: &ReheatingParams, q: f64, seed: u64) -> Result<f64> {
    let dt = rp.delta_t / rp.n_steps as f64;
    let mut rng = engine::rng_for_seed(seed);
    let sigma = (q * dt).sqrt();
    let mut phi = 0.0f64;
    let mut vel = 0.0f64;
    // restoring terms for the comparison switch: V''(phi0) mass term and the
    // retarded-memory convolution with the same per-mode scaling as q
    let mass_sq = if rp.include_restoring_terms {
        rp.lambda * rp.phi0 * rp.phi0 / 2.0
    } else {
        0.0
    };
    let mut history: Vec<f64> = Vec::new();
    for step in 0..rp.n_steps {
        let mut acc = if sigma > 0.0 {
            sigma / dt * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        acc -= mass_sq * phi;
        if rp.include_restoring_terms && !history.is_empty() {
            // discrete convolution with the retarded bracket in k*eta units
            let eta_now = -1.0 - step as f64 * dt * k.min(1.0) * 1e-3;
            let mut mem = 0.0;
            for (j, past) in history.iter().enumerate() {
                let eta_past = -1.0 - j as f64 * dt * k.min(1.0) * 1e-3;
                let (g_ret, _) = evaluate_kernels(eta_past, eta_now);
                mem += g_ret * past * dt;
            }
            acc -= rp.lambda * rp.lambda * rp.phi0.powi(4) * mem * 1e-3;
        }
        vel += acc * dt;
        phi += vel * dt;
        if !phi.is_finite() {
            return Err(CoreError::Divergence {
                time: (step + 1) as f64 * dt,
                trajectory: None,
            });
        }
        if rp.include_restoring_terms {
            history.push(phi);
        }
    }
    Ok(phi * phi)
}

/// P_δφ(k) = (4πk³/(2π)³)|φ_k|² estimated per k over the grid, with the
/// (H/2π)² reference.
pub fn power_spectrum(
    k_grid: &[f64],
    rp: &ReheatingParams,
    ip: &InflationParams,
    n: usize,
    master_seed: u64,
) -> Result<SpectrumResult> {
    if k_grid.is_empty() {
        return Err(CoreError::InvalidInput("empty k grid".into()));
    }
    let mut power = Vec::with_capacity(k_grid.len());
    let mut stderr = Vec::with_capacity(k_grid.len());
    for (ki, &k) in k_grid.iter().enumerate() {
        if !(k > 0.0) {
            return Err(CoreError::InvalidInput(format!("k must be > 0, got {k}")));
        }
        let seed = engine::derive_seed(master_seed, ki as u64);
        let (mean, se) = reheating_langevin(k, rp, ip, n, seed)?;
        let prefactor = 4.0 * std::f64::consts::PI * k.powi(3) / (2.0 * std::f64::consts::PI).powi(3);
        power.push(prefactor * mean);
        stderr.push(prefactor * se);
    }
    Ok(SpectrumResult {
        k: k_grid.to_vec(),
        power,
        stderr,
        reference: standard_spectrum(ip.hubble),
    })
}

/// The standard horizon-crossing spectrum (H/2π)².
pub fn standard_spectrum(hubble: f64) -> f64 {
    (hubble / (2.0 * std::f64::consts::PI)).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn background() -> InflationParams {
        InflationParams {
            hubble: 1.0,
            eta_start: -20.0,
            eta_end: -0.05,
        }
    }

    #[test]
    fn analytic_mode_magnitudes() {
        // deep inside the horizon: |v| -> k^{-1/2}
        let k = 2.0;
        let v = analytic_mode(k, -1e4, 1.0);
        assert_abs_diff_eq!(v.norm(), k.powf(-0.5), epsilon = 1e-4);
        // horizon crossing k = H = 1, eta = -1: |1 + i| = sqrt(2)
        assert_abs_diff_eq!(analytic_mode(1.0, -1.0, 1.0).norm(), 2f64.sqrt(), epsilon = 1e-12);
        // super-horizon growth ~ 1/(k^{3/2}|eta|)
        let k = 0.5;
        for eta in [-0.01, -0.001] {
            let ratio = analytic_mode(k, eta, 1.0).norm() / (1.0 / (k.powf(1.5) * eta.abs()));
            assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
        }
    }

    #[test]
    fn analytic_derivative_consistent() {
        let (k, eta, h) = (1.3, -2.7, 1e-6);
        let num = (analytic_mode(k, eta + h, 1.0) - analytic_mode(k, eta - h, 1.0)) / (2.0 * h);
        let ana = analytic_mode_derivative(k, eta, 1.0);
        assert!((num - ana).norm() < 1e-7);
    }

    #[test]
    fn integrated_mode_matches_analytic_envelope() {
        let ip = background();
        for k in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let traj = integrate_mode(k, &ip, 1e-3).unwrap();
            for state in traj.iter().filter(|s| {
                let ke = (s.k * s.eta).abs();
                (0.1..=10.0).contains(&ke)
            }) {
                let expect = analytic_mode(k, state.eta, ip.hubble).norm();
                assert!(
                    (state.v.norm() / expect - 1.0).abs() < 0.01,
                    "k {k}, eta {}: {} vs {expect}",
                    state.eta,
                    state.v.norm()
                );
            }
        }
    }

    #[test]
    fn wronskian_conserved() {
        let ip = background();
        let traj = integrate_mode(1.0, &ip, 1e-3).unwrap();
        let w0 = traj[0].wronskian();
        assert!(w0.re.abs() < 1e-12); // purely imaginary
        for s in &traj {
            assert!((s.wronskian() - w0).norm() / w0.norm() < 1e-8);
        }
    }

    #[test]
    fn pump_off_is_free_oscillator() {
        // far sub-horizon: |v| stays at k^{-1/2}
        let ip = InflationParams {
            hubble: 1.0,
            eta_start: -2000.0,
            eta_end: -1900.0,
        };
        let k = 5.0;
        let traj = integrate_mode(k, &ip, 1e-3).unwrap();
        for s in traj.iter().step_by(1000) {
            assert!((s.v.norm() / k.powf(-0.5) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn kernel_identities() {
        // equal time: retarded vanishes, statistical is -1/eta^2 - 1
        for eta in [-0.3, -1.0, -2.5] {
            let (g_ret, g_stat) = evaluate_kernels(eta, eta);
            assert_abs_diff_eq!(g_ret, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g_stat, -1.0 / (eta * eta) - 1.0, epsilon = 1e-12);
        }
        // spot value
        let (g_ret, g_stat) = evaluate_kernels(-1.0, -2.0);
        assert_abs_diff_eq!(g_ret, -7.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g_stat, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn retarded_kernel_antisymmetric() {
        // the 1/(3 eta eta') weight is symmetric, so swapping the times
        // flips the sign of the whole retarded kernel
        for (a, b) in [(-1.0, -2.0), (-0.3, -1.7), (-5.0, -0.4)] {
            let (fwd, _) = evaluate_kernels(a, b);
            let (bwd, _) = evaluate_kernels(b, a);
            assert_abs_diff_eq!(fwd, -bwd, epsilon = 1e-12 * fwd.abs().max(1.0));
        }
    }

    #[test]
    fn zero_coupling_zero_amplitude() {
        let rp = ReheatingParams::new(0.0, 1.0, 1.0);
        let (mean, _) = reheating_langevin(1.0, &rp, &background(), 50, 1).unwrap();
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn random_acceleration_law() {
        // <phi^2> = q * dt^3 / 3 within 5%
        let rp = ReheatingParams {
            n_steps: 400,
            ..ReheatingParams::new(1.0, 1.0, 2.0)
        };
        let ip = background();
        let k = 1.0;
        let q = mode_noise_density(k, &rp, &ip);
        let (mean, _) = reheating_langevin(k, &rp, &ip, 20_000, 7).unwrap();
        let exact = q * rp.delta_t.powi(3) / 3.0;
        assert!((mean / exact - 1.0).abs() < 0.05, "{mean} vs {exact}");
    }

    #[test]
    fn amplitude_scales_as_phi0_fourth() {
        let ip = background();
        let rp1 = ReheatingParams::new(0.7, 1.0, 1.0);
        let rp2 = ReheatingParams::new(0.7, 2.0, 1.0);
        let (m1, s1) = reheating_langevin(1.0, &rp1, &ip, 5000, 3).unwrap();
        let (m2, s2) = reheating_langevin(1.0, &rp2, &ip, 5000, 3).unwrap();
        let ratio = m2 / m1;
        let rel = ((s1 / m1).powi(2) + (s2 / m2).powi(2)).sqrt();
        assert!((ratio - 16.0).abs() < 3.0 * 16.0 * rel, "ratio {ratio}");
    }

    #[test]
    fn amplitude_scales_as_lambda_squared() {
        let ip = background();
        let rp1 = ReheatingParams::new(0.5, 1.0, 1.0);
        let rp2 = ReheatingParams::new(1.0, 1.0, 1.0);
        let (m1, s1) = reheating_langevin(1.0, &rp1, &ip, 5000, 13).unwrap();
        let (m2, s2) = reheating_langevin(1.0, &rp2, &ip, 5000, 13).unwrap();
        let ratio = m2 / m1;
        let rel = ((s1 / m1).powi(2) + (s2 / m2).powi(2)).sqrt();
        assert!((ratio - 4.0).abs() < 3.0 * 4.0 * rel, "ratio {ratio}");
    }

    #[test]
    fn langevin_bit_reproducible() {
        let rp = ReheatingParams::new(1.0, 1.0, 1.0);
        let a = reheating_langevin(1.0, &rp, &background(), 200, 5).unwrap();
        let b = reheating_langevin(1.0, &rp, &background(), 200, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectrum_flat_and_positive() {
        let ip = background();
        let rp = ReheatingParams::new(1.0, 1.0, 1.0);
        let k_grid: Vec<f64> = (0..9).map(|i| 0.01 * 10f64.powf(i as f64 / 4.0)).collect();
        let spec = power_spectrum(&k_grid, &rp, &ip, 800, 99).unwrap();
        assert!(spec.power.iter().all(|p| *p >= 0.0));
        let mean_p = spec.power.iter().sum::<f64>() / spec.power.len() as f64;
        for (p, se) in spec.power.iter().zip(&spec.stderr) {
            assert!((p - mean_p).abs() < 4.0 * se, "p {p} vs mean {mean_p}");
        }
    }

    #[test]
    fn standard_spectrum_examples() {
        use std::f64::consts::PI;
        assert_abs_diff_eq!(standard_spectrum(2.0 * PI), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(standard_spectrum(1.0), 1.0 / (4.0 * PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(standard_spectrum(2.0) / standard_spectrum(1.0), 4.0, epsilon = 1e-12);
    }
}
