//! One-dimensional finite-difference Fokker–Planck solver for the meter
//! distribution, used as an independent oracle for the erf readout formula.
//!
//! ∂P/∂t = −∂[(γφ − λφ³/6 + bias)P]/∂φ + (ε/2)∂²P/∂φ², solved with a
//! conservative upwind flux and zero-flux boundaries, starting from a narrow
//! Gaussian at φ = 0.

use crate::measurement::ApparatusParams;
use crate::{CoreError, Result};

/// Normalized grid distribution of the order parameter.
#[derive(Debug, Clone)]
pub struct FpSolution {
    pub phi: Vec<f64>,
    pub density: Vec<f64>,
    pub dphi: f64,
}

impl FpSolution {
    /// ∫ P dφ over the whole grid.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dphi
    }

    /// ∫₀^∞ P dφ (the +1 readout probability).
    pub fn prob_positive(&self) -> f64 {
        self.phi
            .iter()
            .zip(&self.density)
            .filter(|(phi, _)| **phi > 0.0)
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.dphi
    }

    pub fn mean(&self) -> f64 {
        self.phi
            .iter()
            .zip(&self.density)
            .map(|(phi, p)| phi * p)
            .sum::<f64>()
            * self.dphi
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.phi
            .iter()
            .zip(&self.density)
            .map(|(phi, p)| (phi - mean).powi(2) * p)
            .sum::<f64>()
            * self.dphi
    }

    pub fn median(&self) -> f64 {
        let mut acc = 0.0;
        for (phi, p) in self.phi.iter().zip(&self.density) {
            acc += p * self.dphi;
            if acc >= 0.5 {
                return *phi;
            }
        }
        *self.phi.last().unwrap()
    }
}

fn drift(phi: f64, p: &ApparatusParams, bias: f64) -> f64 {
    p.gamma * phi - p.lambda / 6.0 * phi.powi(3) + bias
}

/// Solves the Fokker–Planck equation to time t and returns the grid
/// distribution. γ < 0 with λ = 0 (a stable Ornstein–Uhlenbeck well) is
/// accepted for benchmarking.
pub fn fokker_planck_solve(p: &ApparatusParams, bias: f64, t: f64) -> Result<FpSolution> {
    fokker_planck_solve_with_grid(p, bias, t, default_half_width(p), 601)
}

/// Half-width 3φ₊ for a double well, otherwise a few OU standard deviations.
pub fn default_half_width(p: &ApparatusParams) -> f64 {
    if p.gamma > 0.0 && p.lambda > 0.0 {
        3.0 * (6.0 * p.gamma / p.lambda).sqrt()
    } else {
        let sigma = (p.epsilon / (2.0 * p.gamma.abs().max(1e-12))).sqrt();
        (6.0 * sigma).max(1.0)
    }
}

pub fn fokker_planck_solve_with_grid(
    p: &ApparatusParams,
    bias: f64,
    t: f64,
    half_width: f64,
    n_cells: usize,
) -> Result<FpSolution> {
    if !(t >= 0.0) || !(half_width > 0.0) || n_cells < 11 {
        return Err(CoreError::InvalidInput(
            "need t >= 0, half_width > 0 and at least 11 cells".into(),
        ));
    }
    if !(p.epsilon > 0.0) {
        return Err(CoreError::InvalidInput(
            "Fokker-Planck solver needs epsilon > 0".into(),
        ));
    }
    let dphi = 2.0 * half_width / (n_cells - 1) as f64;
    let phi: Vec<f64> = (0..n_cells)
        .map(|i| -half_width + i as f64 * dphi)
        .collect();
    // narrow Gaussian initial condition at the symmetric point
    let sigma0 = 2.0 * dphi;
    let mut density: Vec<f64> = phi
        .iter()
        .map(|x| (-x * x / (2.0 * sigma0 * sigma0)).exp())
        .collect();
    let norm: f64 = density.iter().sum::<f64>() * dphi;
    density.iter_mut().for_each(|d| *d /= norm);

    let diff = p.epsilon / 2.0;
    let vmax = phi
        .iter()
        .map(|x| drift(*x, p, bias).abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let dt = 0.2 * (dphi * dphi / (2.0 * diff)).min(dphi / vmax);
    let n_steps = (t / dt).ceil() as usize;
    let dt = if n_steps > 0 { t / n_steps as f64 } else { dt };

    // face velocities at cell interfaces i+1/2
    let v_face: Vec<f64> = (0..n_cells - 1)
        .map(|i| drift(0.5 * (phi[i] + phi[i + 1]), p, bias))
        .collect();

    let mut flux = vec![0.0; n_cells + 1]; // zero-flux boundaries at ends
    let mut next = vec![0.0; n_cells];
    for step in 0..n_steps {
        for i in 0..n_cells - 1 {
            let v = v_face[i];
            let upwind = if v >= 0.0 { density[i] } else { density[i + 1] };
            flux[i + 1] = v * upwind - diff * (density[i + 1] - density[i]) / dphi;
        }
        for i in 0..n_cells {
            next[i] = density[i] - dt / dphi * (flux[i + 1] - flux[i]);
        }
        std::mem::swap(&mut density, &mut next);
        if step % 200 == 0 {
            if let Some(bad) = density.iter().find(|d| **d < -1e-8) {
                return Err(CoreError::StepSize(format!(
                    "instability detected: negative density {bad}"
                )));
            }
        }
    }
    if let Some(bad) = density.iter().find(|d| **d < -1e-8) {
        return Err(CoreError::StepSize(format!(
            "instability detected: negative density {bad}"
        )));
    }
    Ok(FpSolution { phi, density, dphi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn well_params(eps: f64) -> ApparatusParams {
        ApparatusParams {
            epsilon: eps,
            ..ApparatusParams::default()
        }
    }

    #[test]
    fn mass_conserved_and_symmetric_without_bias() {
        let p = well_params(0.3);
        let sol = fokker_planck_solve(&p, 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(sol.mass(), 1.0, epsilon = 1e-6);
        let n = sol.density.len();
        for i in 0..n / 2 {
            assert!(
                (sol.density[i] - sol.density[n - 1 - i]).abs() < 1e-8,
                "asymmetry at cell {i}"
            );
        }
        // symmetric-case median at the center cell
        assert!(sol.median().abs() <= sol.dphi + 1e-12);
    }

    #[test]
    fn ou_variance_matches_closed_form() {
        // lambda -> 0, gamma < 0: stable OU well with relaxation |gamma|
        let p = ApparatusParams {
            gamma: -1.0,
            lambda: 0.0,
            epsilon: 0.5,
            ..ApparatusParams::default()
        };
        let t = 1.3;
        let sol = fokker_planck_solve_with_grid(&p, 0.0, t, 4.0, 1601).unwrap();
        // Var(t) = sigma0^2 e^{2 gamma t} + (eps/2|gamma|)(1 - e^{2 gamma t})
        let sigma0 = 2.0 * sol.dphi;
        let decay = (2.0 * p.gamma * t).exp();
        let exact = sigma0 * sigma0 * decay + p.epsilon / (2.0 * p.gamma.abs()) * (1.0 - decay);
        assert!(
            (sol.variance() / exact - 1.0).abs() < 0.01,
            "variance {} vs {}",
            sol.variance(),
            exact
        );
    }

    #[test]
    fn biased_well_matches_erf_formula() {
        use crate::measurement::{default_eps_eff, p_plus_erf};
        // eps = 1 is the amplitude for which the erf formula is parameter-free
        let p = ApparatusParams {
            gamma: 4.0,
            lambda: 6.0,
            epsilon: 1.0,
            ..ApparatusParams::default()
        };
        for bias in [0.0, 0.5, 1.0, 2.0] {
            let sol = fokker_planck_solve(&p, bias, 1.5).unwrap();
            let delta = bias / p.gamma;
            let expected = p_plus_erf(delta, default_eps_eff(&p)).unwrap();
            let got = sol.prob_positive();
            assert!(
                (got - expected).abs() < 0.1 * expected.max(0.1),
                "bias {bias}: FP {got} vs erf {expected}"
            );
        }
    }

    #[test]
    fn rejects_zero_diffusion() {
        let p = well_params(0.0);
        assert!(fokker_planck_solve(&p, 0.0, 1.0).is_err());
    }
}
