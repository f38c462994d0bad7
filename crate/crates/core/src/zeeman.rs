//! Hyperfine Zeeman structure at intermediate field (Breit-Rabi) for
//! J = 1/2, I = 1/2 ions, and the site-dependent coupling operator it
//! induces along a chain in a field gradient.
//!
//! The qutrit is the F = 1 triplet with the logical map
//! |0> = m_F = -1, |1> = m_F = 0, |2> = m_F = +1.

use serde::Serialize;

use crate::chain::{ChainSolution, TrapConfig};
use crate::constants::{HBAR, MU_B};
use crate::error::{Error, Result};
use crate::species::IonSpecies;

/// Level energies and transition data at a single field value.
#[derive(Debug, Clone, PartialEq)]
pub struct BreitRabiPoint {
    /// Field (T).
    pub b_field: f64,
    /// F = 1 level energies (J), by magnetic quantum number.
    pub e_m_minus1: f64,
    pub e_m0: f64,
    pub e_m_plus1: f64,
    /// F = 0 level energy (J).
    pub e_f0: f64,
    /// Transition angular frequencies (rad/s): |0>-|1> and |1>-|2>.
    pub omega01: f64,
    pub omega12: f64,
    /// Sum Delta = omega01 + omega12 and difference delta = omega01 - omega12.
    pub delta_sum: f64,
    pub delta_diff: f64,
    /// Analytic field derivatives (rad s^-1 T^-1).
    pub d_omega01_db: f64,
    pub d_omega12_db: f64,
    /// Coupling-operator diagonal per logical level (dimensionless, the
    /// g_J mu_B / hbar factor divided out). Idealized value (-1, 1/sqrt2, 1).
    pub m_diag: [f64; 3],
    /// Whether the root argument x lies in [0.5, 2], the region where the
    /// 1/sqrt2 idealization is meaningful.
    pub in_operating_range: bool,
}

fn check_species(species: &IonSpecies) -> Result<()> {
    species.validate()?;
    if species.nuclear_spin != 0.5 {
        return Err(Error::UnsupportedSpecies(format!(
            "{}: only nuclear spin 1/2 is supported, got {}",
            species.name, species.nuclear_spin
        )));
    }
    Ok(())
}

/// Breit-Rabi level energies and transition data at field `b` (T).
///
/// Uses the closed form for J = 1/2, I = 1/2. The stretched m = +-1 states
/// are exactly linear in the field; the two m = 0 levels repel through the
/// hyperfine gap.
pub fn breit_rabi_energies(species: &IonSpecies, b: f64) -> Result<BreitRabiPoint> {
    check_species(species)?;
    if b < 0.0 {
        return Err(Error::InvalidInput(format!("field must be >= 0, got {b}")));
    }
    let dw = HBAR * species.hyperfine_a;
    // stretched states carry g_J - g_I, the m = 0 pair mixes with g_J + g_I
    let x_lin = (species.g_j - species.g_i) * MU_B * b / dw;
    let x_mix = (species.g_j + species.g_i) * MU_B * b / dw;
    let root = (1.0 + x_mix * x_mix).sqrt();

    let e_m_plus1 = -dw / 4.0 + dw / 2.0 * (1.0 + x_lin);
    let e_m_minus1 = -dw / 4.0 + dw / 2.0 * (1.0 - x_lin);
    let e_m0 = -dw / 4.0 + dw / 2.0 * root;
    let e_f0 = -dw / 4.0 - dw / 2.0 * root;

    let omega01 = (e_m0 - e_m_minus1) / HBAR;
    let omega12 = (e_m_plus1 - e_m0) / HBAR;

    let d_lin = (species.g_j - species.g_i) * MU_B / HBAR; // d(Delta)/dB
    let d_mid = (species.g_j + species.g_i) * MU_B / HBAR * x_mix / root; // d(delta)/dB
    let d_omega01_db = 0.5 * (d_lin + d_mid);
    let d_omega12_db = 0.5 * (d_lin - d_mid);

    let norm = species.g_j * MU_B / HBAR;
    let m_diag = [-d_lin / norm, d_mid / norm, d_lin / norm];

    Ok(BreitRabiPoint {
        b_field: b,
        e_m_minus1,
        e_m0,
        e_m_plus1,
        e_f0,
        omega01,
        omega12,
        delta_sum: omega01 + omega12,
        delta_diff: omega01 - omega12,
        d_omega01_db,
        d_omega12_db,
        m_diag,
        in_operating_range: (0.5..=2.0).contains(&x_mix),
    })
}

/// Field at which the root argument x equals 1 (around 0.45 T for 171Yb+).
pub fn field_at_unit_x(species: &IonSpecies) -> Result<f64> {
    check_species(species)?;
    Ok(HBAR * species.hyperfine_a / ((species.g_j + species.g_i) * MU_B))
}

/// Analytic derivatives (d Delta/dB, d delta/dB, d omega01/dB, d omega12/dB).
pub fn transition_gradients(species: &IonSpecies, b: f64) -> Result<(f64, f64, f64, f64)> {
    let p = breit_rabi_energies(species, b)?;
    Ok((
        p.d_omega01_db + p.d_omega12_db,
        p.d_omega01_db - p.d_omega12_db,
        p.d_omega01_db,
        p.d_omega12_db,
    ))
}

/// Exact coupling-operator diagonal at field `b`, per logical level
/// (ascending), normalized by g_J mu_B / hbar.
pub fn m_operator(species: &IonSpecies, b: f64) -> Result<[f64; 3]> {
    Ok(breit_rabi_energies(species, b)?.m_diag)
}

/// Per-ion transition frequencies along a chain.
#[derive(Debug, Clone, Serialize)]
pub struct SitePoint {
    pub z_m: f64,
    #[serde(rename = "B_T")]
    pub b_t: f64,
    pub omega01_rad_s: f64,
    pub omega12_rad_s: f64,
    pub m_diag: [f64; 3],
}

/// Frequency table over chain sites plus nearest-neighbour differences.
#[derive(Debug, Clone, Serialize)]
pub struct SiteTable {
    pub sites: Vec<SitePoint>,
    /// omega01 difference between neighbouring ions (rad/s).
    pub d_omega01: Vec<f64>,
    /// omega12 difference between neighbouring ions (rad/s).
    pub d_omega12: Vec<f64>,
}

/// Evaluates the level structure at every ion position B(z) = B0 + b z.
pub fn site_frequencies(
    chain: &ChainSolution,
    species: &IonSpecies,
    trap: &TrapConfig,
) -> Result<SiteTable> {
    let mut sites = Vec::with_capacity(chain.z0.len());
    for &z in &chain.z0 {
        let p = breit_rabi_energies(species, trap.b0 + trap.b * z)?;
        sites.push(SitePoint {
            z_m: z,
            b_t: p.b_field,
            omega01_rad_s: p.omega01,
            omega12_rad_s: p.omega12,
            m_diag: p.m_diag,
        });
    }
    let d_omega01 = sites
        .windows(2)
        .map(|w| w[1].omega01_rad_s - w[0].omega01_rad_s)
        .collect();
    let d_omega12 = sites
        .windows(2)
        .map(|w| w[1].omega12_rad_s - w[0].omega12_rad_s)
        .collect();
    Ok(SiteTable {
        sites,
        d_omega01,
        d_omega12,
    })
}

/// Largest deviation of the middle coupling-operator entry over the chain
/// from its value at the chain center.
pub fn m_uniformity(chain: &ChainSolution, species: &IonSpecies, trap: &TrapConfig) -> Result<f64> {
    let center = m_operator(species, trap.b0)?[1];
    let mut eps: f64 = 0.0;
    for &z in &chain.z0 {
        let m = m_operator(species, trap.b0 + trap.b * z)?;
        eps = eps.max((m[1] - center).abs());
    }
    Ok(eps)
}
