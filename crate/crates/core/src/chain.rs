//! Linear Coulomb chain mechanics: equilibrium positions, normal modes,
//! the gradient-induced pairwise coupling matrix and gradient feasibility
//! bounds.
//!
//! Lengths are expressed in units of the Coulomb length scale
//! gamma = (q^2 / 4 pi eps0 m nu1^2)^(1/3) wherever positions are
//! dimensionless; all frequencies are angular (rad/s).

use nalgebra::{DMatrix, DVector};

use crate::constants::{EPSILON_0, HBAR, MU_B};
use crate::error::{Error, Result};
use crate::species::IonSpecies;
use crate::zeeman;

const EQUILIBRIUM_TOL: f64 = 1e-13;
const MAX_NEWTON_ITERATIONS: usize = 200;

/// Static trap and field configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Axial trap angular frequency (rad/s).
    pub nu1: f64,
    /// Magnetic field offset at the trap center (T).
    pub b0: f64,
    /// Axial magnetic field gradient (T/m).
    pub b: f64,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 1 {
            return Err(Error::InvalidInput("n_ions must be >= 1".into()));
        }
        if !(self.nu1 > 0.0) {
            return Err(Error::InvalidInput(format!("nu1 must be > 0, got {}", self.nu1)));
        }
        if !(self.b >= 0.0) {
            return Err(Error::InvalidInput(format!("gradient b must be >= 0, got {}", self.b)));
        }
        Ok(())
    }
}

/// Solved chain: equilibrium, Hessian and normal modes.
#[derive(Debug, Clone)]
pub struct ChainSolution {
    /// Dimensionless equilibrium positions, ascending, sum zero.
    pub u: Vec<f64>,
    /// Length scale gamma (m).
    pub length_scale_gamma: f64,
    /// Positions in meters, z0 = gamma * u.
    pub z0: Vec<f64>,
    /// Dimensionless Hessian of the chain potential at equilibrium.
    pub hessian: DMatrix<f64>,
    /// Normal mode angular frequencies nu_l (rad/s), ascending; the first
    /// is the center-of-mass mode at nu1.
    pub mode_freqs: Vec<f64>,
    /// Orthogonal mode matrix; row l is the eigenvector of mode l.
    pub mode_matrix: DMatrix<f64>,
}

/// Symmetric pairwise coupling matrix (rad/s), zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub j: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn n_ions(&self) -> usize {
        self.j.nrows()
    }

    /// Largest nearest-neighbour entry (rad/s).
    pub fn max_nearest_neighbour(&self) -> f64 {
        (0..self.n_ions().saturating_sub(1))
            .map(|i| self.j[(i, i + 1)])
            .fold(0.0, f64::max)
    }

    /// Smallest nearest-neighbour entry (rad/s).
    pub fn min_nearest_neighbour(&self) -> f64 {
        (0..self.n_ions().saturating_sub(1))
            .map(|i| self.j[(i, i + 1)])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Force balance residual of the dimensionless chain potential.
pub fn equilibrium_residual(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut res = vec![0.0; n];
    for i in 0..n {
        let mut r = u[i];
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = u[i] - u[j];
            let inv2 = 1.0 / (d * d);
            if j < i {
                r -= inv2;
            } else {
                r += inv2;
            }
        }
        res[i] = r;
    }
    res
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Solves the dimensionless equilibrium positions of `n_ions` ions.
///
/// Damped Newton iteration on the force balance, started from positions
/// spread uniformly over [-N/2, N/2] * 0.5. Iterates are symmetrized each
/// step so the returned positions are exactly antisymmetric.
pub fn solve_equilibrium(n_ions: usize) -> Result<Vec<f64>> {
    if n_ions < 1 {
        return Err(Error::InvalidInput("n_ions must be >= 1".into()));
    }
    if n_ions == 1 {
        return Ok(vec![0.0]);
    }
    let n = n_ions;
    let mut u: Vec<f64> = (0..n)
        .map(|i| 0.5 * (-(n as f64) / 2.0 + (n as f64) * i as f64 / (n as f64 - 1.0)))
        .collect();

    let mut res = equilibrium_residual(&u);
    let mut res_norm = max_abs(&res);
    for iteration in 0..MAX_NEWTON_ITERATIONS {
        if res_norm <= EQUILIBRIUM_TOL {
            return Ok(u);
        }
        let hess = hessian(&u)?;
        let rhs = DVector::from_column_slice(&res);
        let step = hess.lu().solve(&rhs).ok_or(Error::NonConvergence {
            iterations: iteration,
            residual: res_norm,
        })?;

        // backtracking damping on the residual norm
        let mut damping = 1.0;
        loop {
            let mut trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - damping * s).collect();
            symmetrize(&mut trial);
            if ordered(&trial) {
                let trial_res = equilibrium_residual(&trial);
                let trial_norm = max_abs(&trial_res);
                if trial_norm < res_norm || damping < 1e-6 {
                    u = trial;
                    res = trial_res;
                    res_norm = trial_norm;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-12 {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual: res_norm,
                });
            }
        }
    }
    if res_norm <= EQUILIBRIUM_TOL {
        Ok(u)
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_NEWTON_ITERATIONS,
            residual: res_norm,
        })
    }
}

fn symmetrize(u: &mut [f64]) {
    let n = u.len();
    for i in 0..n / 2 {
        let a = 0.5 * (u[i] - u[n - 1 - i]);
        u[i] = a;
        u[n - 1 - i] = -a;
    }
    if n % 2 == 1 {
        u[n / 2] = 0.0;
    }
}

fn ordered(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[0] < w[1])
}

/// Coulomb length scale gamma = (q^2 / (4 pi eps0 m nu1^2))^(1/3) in meters.
pub fn length_scale(species: &IonSpecies, nu1: f64) -> Result<f64> {
    species.validate()?;
    if !(nu1 > 0.0) {
        return Err(Error::InvalidInput(format!("nu1 must be > 0, got {nu1}")));
    }
    let q = species.charge;
    Ok((q * q / (4.0 * std::f64::consts::PI * EPSILON_0 * species.mass * nu1 * nu1)).cbrt())
}

/// Dimensionless Hessian of the chain potential at positions `u`.
pub fn hessian(u: &[f64]) -> Result<DMatrix<f64>> {
    let n = u.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = (u[i] - u[j]).abs();
            if d == 0.0 {
                return Err(Error::CoincidentPositions(i.min(j), i.max(j)));
            }
            let t = 2.0 / (d * d * d);
            a[(i, j)] = -t;
            diag += t;
        }
        a[(i, i)] = diag;
    }
    Ok(a)
}

/// Diagonalizes a dimensionless Hessian.
///
/// Returns mode frequency ratios nu_l/nu1 (ascending) and the orthogonal
/// mode matrix whose row l is the eigenvector of mode l with the sign fixed
/// so that its largest-magnitude entry (first such entry on ties) is
/// positive.
pub fn normal_modes(hessian: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = hessian.nrows();
    let eig = hessian.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut ratios = Vec::with_capacity(n);
    let mut d = DMatrix::zeros(n, n);
    for (l, &idx) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[idx];
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveMode(lambda));
        }
        ratios.push(lambda.sqrt());
        let col = eig.eigenvectors.column(idx);
        let mut pivot = 0;
        for k in 1..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            d[(l, k)] = sign * col[k];
        }
    }
    Ok((ratios, d))
}

/// Solves the full chain for a trap configuration.
pub fn solve_chain(species: &IonSpecies, trap: &TrapConfig) -> Result<ChainSolution> {
    trap.validate()?;
    let u = solve_equilibrium(trap.n_ions)?;
    let gamma = length_scale(species, trap.nu1)?;
    let z0: Vec<f64> = u.iter().map(|x| x * gamma).collect();
    let hess = hessian(&u)?;
    let (ratios, d) = normal_modes(&hess)?;
    let mode_freqs: Vec<f64> = ratios.iter().map(|r| r * trap.nu1).collect();
    Ok(ChainSolution {
        u,
        length_scale_gamma: gamma,
        z0,
        hessian: hess,
        mode_freqs,
        mode_matrix: d,
    })
}

/// Pairwise coupling matrix J_nm (rad/s) induced by the field gradient.
///
/// J_nm = (g_J mu_B b)^2 / (2 m hbar) * sum_l D_ln D_lm / nu_l^2 for n != m.
/// The mode-sum route is cross-checked against the Hessian-inverse route
/// before returning.
pub fn coupling_matrix(
    chain: &ChainSolution,
    species: &IonSpecies,
    trap: &TrapConfig,
) -> Result<CouplingMatrix> {
    let n = chain.u.len();
    if n != trap.n_ions {
        return Err(Error::DimensionMismatch {
            left: n,
            right: trap.n_ions,
        });
    }
    let pref = (species.g_j * MU_B * trap.b).powi(2) / (2.0 * species.mass * HBAR);

    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let mut s = 0.0;
            for l in 0..n {
                s += chain.mode_matrix[(l, a)] * chain.mode_matrix[(l, b)]
                    / (chain.mode_freqs[l] * chain.mode_freqs[l]);
            }
            let v = pref * s;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }

    // independent route through the inverse of the dimensionful Hessian
    if trap.b > 0.0 {
        let inv = chain
            .hessian
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Structural("Hessian is singular".into()))?;
        let pref_inv = (species.g_j * MU_B * trap.b).powi(2)
            / (2.0 * HBAR * species.mass * trap.nu1 * trap.nu1);
        let scale = pref_inv * inv.amax();
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let other = pref_inv * inv[(a, b)];
                if (j[(a, b)] - other).abs() > 1e-10 * scale {
                    return Err(Error::Structural(format!(
                        "coupling routes disagree at ({a},{b}): {} vs {}",
                        j[(a, b)],
                        other
                    )));
                }
            }
        }
    }
    Ok(CouplingMatrix { j })
}

/// Fitted minimum spacing of an N-ion chain, 2.018 gamma N^(-0.559) (m).
pub fn min_spacing(n_ions: usize, gamma: f64) -> Result<f64> {
    if n_ions < 2 {
        return Err(Error::InvalidInput("min_spacing needs n_ions >= 2".into()));
    }
    Ok(2.018 * gamma * (n_ions as f64).powf(-0.559))
}

/// Conservative equal-spacing estimate, 1.5 times the fitted minimum.
pub fn conservative_spacing(n_ions: usize, gamma: f64) -> Result<f64> {
    Ok(1.5 * min_spacing(n_ions, gamma)?)
}

/// One pair of gradient bounds (T/m). `b_max == None` means the constraint
/// is vacuous up to the probe cap.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GradientBounds {
    pub b_min_t_per_m: f64,
    pub b_max_t_per_m: Option<f64>,
}

impl GradientBounds {
    pub fn feasible(&self) -> bool {
        match self.b_max_t_per_m {
            Some(hi) => self.b_min_t_per_m <= hi,
            None => true,
        }
    }
}

/// Gradient feasibility window. The top-level bounds are the
/// first-principles ones; the closed-form printed bounds are carried
/// alongside under both unit readings since the source mixes conventions.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GradientWindow {
    pub b_min: f64,
    pub b_max: Option<f64>,
    pub feasible: bool,
    pub max_ions_estimate: usize,
    pub first_principles: GradientBounds,
    pub closed_form_nu1_rad_s: GradientBounds,
    pub closed_form_nu1_hz: GradientBounds,
}

/// Printed closed-form bounds with nu1 supplied in the caller's units.
pub fn closed_form_bounds(n_ions: usize, nu1: f64) -> GradientBounds {
    let n = n_ions as f64;
    let b_max = 0.03 * n.powf(-0.441) * nu1.powf(2.0 / 3.0);
    let b_min = 1.5e-9 * nu1.powf(5.0 / 3.0) * (3.2 * n.powf(0.559) + 0.5 * n.powf(1.559));
    GradientBounds {
        b_min_t_per_m: b_min,
        b_max_t_per_m: Some(b_max),
    }
}

/// Across-chain spread of the middle coupling-operator entry at gradient `b`.
fn middle_entry_spread(chain: &ChainSolution, species: &IonSpecies, b0: f64, b: f64) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &z in &chain.z0 {
        let m = zeeman::m_operator(species, b0 + b * z)?;
        lo = lo.min(m[1]);
        hi = hi.max(m[1]);
    }
    Ok(hi - lo)
}

/// Smallest nearest-neighbour 0-1 transition separation at gradient `b`.
fn min_site_separation(chain: &ChainSolution, species: &IonSpecies, b0: f64, b: f64) -> Result<f64> {
    let mut min_sep = f64::INFINITY;
    let mut prev: Option<f64> = None;
    for &z in &chain.z0 {
        let p = zeeman::breit_rabi_energies(species, b0 + b * z)?;
        if let Some(w) = prev {
            min_sep = min_sep.min(p.omega01 - w);
        }
        prev = Some(p.omega01);
    }
    Ok(min_sep)
}

fn motional_band(chain: &ChainSolution) -> f64 {
    2.0 * chain.mode_freqs[chain.mode_freqs.len() - 1] + chain.mode_freqs[0]
}

/// Gradient beyond which the chain-edge field leaves the operating region
/// of the linear-gradient model; used to cap the feasibility probes.
fn probe_cap(chain: &ChainSolution, b0: f64) -> f64 {
    let z_edge = chain.z0.last().copied().unwrap_or(0.0).abs();
    if z_edge == 0.0 {
        1e9
    } else {
        0.5 * b0 / z_edge
    }
}

fn first_principles_bounds(
    chain: &ChainSolution,
    species: &IonSpecies,
    b0: f64,
    epsilon_m: f64,
) -> Result<GradientBounds> {
    let cap = probe_cap(chain, b0);
    let n = chain.u.len();

    // upper bound: across-chain spread of the middle entry stays <= eps_M
    let b_max = if n < 2 || middle_entry_spread(chain, species, b0, cap)? <= epsilon_m {
        None
    } else {
        let mut lo = 0.0;
        let mut hi = cap;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if middle_entry_spread(chain, species, b0, mid)? > epsilon_m {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(lo)
    };

    // lower bound: neighbour frequency separation clears the motional band
    let b_min = if n < 2 {
        0.0
    } else {
        let band = motional_band(chain);
        if min_site_separation(chain, species, b0, cap)? < band {
            // not addressable even at the cap
            f64::INFINITY
        } else {
            let mut lo = 0.0;
            let mut hi = cap;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if min_site_separation(chain, species, b0, mid)? >= band {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };

    Ok(GradientBounds {
        b_min_t_per_m: b_min,
        b_max_t_per_m: b_max,
    })
}

fn feasible_at(species: &IonSpecies, trap: &TrapConfig, n: usize, epsilon_m: f64) -> Result<bool> {
    let probe = TrapConfig { n_ions: n, ..trap.clone() };
    let chain = solve_chain(species, &probe)?;
    if trap.b > 0.0 {
        let spread_ok = middle_entry_spread(&chain, species, trap.b0, trap.b)? <= epsilon_m;
        let sep_ok =
            min_site_separation(&chain, species, trap.b0, trap.b)? >= motional_band(&chain);
        Ok(spread_ok && sep_ok)
    } else {
        let bounds = first_principles_bounds(&chain, species, trap.b0, epsilon_m)?;
        Ok(bounds.feasible())
    }
}

const MAX_IONS_SCAN: usize = 60;

/// Computes the gradient feasibility window for `trap.n_ions` ions.
///
/// Returns both the first-principles bounds (authoritative; exact level
/// structure against the across-chain tolerance `epsilon_m` and the exact
/// motional band) and the printed closed forms evaluated literally with
/// nu1 read in rad/s and in Hz.
pub fn gradient_window(
    species: &IonSpecies,
    trap: &TrapConfig,
    epsilon_m: f64,
) -> Result<GradientWindow> {
    trap.validate()?;
    if !(epsilon_m > 0.0 && epsilon_m < 1.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon_M must lie in (0, 1), got {epsilon_m}"
        )));
    }
    let chain = solve_chain(species, trap)?;
    let fp = first_principles_bounds(&chain, species, trap.b0, epsilon_m)?;

    let mut max_ions = 1;
    for n in 2..=MAX_IONS_SCAN {
        if feasible_at(species, trap, n, epsilon_m)? {
            max_ions = n;
        }
    }

    Ok(GradientWindow {
        b_min: fp.b_min_t_per_m,
        b_max: fp.b_max_t_per_m,
        feasible: fp.feasible(),
        max_ions_estimate: max_ions,
        first_principles: fp,
        closed_form_nu1_rad_s: closed_form_bounds(trap.n_ions, trap.nu1),
        closed_form_nu1_hz: closed_form_bounds(trap.n_ions, trap.nu1 / std::f64::consts::TAU),
    })
}

/// Worst-mode ratio of the gradient coupling strength to the motional
/// ground-state energy; values well below 1 justify treating the gradient
/// term as a perturbation on the modes.
pub fn perturbation_ratio(
    chain: &ChainSolution,
    species: &IonSpecies,
    trap: &TrapConfig,
) -> Result<f64> {
    if trap.b == 0.0 {
        return Ok(0.0);
    }
    let m = zeeman::m_operator(species, trap.b0)?;
    let m_max = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    // full physical derivative entry (rad/s per meter)
    let dzdz_max = m_max * species.g_j * MU_B * trap.b / HBAR;
    let n = chain.u.len();
    let mut worst: f64 = 0.0;
    for l in 0..n {
        let nu_l = chain.mode_freqs[l];
        let q_zpf = (HBAR / (2.0 * species.mass * nu_l)).sqrt();
        let row_sum: f64 = (0..n).map(|k| chain.mode_matrix[(l, k)]).sum();
        worst = worst.max(dzdz_max * row_sum.abs() * q_zpf / nu_l);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn yb_trap(n: usize, b: f64) -> (IonSpecies, TrapConfig) {
        (
            IonSpecies::yb171(),
            TrapConfig {
                n_ions: n,
                nu1: std::f64::consts::TAU * 200e3,
                b0: 0.45,
                b,
            },
        )
    }

    #[test]
    fn single_ion_at_center() {
        assert_eq!(solve_equilibrium(1).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_ion_analytic_positions() {
        // force balance root at +-(1/2)^(2/3)
        let expected = 0.5f64.powf(2.0 / 3.0);
        let u = solve_equilibrium(2).unwrap();
        assert_abs_diff_eq!(u[0], -expected, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], expected, epsilon = 1e-12);
    }

    #[test]
    fn three_ion_analytic_positions() {
        // outer ions at +-(5/4)^(1/3)
        let expected = 1.25f64.cbrt();
        let u = solve_equilibrium(3).unwrap();
        assert_abs_diff_eq!(u[0], -expected, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[2], expected, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_residual_and_symmetry_up_to_thirty() {
        for n in 1..=30 {
            let u = solve_equilibrium(n).unwrap();
            assert!(max_abs(&equilibrium_residual(&u)) <= 1e-12, "residual too large for N={n}");
            for i in 0..n {
                assert_eq!(u[i], -u[n - 1 - i], "antisymmetry broken at N={n}");
            }
            assert!(u.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn hessian_single_ion() {
        let h = hessian(&[0.0]).unwrap();
        assert_eq!(h[(0, 0)], 1.0);
    }

    #[test]
    fn hessian_two_ions_analytic() {
        let a = 0.5f64.powf(2.0 / 3.0);
        let h = hessian(&[-a, a]).unwrap();
        // |u1 - u2|^3 = 2 exactly
        assert_abs_diff_eq!(h[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(0, 1)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 0)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 1)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hessian_row_sums_minus_identity_vanish() {
        for n in [2usize, 4, 7, 12] {
            let u = solve_equilibrium(n).unwrap();
            let h = hessian(&u).unwrap();
            for i in 0..n {
                let row: f64 = (0..n).map(|j| h[(i, j)]).sum();
                assert_abs_diff_eq!(row - 1.0, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hessian_rejects_coincident_positions() {
        assert!(matches!(
            hessian(&[0.3, 0.3]),
            Err(Error::CoincidentPositions(0, 1))
        ));
    }

    #[test]
    fn two_ion_modes() {
        let u = solve_equilibrium(2).unwrap();
        let (ratios, _) = normal_modes(&hessian(&u).unwrap()).unwrap();
        assert_abs_diff_eq!(ratios[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ratios[1], 3.0f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn three_ion_modes() {
        let u = solve_equilibrium(3).unwrap();
        let (ratios, _) = normal_modes(&hessian(&u).unwrap()).unwrap();
        assert_abs_diff_eq!(ratios[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ratios[1], 3.0f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(ratios[2], (29.0f64 / 5.0).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn mode_matrix_orthogonal_and_reconstructs_hessian() {
        for n in [2usize, 5, 10] {
            let u = solve_equilibrium(n).unwrap();
            let h = hessian(&u).unwrap();
            let (ratios, d) = normal_modes(&h).unwrap();
            let gram = &d.transpose() * &d;
            let mut dev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((gram[(i, j)] - target).abs());
                }
            }
            assert!(dev <= 1e-12, "orthogonality deviation {dev} at N={n}");

            let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                ratios.iter().map(|r| r * r),
            ));
            let rebuilt = d.transpose() * lambda * &d;
            let mut rdev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    rdev = rdev.max((rebuilt[(i, j)] - h[(i, j)]).abs());
                }
            }
            assert!(rdev <= 1e-10, "reconstruction deviation {rdev} at N={n}");
        }
    }

    #[test]
    fn normal_modes_rejects_indefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(normal_modes(&m), Err(Error::NonPositiveMode(_))));
    }

    #[test]
    fn yb_length_scale() {
        let gamma = length_scale(&IonSpecies::yb171(), std::f64::consts::TAU * 200e3).unwrap();
        assert!((gamma - 8.0e-6).abs() < 0.1e-6, "gamma = {gamma}");
    }

    #[test]
    fn length_scale_power_laws() {
        let s = IonSpecies::yb171();
        let nu = std::f64::consts::TAU * 200e3;
        let g1 = length_scale(&s, nu).unwrap();
        let g4 = length_scale(&s, 4.0 * nu).unwrap();
        assert_abs_diff_eq!(g4 / g1, 4.0f64.powf(-2.0 / 3.0), epsilon = 1e-12);

        let mut heavy = s.clone();
        heavy.mass *= 2.0;
        let gh = length_scale(&heavy, nu).unwrap();
        assert_abs_diff_eq!(gh / g1, 2.0f64.powf(-1.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn coupling_routes_agree_for_two_ions() {
        let (species, trap) = yb_trap(2, 120.0);
        let chain = solve_chain(&species, &trap).unwrap();
        let j = coupling_matrix(&chain, &species, &trap).unwrap();
        // analytic 2x2 inverse of [[2,-1],[-1,2]] has off-diagonal 1/3
        let pref = (species.g_j * MU_B * trap.b).powi(2)
            / (2.0 * HBAR * species.mass * trap.nu1 * trap.nu1);
        assert!((j.j[(0, 1)] - pref / 3.0).abs() <= 1e-12 * pref);
    }

    #[test]
    fn coupling_zero_without_gradient() {
        let (species, trap) = yb_trap(4, 0.0);
        let chain = solve_chain(&species, &trap).unwrap();
        let j = coupling_matrix(&chain, &species, &trap).unwrap();
        assert_eq!(j.j.amax(), 0.0);
    }

    #[test]
    fn coupling_symmetric_nonnegative_and_b_squared() {
        let (species, trap) = yb_trap(6, 60.0);
        let chain = solve_chain(&species, &trap).unwrap();
        let j1 = coupling_matrix(&chain, &species, &trap).unwrap();
        let trap2 = TrapConfig { b: 120.0, ..trap.clone() };
        let j2 = coupling_matrix(&chain, &species, &trap2).unwrap();
        for a in 0..6 {
            assert_eq!(j1.j[(a, a)], 0.0);
            for b in 0..6 {
                assert_eq!(j1.j[(a, b)], j1.j[(b, a)]);
                assert!(j1.j[(a, b)] >= 0.0);
                // J scales exactly as b^2
                assert_abs_diff_eq!(j2.j[(a, b)], 4.0 * j1.j[(a, b)], epsilon = 1e-20);
            }
        }
    }

    #[test]
    fn ten_ion_nearest_neighbour_coupling_near_reported_value() {
        let (species, trap) = yb_trap(10, 120.0);
        let chain = solve_chain(&species, &trap).unwrap();
        let j = coupling_matrix(&chain, &species, &trap).unwrap();
        let target = std::f64::consts::TAU * 1.2e3;
        assert!((j.max_nearest_neighbour() - target).abs() <= 0.2 * target);
        assert!((j.min_nearest_neighbour() - target).abs() <= 0.2 * target);
    }

    #[test]
    fn min_spacing_formula_and_monotonicity() {
        let gamma = 8.0e-6;
        let d2 = min_spacing(2, gamma).unwrap();
        assert!((d2 - 1.10e-5).abs() < 0.02e-5, "d2 = {d2}");
        let mut prev = d2;
        for n in 3..=30 {
            let d = min_spacing(n, gamma).unwrap();
            assert!(d < prev);
            prev = d;
        }
        assert_abs_diff_eq!(
            conservative_spacing(2, gamma).unwrap(),
            1.5 * d2,
            epsilon = 1e-20
        );
    }

    #[test]
    fn min_spacing_tracks_exact_gap() {
        let gamma = 8.014e-6;
        for n in [5usize, 10] {
            let u = solve_equilibrium(n).unwrap();
            let exact = u
                .windows(2)
                .map(|w| (w[1] - w[0]) * gamma)
                .fold(f64::INFINITY, f64::min);
            let fitted = min_spacing(n, gamma).unwrap();
            assert!(
                (fitted - exact).abs() <= 0.25 * exact,
                "N={n}: fitted {fitted} vs exact {exact}"
            );
        }
    }

    #[test]
    fn gradient_window_ten_ions() {
        let (species, trap) = yb_trap(10, 120.0);
        let w = gradient_window(&species, &trap, 0.01).unwrap();
        assert!(w.feasible);
        // endpoints within a factor of two of the reported 30..200 T/m
        assert!(w.b_min >= 15.0 && w.b_min <= 60.0, "b_min = {}", w.b_min);
        let b_max = w.b_max.unwrap();
        assert!((100.0..=400.0).contains(&b_max), "b_max = {b_max}");
        assert!(
            (25..=35).contains(&w.max_ions_estimate),
            "max ions = {}",
            w.max_ions_estimate
        );
    }

    #[test]
    fn gradient_window_vacuous_for_loose_tolerance() {
        let (species, trap) = yb_trap(4, 120.0);
        let w = gradient_window(&species, &trap, 0.999).unwrap();
        assert_eq!(w.b_max, None);
        assert!(w.feasible);
    }

    #[test]
    fn gradient_window_rejects_bad_epsilon() {
        let (species, trap) = yb_trap(3, 120.0);
        assert!(gradient_window(&species, &trap, 0.0).is_err());
        assert!(gradient_window(&species, &trap, 1.0).is_err());
    }

    #[test]
    fn perturbation_ratio_properties() {
        let (species, trap) = yb_trap(10, 120.0);
        let chain = solve_chain(&species, &trap).unwrap();

        let zero_trap = TrapConfig { b: 0.0, ..trap.clone() };
        assert_eq!(perturbation_ratio(&chain, &species, &zero_trap).unwrap(), 0.0);

        let r1 = perturbation_ratio(&chain, &species, &trap).unwrap();
        let double = TrapConfig { b: 240.0, ..trap.clone() };
        let r2 = perturbation_ratio(&chain, &species, &double).unwrap();
        assert_abs_diff_eq!(r2 / r1, 2.0, epsilon = 1e-12);

        // direct evaluation at the reference operating point; dominated by
        // the center-of-mass mode
        assert!((r1 - 0.6458).abs() < 0.01, "ratio = {r1}");
    }
}
