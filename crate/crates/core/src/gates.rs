//! Exact 3x3 qutrit gate constructors and SU(3) decomposition.
//!
//! All matrices act on kets in the ascending logical basis |0>, |1>, |2>.
//! Sources that print the basis in descending order are flipped at
//! construction. Rotations use the full-angle convention: cos(theta) on the
//! active diagonal and i e^{+-i phi} sin(theta) off it, so that
//! u(pi/2, 0) is a population-swapping pi-pulse and u(pi/4, pi/2) is the
//! Hadamard-like gate whose conjugation diagonalizes rotations.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};

/// Two-level subspace of the qutrit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subspace {
    S01,
    S12,
    S02,
}

impl Subspace {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subspace::S01 => "01",
            Subspace::S12 => "12",
            Subspace::S02 => "02",
        }
    }

    pub fn parse(s: &str) -> Option<Subspace> {
        match s {
            "01" => Some(Subspace::S01),
            "12" => Some(Subspace::S12),
            "02" => Some(Subspace::S02),
            _ => None,
        }
    }
}

impl std::fmt::Display for Subspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single-qutrit unitary in the ascending logical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate3(pub Matrix3<C64>);

impl Gate3 {
    pub fn identity() -> Self {
        Gate3(Matrix3::identity())
    }

    /// Wraps a matrix after checking unitarity to 1e-12.
    pub fn from_matrix(m: Matrix3<C64>) -> Result<Self> {
        let g = Gate3(m);
        let dev = g.unitarity_deviation();
        if dev > 1e-12 {
            return Err(Error::NotUnitary(dev));
        }
        Ok(g)
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Gate3 {
        Gate3(self.0.adjoint())
    }

    /// Max-entry deviation of U^dag U from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.0.adjoint() * self.0;
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                dev = dev.max((p[(i, j)] - target).norm());
            }
        }
        dev
    }

    pub fn max_entry_deviation(&self, other: &Gate3) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                dev = dev.max((self.0[(i, j)] - other.0[(i, j)]).norm());
            }
        }
        dev
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        for i in 0..3 {
            for j in 0..3 {
                if i != j && self.0[(i, j)].norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Serializes to the wire form: 3x3 array of [re, im] pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..3)
            .map(|i| (0..3).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        json!({
            "entries": rows,
            "basis": "ascending",
            "convention": "cos-theta",
        })
    }
}

impl std::ops::Mul for &Gate3 {
    type Output = Gate3;
    fn mul(self, rhs: &Gate3) -> Gate3 {
        Gate3(self.0 * rhs.0)
    }
}

fn rotation_on(lo: usize, hi: usize, theta: f64, phi: f64) -> Gate3 {
    let mut m = Matrix3::identity();
    let c = C64::new(theta.cos(), 0.0);
    let s = theta.sin();
    m[(lo, lo)] = c;
    m[(hi, hi)] = c;
    m[(lo, hi)] = C64::i() * C64::from_polar(s, -phi);
    m[(hi, lo)] = C64::i() * C64::from_polar(s, phi);
    Gate3(m)
}

/// Rotation on the |0>-|1> transition.
pub fn u01(theta: f64, phi: f64) -> Gate3 {
    rotation_on(0, 1, theta, phi)
}

/// Rotation on the |1>-|2> transition.
pub fn u12(theta: f64, phi: f64) -> Gate3 {
    rotation_on(1, 2, theta, phi)
}

/// Pi-pulse on a directly driven transition.
pub fn x_pulse(sub: Subspace) -> Gate3 {
    match sub {
        Subspace::S01 => u01(std::f64::consts::FRAC_PI_2, 0.0),
        Subspace::S12 => u12(std::f64::consts::FRAC_PI_2, 0.0),
        Subspace::S02 => u02(std::f64::consts::FRAC_PI_2, 0.0),
    }
}

/// Effective |0>-|2> rotation: the driven sandwich
/// u01(pi/2, 0) u12(theta, phi) u01(pi/2, 0), which swaps the 0-2
/// populations at theta = pi/2 but carries extra phases on |1>.
pub fn u02(theta: f64, phi: f64) -> Gate3 {
    let x = u01(std::f64::consts::FRAC_PI_2, 0.0);
    &(&x * &u12(theta, phi)) * &x
}

/// Diagonal phase rotation on a two-level subspace: phases e^{+i rho} on
/// the lower and e^{-i rho} on the upper of the named levels, identity on
/// the third. For 01 and 12 this equals the conjugation
/// H_ij u_ij(rho, 0) H_ij^dag with H_ij = u_ij(pi/4, pi/2); the 02 case is
/// the composite z01(rho) z12(rho).
pub fn z_rot(sub: Subspace, rho: f64) -> Gate3 {
    let e_plus = C64::from_polar(1.0, rho);
    let e_minus = C64::from_polar(1.0, -rho);
    let one = C64::new(1.0, 0.0);
    let m = match sub {
        Subspace::S01 => Matrix3::from_diagonal(&nalgebra::Vector3::new(e_plus, e_minus, one)),
        Subspace::S12 => Matrix3::from_diagonal(&nalgebra::Vector3::new(one, e_plus, e_minus)),
        Subspace::S02 => Matrix3::from_diagonal(&nalgebra::Vector3::new(e_plus, one, e_minus)),
    };
    Gate3(m)
}

/// Differential phase gate built from z rotations,
/// u_d(rho, sigma) = z02(rho) z01(sigma) = diag(e^{i(rho+sigma)}, e^{-i sigma}, e^{-i rho}).
pub fn u_d(rho: f64, sigma: f64) -> Gate3 {
    &z_rot(Subspace::S02, rho) * &z_rot(Subspace::S01, sigma)
}

/// Achieved diagonal phases of u_d in the target form
/// diag(e^{i rho'}, e^{i sigma'}, e^{-i(sigma' + rho')}).
fn u_d_phases(rho: f64, sigma: f64) -> (f64, f64) {
    let g = u_d(rho, sigma);
    (g.0[(0, 0)].arg(), g.0[(1, 1)].arg())
}

/// Linear map from (rho, sigma) to the achieved phases (rho', sigma'),
/// measured numerically from unit probes.
pub fn u_d_calibration() -> Matrix2<f64> {
    let (r1, s1) = u_d_phases(1.0, 0.0);
    let (r2, s2) = u_d_phases(0.0, 1.0);
    Matrix2::new(r1, r2, s1, s2)
}

/// Builds u_d hitting exact target phases diag(e^{i rho'}, e^{i sigma'}, ...)
/// by inverting the calibration map.
pub fn u_d_for_phases(rho_target: f64, sigma_target: f64) -> Result<Gate3> {
    let cal = u_d_calibration();
    let inv = cal
        .try_inverse()
        .ok_or_else(|| Error::Structural("u_d calibration map is singular".into()))?;
    let v = inv * nalgebra::Vector2::new(rho_target, sigma_target);
    Ok(u_d(v[0], v[1]))
}

/// Generalized Fourier transform: F|j> = (1/sqrt3) sum_l w^{l j} |l>,
/// w = e^{2 pi i / 3}.
pub fn fourier() -> Gate3 {
    let norm = 1.0 / 3.0f64.sqrt();
    let mut m = Matrix3::zeros();
    for l in 0..3 {
        for j in 0..3 {
            let phase = std::f64::consts::TAU * (l * j) as f64 / 3.0;
            m[(l, j)] = C64::from_polar(norm, phase);
        }
    }
    Gate3(m)
}

/// Idealized coupling-operator diagonal per ascending logical level.
pub const M_IDEAL_DIAG: [f64; 3] = [-1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0];

/// Idealized coupling operator as a real diagonal matrix (ascending basis).
pub fn m_ideal() -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(
        M_IDEAL_DIAG[0],
        M_IDEAL_DIAG[1],
        M_IDEAL_DIAG[2],
    ))
}

/// Diagonal Gell-Mann generator lambda_3, expressed in the ascending basis.
pub fn lambda3() -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, -1.0, 1.0))
}

/// Diagonal Gell-Mann generator lambda_8, expressed in the ascending basis.
pub fn lambda8() -> Matrix3<f64> {
    let s = 1.0 / 3.0f64.sqrt();
    Matrix3::from_diagonal(&nalgebra::Vector3::new(-2.0 * s, s, s))
}

/// Coefficients of m = a0 I + a3 lambda3 + a8 lambda8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GellMannCoeffs {
    pub a0: f64,
    pub a3: f64,
    pub a8: f64,
}

impl GellMannCoeffs {
    pub fn reconstruct(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.a0 + lambda3() * self.a3 + lambda8() * self.a8
    }
}

/// Projects a real diagonal matrix onto {I, lambda3, lambda8}.
pub fn gellmann_coeffs(m: &Matrix3<f64>) -> Result<GellMannCoeffs> {
    let mut off: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                off = off.max(m[(i, j)].abs());
            }
        }
    }
    if off > 0.0 {
        return Err(Error::NotDiagonal(off));
    }
    let (m0, m1, m2) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    Ok(GellMannCoeffs {
        a0: (m0 + m1 + m2) / 3.0,
        a3: (m2 - m1) / 2.0,
        a8: (m2 + m1 - 2.0 * m0) / (2.0 * 3.0f64.sqrt()),
    })
}

/// One factor of an SU(3) decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Su3Factor {
    Rotation { sub: Subspace, theta: f64, phi: f64 },
    Phase { sub: Subspace, rho: f64 },
}

impl Su3Factor {
    pub fn gate(&self) -> Gate3 {
        match *self {
            Su3Factor::Rotation { sub, theta, phi } => match sub {
                Subspace::S01 => u01(theta, phi),
                Subspace::S12 => u12(theta, phi),
                Subspace::S02 => u02(theta, phi),
            },
            Su3Factor::Phase { sub, rho } => z_rot(sub, rho),
        }
    }
}

/// Multiplies factors in list order.
pub fn reconstruct_factors(factors: &[Su3Factor]) -> Gate3 {
    let mut u = Gate3::identity();
    for f in factors {
        u = &u * &f.gate();
    }
    u
}

/// Angles of the rotation on rows (lo, hi) that zeroes entry (hi, col) of
/// `v` when applied from the left.
fn elimination_angles(v: &Matrix3<C64>, lo: usize, hi: usize, col: usize) -> (f64, f64) {
    let target = v[(hi, col)];
    let anchor = v[(lo, col)];
    if target.norm() < 1e-15 {
        return (0.0, 0.0);
    }
    if anchor.norm() < 1e-15 {
        return (std::f64::consts::FRAC_PI_2, 0.0);
    }
    let theta = (target.norm() / anchor.norm()).atan();
    let phi = (C64::i() * target / anchor).arg();
    (theta, phi)
}

/// Decomposes a unitary into at most three two-level rotations and a final
/// diagonal correction (two z rotations); the factor product reconstructs
/// the input up to a global phase.
pub fn su3_decompose(u: &Gate3) -> Result<Vec<Su3Factor>> {
    let dev = u.unitarity_deviation();
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }

    // Givens elimination of the lower triangle: (2,0) with a 1-2 rotation,
    // (1,0) with a 0-1 rotation, (2,1) with a 1-2 rotation.
    let plan = [
        (Subspace::S12, 1usize, 2usize, 0usize),
        (Subspace::S01, 0, 1, 0),
        (Subspace::S12, 1, 2, 1),
    ];
    let mut work = u.0;
    let mut rotations = Vec::new();
    for (sub, lo, hi, col) in plan {
        let (theta, phi) = elimination_angles(&work, lo, hi, col);
        let g = rotation_on(lo, hi, theta, phi);
        work = g.0 * work;
        rotations.push((sub, theta, phi));
    }

    // the remainder is diagonal by unitarity
    let mut off: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                off = off.max(work[(i, j)].norm());
            }
        }
    }
    if off > 1e-10 {
        return Err(Error::Structural(format!(
            "Givens elimination left off-diagonal residue {off:.3e}"
        )));
    }
    let d0 = work[(0, 0)].arg();
    let d1 = work[(1, 1)].arg();
    let d2 = work[(2, 2)].arg();
    let global = (d0 + d1 + d2) / 3.0;
    let rho = d0 - global;
    let sigma = global - d2;
    let _ = d1; // fixed by the other two up to the global phase

    let mut factors: Vec<Su3Factor> = rotations
        .iter()
        .rev()
        .map(|&(sub, theta, phi)| Su3Factor::Rotation {
            sub,
            theta,
            phi: phi + std::f64::consts::PI,
        })
        .collect();
    factors.push(Su3Factor::Phase { sub: Subspace::S01, rho });
    factors.push(Su3Factor::Phase { sub: Subspace::S12, rho: sigma });
    Ok(factors)
}

/// Distance up to a global phase, 1 - |tr(U^dag V)| / 3.
pub fn phase_distance(u: &Gate3, v: &Gate3) -> f64 {
    let tr = (u.0.adjoint() * v.0).trace();
    1.0 - tr.norm() / 3.0
}

/// Haar-random SU(3) element from a seeded generator: complex Gaussian
/// matrix, Gram-Schmidt, then column phases fixed by the R diagonal.
pub fn haar_random<R: Rng>(rng: &mut R) -> Gate3 {
    use rand_distr::StandardNormal;
    let mut cols: Vec<nalgebra::Vector3<C64>> = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut v = nalgebra::Vector3::from_fn(|_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        for q in &cols {
            let overlap = q.dotc(&v);
            v -= q * overlap;
        }
        let original = nalgebra::Vector3::from_fn(|i, _| v[i]);
        let r = original.norm();
        v /= C64::new(r, 0.0);
        cols.push(v);
    }
    let mut m = Matrix3::zeros();
    for (j, c) in cols.iter().enumerate() {
        for i in 0..3 {
            m[(i, j)] = c[i];
        }
    }
    Gate3(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    const PI: f64 = std::f64::consts::PI;
    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn reverse_basis(g: &Gate3) -> Matrix3<C64> {
        let mut r = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r[(i, j)] = g.0[(2 - i, 2 - j)];
            }
        }
        r
    }

    #[test]
    fn u01_zero_angle_is_identity() {
        for phi in [0.0, 1.3, -2.0] {
            assert!(u01(0.0, phi).max_entry_deviation(&Gate3::identity()) <= 1e-15);
        }
    }

    #[test]
    fn pi_pulse_swaps_populations() {
        let x = u01(PI / 2.0, 0.0);
        // |0> -> i|1>
        assert!((x.0[(1, 0)] - C64::i()).norm() <= 1e-15);
        assert!((x.0[(0, 0)]).norm() <= 1e-15);
        assert!((x.0[(2, 2)] - C64::new(1.0, 0.0)).norm() <= 1e-15);
    }

    #[test]
    fn hadamard_entries_have_equal_magnitude() {
        let h = u12(PI / 4.0, PI / 2.0);
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert!((h.0[(i, j)].norm() - S2).abs() <= 1e-15);
        }
    }

    #[test]
    fn printed_matrices_recovered_after_basis_reversal() {
        let (theta, phi): (f64, f64) = (0.73, -1.21);
        let c = C64::new(theta.cos(), 0.0);
        let sp = C64::i() * C64::from_polar(theta.sin(), phi);
        let sm = C64::i() * C64::from_polar(theta.sin(), -phi);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);

        // descending-basis print of the 0-1 rotation
        let printed_u01 =
            Matrix3::new(one, zero, zero, zero, c, sp, zero, sm, c);
        let flipped = reverse_basis(&u01(theta, phi));
        assert!((flipped - printed_u01).map(|e| e.norm()).max() <= 1e-15);

        // descending-basis print of the 1-2 rotation
        let printed_u12 =
            Matrix3::new(c, sp, zero, sm, c, zero, zero, zero, one);
        let flipped = reverse_basis(&u12(theta, phi));
        assert!((flipped - printed_u12).map(|e| e.norm()).max() <= 1e-15);

        // descending-basis print of the ideal coupling diagonal
        let m = m_ideal();
        assert_eq!(m[(2, 2)], 1.0);
        assert_eq!(m[(1, 1)], S2);
        assert_eq!(m[(0, 0)], -1.0);
    }

    #[test]
    fn z_rot_matches_conjugation_construction() {
        for (sub, lo, hi) in [(Subspace::S01, 0usize, 1usize), (Subspace::S12, 1, 2)] {
            for rho in [0.0, 0.37, -1.9, 2.7] {
                let h = rotation_on(lo, hi, PI / 4.0, PI / 2.0);
                let built = &(&h * &rotation_on(lo, hi, rho, 0.0)) * &h.adjoint();
                let direct = z_rot(sub, rho);
                assert!(
                    built.max_entry_deviation(&direct) <= 1e-14,
                    "mismatch for {sub} rho={rho}"
                );
            }
        }
    }

    #[test]
    fn z_rot_02_composite_is_diagonal_with_expected_phases() {
        for rho in [0.3, -0.9, 2.2] {
            let z = &z_rot(Subspace::S01, rho) * &z_rot(Subspace::S12, rho);
            assert!(z.is_diagonal(1e-15));
            assert!(z.max_entry_deviation(&z_rot(Subspace::S02, rho)) <= 1e-14);
            assert!((z.0[(0, 0)] - C64::from_polar(1.0, rho)).norm() <= 1e-14);
            assert!((z.0[(1, 1)] - C64::new(1.0, 0.0)).norm() <= 1e-14);
            assert!((z.0[(2, 2)] - C64::from_polar(1.0, -rho)).norm() <= 1e-14);
        }
    }

    #[test]
    fn u02_sandwich_behaviour() {
        // inner identity leaves only sandwich phases: diagonal
        assert!(u02(0.0, 1.1).is_diagonal(1e-15));
        // full population transfer 0 -> 2
        let g = u02(PI / 2.0, 0.0);
        assert!((g.0[(2, 0)].norm() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn u_d_identity_at_zero_and_calibration() {
        let g = u_d(0.0, 0.0);
        assert!(g.max_entry_deviation(&Gate3::identity()) <= 1e-15);

        let target = (0.3, -0.7);
        let g = u_d_for_phases(target.0, target.1).unwrap();
        assert!(g.is_diagonal(1e-15));
        assert!((g.0[(0, 0)].arg() - target.0).abs() <= 1e-10);
        assert!((g.0[(1, 1)].arg() - target.1).abs() <= 1e-10);
        assert!((g.0[(2, 2)].arg() - (-(target.0 + target.1))).abs() <= 1e-10);
    }

    #[test]
    fn fourier_column_and_inverse() {
        let f = fourier();
        for l in 0..3 {
            assert!((f.0[(l, 0)] - C64::new(1.0 / 3.0f64.sqrt(), 0.0)).norm() <= 1e-15);
        }
        assert!(f.unitarity_deviation() <= 1e-15);
    }

    #[test]
    fn fourier_power_structure() {
        let f = fourier();
        let f2 = &f * &f;
        let f3 = &f2 * &f;
        let f4 = &f3 * &f;
        // F^2 is the permutation fixing |0> and swapping |1>, |2>
        let mut perm = Matrix3::zeros();
        perm[(0, 0)] = C64::new(1.0, 0.0);
        perm[(1, 2)] = C64::new(1.0, 0.0);
        perm[(2, 1)] = C64::new(1.0, 0.0);
        assert!(f2.max_entry_deviation(&Gate3(perm)) <= 1e-14);
        // F^3 is the entrywise conjugate of F (equivalently F^dag)
        assert!(f3.max_entry_deviation(&f.adjoint()) <= 1e-14);
        // hence F has order four
        assert!(f4.max_entry_deviation(&Gate3::identity()) <= 1e-14);
    }

    #[test]
    fn gellmann_of_ideal_coupling() {
        let c = gellmann_coeffs(&m_ideal()).unwrap();
        assert!((c.a0 - 1.0 / (3.0 * 2.0f64.sqrt())).abs() <= 1e-15);
        assert!((c.a3 - (2.0f64.sqrt() - 1.0) / (2.0 * 2.0f64.sqrt())).abs() <= 1e-15);
        assert!((c.a8 - (1.0 + 3.0 * 2.0f64.sqrt()) / (2.0 * 6.0f64.sqrt())).abs() <= 1e-15);
        let back = c.reconstruct();
        assert!((back - m_ideal()).abs().max() <= 1e-12);
    }

    #[test]
    fn gellmann_identity_and_errors() {
        let c = gellmann_coeffs(&Matrix3::identity()).unwrap();
        assert_eq!((c.a0, c.a3, c.a8), (1.0, 0.0, 0.0));

        let mut bad = Matrix3::identity();
        bad[(0, 1)] = 0.1;
        assert!(matches!(gellmann_coeffs(&bad), Err(Error::NotDiagonal(_))));
    }

    #[test]
    fn gellmann_reconstructs_random_diagonals() {
        use rand::Rng as _;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ));
            let c = gellmann_coeffs(&d).unwrap();
            assert!((c.reconstruct() - d).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn permutation_pulse_cycles_diagonals() {
        let p1 = &x_pulse(Subspace::S01) * &x_pulse(Subspace::S12);
        let d = Gate3(Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
            C64::new(3.0, 0.0),
        )));
        let conj = &(&p1 * &d) * &p1.adjoint();
        let expect = Gate3(Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::new(3.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        )));
        assert!(conj.max_entry_deviation(&expect) <= 1e-14);
    }

    #[test]
    fn decompose_identity_gives_zero_angles() {
        let factors = su3_decompose(&Gate3::identity()).unwrap();
        let rebuilt = reconstruct_factors(&factors);
        assert!(phase_distance(&rebuilt, &Gate3::identity()) <= 1e-12);
        for f in factors {
            match f {
                Su3Factor::Rotation { theta, .. } => assert_eq!(theta, 0.0),
                Su3Factor::Phase { rho, .. } => assert!(rho.abs() <= 1e-15),
            }
        }
    }

    #[test]
    fn decompose_fourier() {
        let f = fourier();
        let factors = su3_decompose(&f).unwrap();
        assert!(phase_distance(&reconstruct_factors(&factors), &f) <= 1e-10);
    }

    #[test]
    fn decompose_haar_random() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(20240613);
        for _ in 0..100 {
            let u = haar_random(&mut rng);
            assert!(u.unitarity_deviation() <= 1e-12);
            let factors = su3_decompose(&u).unwrap();
            let rotations = factors
                .iter()
                .filter(|f| matches!(f, Su3Factor::Rotation { .. }))
                .count();
            assert!(rotations <= 3);
            assert!(factors.len() <= 5);
            assert!(phase_distance(&reconstruct_factors(&factors), &u) <= 1e-10);
        }
    }

    #[test]
    fn decompose_rejects_nonunitary() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = C64::new(2.0, 0.0);
        assert!(matches!(su3_decompose(&Gate3(m)), Err(Error::NotUnitary(_))));
    }

    proptest! {
        #[test]
        fn constructors_are_unitary(theta in -7.0f64..7.0, phi in -7.0f64..7.0) {
            prop_assert!(u01(theta, phi).unitarity_deviation() <= 1e-12);
            prop_assert!(u12(theta, phi).unitarity_deviation() <= 1e-12);
            prop_assert!(u02(theta, phi).unitarity_deviation() <= 1e-12);
            prop_assert!(u_d(theta, phi).unitarity_deviation() <= 1e-12);
        }

        #[test]
        fn z_rot_inverse_cancels(rho in -7.0f64..7.0) {
            for sub in [Subspace::S01, Subspace::S12, Subspace::S02] {
                let prod = &z_rot(sub, rho) * &z_rot(sub, -rho);
                prop_assert!(prod.max_entry_deviation(&Gate3::identity()) <= 1e-12);
            }
        }

        #[test]
        fn z_rot_is_diagonal_unit_modulus(rho in -7.0f64..7.0) {
            let z = z_rot(Subspace::S01, rho);
            prop_assert!(z.is_diagonal(0.0));
            for i in 0..3 {
                prop_assert!((z.0[(i, i)].norm() - 1.0).abs() <= 1e-15);
            }
        }
    }
}
