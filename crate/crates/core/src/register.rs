//! Exact N-qutrit register simulation.
//!
//! The register index is base 3 with qutrit 0 as the most significant
//! digit. Products of diagonal ops (Z phases, coupling evolutions) stay in
//! a diagonal vector representation; the first non-diagonal factor promotes
//! the product to a dense matrix, which is sized for small registers only.
//! Diagonal programs stay cheap out to ten or more qutrits.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};
use crate::gates::{self, Gate3, Subspace, M_IDEAL_DIAG};
use crate::program::{PulseOp, PulseProgram};

/// Dense matrices grow as 9^N; cap the register width for them.
pub const MAX_DENSE_QUTRITS: usize = 7;
/// Diagonal vectors grow as 3^N.
pub const MAX_DIAGONAL_QUTRITS: usize = 14;

pub fn dimension(n_qutrits: usize) -> usize {
    3usize.pow(n_qutrits as u32)
}

/// Base-3 digit of `index` for `ion`, qutrit 0 most significant.
pub fn digit(index: usize, ion: usize, n_qutrits: usize) -> usize {
    (index / 3usize.pow((n_qutrits - 1 - ion) as u32)) % 3
}

/// A unitary on the full register, diagonal or dense.
#[derive(Debug, Clone, PartialEq)]
pub enum RegisterUnitary {
    Diagonal { n_qutrits: usize, diag: Vec<C64> },
    Dense { n_qutrits: usize, matrix: DMatrix<C64> },
}

impl RegisterUnitary {
    pub fn identity(n_qutrits: usize) -> Result<Self> {
        check_diag_width(n_qutrits)?;
        Ok(RegisterUnitary::Diagonal {
            n_qutrits,
            diag: vec![C64::new(1.0, 0.0); dimension(n_qutrits)],
        })
    }

    pub fn n_qutrits(&self) -> usize {
        match self {
            RegisterUnitary::Diagonal { n_qutrits, .. } => *n_qutrits,
            RegisterUnitary::Dense { n_qutrits, .. } => *n_qutrits,
        }
    }

    pub fn dim(&self) -> usize {
        dimension(self.n_qutrits())
    }

    pub fn is_diagonal_rep(&self) -> bool {
        matches!(self, RegisterUnitary::Diagonal { .. })
    }

    /// Diagonal entries when the representation is diagonal.
    pub fn diagonal(&self) -> Option<&[C64]> {
        match self {
            RegisterUnitary::Diagonal { diag, .. } => Some(diag),
            RegisterUnitary::Dense { .. } => None,
        }
    }

    /// Largest off-diagonal magnitude (zero for the diagonal rep).
    pub fn off_diagonal_max(&self) -> f64 {
        match self {
            RegisterUnitary::Diagonal { .. } => 0.0,
            RegisterUnitary::Dense { matrix, .. } => {
                let d = matrix.nrows();
                let mut m: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            m = m.max(matrix[(i, j)].norm());
                        }
                    }
                }
                m
            }
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        match self {
            RegisterUnitary::Dense { matrix, .. } => Ok(matrix.clone()),
            RegisterUnitary::Diagonal { n_qutrits, diag } => {
                check_dense_width(*n_qutrits)?;
                let d = diag.len();
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    m[(i, i)] = diag[i];
                }
                Ok(m)
            }
        }
    }

    /// Chronological composition: `self` applied first, `next` after.
    pub fn followed_by(&self, next: &RegisterUnitary) -> Result<RegisterUnitary> {
        if self.n_qutrits() != next.n_qutrits() {
            return Err(Error::DimensionMismatch {
                left: self.n_qutrits(),
                right: next.n_qutrits(),
            });
        }
        let n = self.n_qutrits();
        match (self, next) {
            (
                RegisterUnitary::Diagonal { diag: a, .. },
                RegisterUnitary::Diagonal { diag: b, .. },
            ) => Ok(RegisterUnitary::Diagonal {
                n_qutrits: n,
                diag: a.iter().zip(b).map(|(x, y)| x * y).collect(),
            }),
            (RegisterUnitary::Diagonal { diag, .. }, RegisterUnitary::Dense { matrix, .. }) => {
                // scale columns of the later dense factor
                let mut m = matrix.clone();
                for (j, d) in diag.iter().enumerate() {
                    for i in 0..m.nrows() {
                        m[(i, j)] *= d;
                    }
                }
                Ok(RegisterUnitary::Dense { n_qutrits: n, matrix: m })
            }
            (RegisterUnitary::Dense { matrix, .. }, RegisterUnitary::Diagonal { diag, .. }) => {
                // scale rows by the later diagonal factor
                let mut m = matrix.clone();
                for (i, d) in diag.iter().enumerate() {
                    for j in 0..m.ncols() {
                        m[(i, j)] *= d;
                    }
                }
                Ok(RegisterUnitary::Dense { n_qutrits: n, matrix: m })
            }
            (RegisterUnitary::Dense { matrix: a, .. }, RegisterUnitary::Dense { matrix: b, .. }) => {
                Ok(RegisterUnitary::Dense {
                    n_qutrits: n,
                    matrix: b * a,
                })
            }
        }
    }

    /// Max-entry deviation of U^dag U from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        match self {
            RegisterUnitary::Diagonal { diag, .. } => diag
                .iter()
                .map(|d| (d.norm() - 1.0).abs())
                .fold(0.0, f64::max),
            RegisterUnitary::Dense { matrix, .. } => {
                let p = matrix.adjoint() * matrix;
                let d = p.nrows();
                let mut dev: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let t = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                        dev = dev.max((p[(i, j)] - t).norm());
                    }
                }
                dev
            }
        }
    }

    pub fn max_entry_deviation(&self, other: &RegisterUnitary) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let d = self.dim();
        let entry = |u: &RegisterUnitary, i: usize, j: usize| -> C64 {
            match u {
                RegisterUnitary::Diagonal { diag, .. } => {
                    if i == j {
                        diag[i]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }
                RegisterUnitary::Dense { matrix, .. } => matrix[(i, j)],
            }
        };
        let mut dev: f64 = 0.0;
        if self.is_diagonal_rep() && other.is_diagonal_rep() {
            for i in 0..d {
                dev = dev.max((entry(self, i, i) - entry(other, i, i)).norm());
            }
        } else {
            for i in 0..d {
                for j in 0..d {
                    dev = dev.max((entry(self, i, j) - entry(other, i, j)).norm());
                }
            }
        }
        Ok(dev)
    }
}

fn check_diag_width(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIAGONAL_QUTRITS {
        return Err(Error::InvalidInput(format!(
            "register width {n} outside 1..={MAX_DIAGONAL_QUTRITS}"
        )));
    }
    Ok(())
}

fn check_dense_width(n: usize) -> Result<()> {
    if n > MAX_DENSE_QUTRITS {
        return Err(Error::InvalidInput(format!(
            "dense representation limited to {MAX_DENSE_QUTRITS} qutrits, got {n}"
        )));
    }
    Ok(())
}

/// Embeds a single-qutrit gate at `ion`, identity elsewhere.
pub fn embed(gate: &Gate3, ion: usize, n_qutrits: usize) -> Result<RegisterUnitary> {
    check_diag_width(n_qutrits)?;
    if ion >= n_qutrits {
        return Err(Error::IonOutOfRange { index: ion, n_qutrits });
    }
    let dim = dimension(n_qutrits);
    if gate.is_diagonal(0.0) {
        let g = gate.matrix();
        let diag = (0..dim)
            .map(|idx| g[(digit(idx, ion, n_qutrits), digit(idx, ion, n_qutrits))])
            .collect();
        return Ok(RegisterUnitary::Diagonal { n_qutrits, diag });
    }
    check_dense_width(n_qutrits)?;
    let stride = 3usize.pow((n_qutrits - 1 - ion) as u32);
    let g = gate.matrix();
    let mut m = DMatrix::zeros(dim, dim);
    for idx in 0..dim {
        if digit(idx, ion, n_qutrits) != 0 {
            continue;
        }
        for a in 0..3 {
            for b in 0..3 {
                m[(idx + a * stride, idx + b * stride)] = g[(a, b)];
            }
        }
    }
    Ok(RegisterUnitary::Dense { n_qutrits, matrix: m })
}

/// Coupling evolution exp(-i theta M_a M_b) with diagonal M entries `m_diag`.
pub fn mm_pair(
    theta: f64,
    ion_a: usize,
    ion_b: usize,
    n_qutrits: usize,
    m_diag: &[f64; 3],
) -> Result<RegisterUnitary> {
    check_diag_width(n_qutrits)?;
    if ion_a >= n_qutrits {
        return Err(Error::IonOutOfRange { index: ion_a, n_qutrits });
    }
    if ion_b >= n_qutrits {
        return Err(Error::IonOutOfRange { index: ion_b, n_qutrits });
    }
    if ion_a == ion_b {
        return Err(Error::InvalidInput("MM pair needs distinct ions".into()));
    }
    let dim = dimension(n_qutrits);
    let diag = (0..dim)
        .map(|idx| {
            let phase = -theta
                * m_diag[digit(idx, ion_a, n_qutrits)]
                * m_diag[digit(idx, ion_b, n_qutrits)];
            C64::from_polar(1.0, phase)
        })
        .collect();
    Ok(RegisterUnitary::Diagonal { n_qutrits, diag })
}

/// Free evolution for `duration` seconds under the full coupling matrix,
/// exp(-i t sum_{a<b} J_ab M_a M_b) with J in rad/s.
pub fn mm_chain(
    duration: f64,
    coupling: &CouplingMatrix,
    n_qutrits: usize,
    m_diag: &[f64; 3],
) -> Result<RegisterUnitary> {
    check_diag_width(n_qutrits)?;
    if coupling.n_ions() != n_qutrits {
        return Err(Error::DimensionMismatch {
            left: coupling.n_ions(),
            right: n_qutrits,
        });
    }
    let dim = dimension(n_qutrits);
    let mut phases = vec![0.0f64; dim];
    for a in 0..n_qutrits {
        for b in (a + 1)..n_qutrits {
            let j_t = coupling.j[(a, b)] * duration;
            if j_t == 0.0 {
                continue;
            }
            for (idx, p) in phases.iter_mut().enumerate() {
                *p -= j_t * m_diag[digit(idx, a, n_qutrits)] * m_diag[digit(idx, b, n_qutrits)];
            }
        }
    }
    Ok(RegisterUnitary::Diagonal {
        n_qutrits,
        diag: phases.iter().map(|&p| C64::from_polar(1.0, p)).collect(),
    })
}

fn op_unitary(op: &PulseOp, n: usize) -> Result<RegisterUnitary> {
    match op {
        PulseOp::SingleQutrit { ion, sub, theta, phi } => {
            let g = match sub {
                Subspace::S01 => gates::u01(*theta, *phi),
                Subspace::S12 => gates::u12(*theta, *phi),
                Subspace::S02 => gates::u02(*theta, *phi),
            };
            embed(&g, *ion, n)
        }
        PulseOp::ZPhase { ion, sub, rho } => embed(&gates::z_rot(*sub, *rho), *ion, n),
        PulseOp::MMPair { ion_a, ion_b, theta } => {
            mm_pair(*theta, *ion_a, *ion_b, n, &M_IDEAL_DIAG)
        }
        PulseOp::MMChain { duration, coupling } => {
            mm_chain(*duration, coupling, n, &M_IDEAL_DIAG)
        }
        PulseOp::Measure => Err(Error::InvalidInput(
            "MEASURE has no unitary; sample with measure_register".into(),
        )),
    }
}

/// Runs a program into its register unitary; the first op is applied first.
/// A trailing MEASURE is skipped (sampling is a separate step).
pub fn run_program(program: &PulseProgram) -> Result<RegisterUnitary> {
    program.validate()?;
    let n = program.n_qutrits;
    let mut acc = RegisterUnitary::identity(n)?;
    for op in &program.ops {
        if matches!(op, PulseOp::Measure) {
            break;
        }
        acc = acc.followed_by(&op_unitary(op, n)?)?;
    }
    Ok(acc)
}

/// |tr(U^dag V)| / dim, invariant under a global phase.
pub fn fidelity_up_to_global_phase(u: &RegisterUnitary, v: &RegisterUnitary) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let d = u.dim();
    let tr: C64 = match (u, v) {
        (RegisterUnitary::Diagonal { diag: a, .. }, RegisterUnitary::Diagonal { diag: b, .. }) => {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        }
        (RegisterUnitary::Diagonal { diag: a, .. }, RegisterUnitary::Dense { matrix, .. }) => {
            (0..d).map(|i| a[i].conj() * matrix[(i, i)]).sum()
        }
        (RegisterUnitary::Dense { matrix, .. }, RegisterUnitary::Diagonal { diag: b, .. }) => {
            (0..d).map(|i| matrix[(i, i)].conj() * b[i]).sum()
        }
        (RegisterUnitary::Dense { matrix: a, .. }, RegisterUnitary::Dense { matrix: b, .. }) => {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    s += a[(j, i)].conj() * b[(j, i)];
                }
            }
            s
        }
    };
    Ok(tr.norm() / d as f64)
}

/// Result of matching a unitary to a target modulo per-qutrit phase gates.
#[derive(Debug, Clone)]
pub struct LocalPhaseMatch {
    pub matches: bool,
    /// Per-qutrit correction phases, gauge-fixed to zero on level 0.
    pub phases: Vec<[f64; 3]>,
    /// Fidelity after applying the corrections (before them if no match).
    pub fidelity: f64,
}

fn effective_diagonal(u: &RegisterUnitary, tol: f64) -> Option<Vec<C64>> {
    match u {
        RegisterUnitary::Diagonal { diag, .. } => Some(diag.clone()),
        RegisterUnitary::Dense { matrix, .. } => {
            if u.off_diagonal_max() <= tol {
                Some((0..matrix.nrows()).map(|i| matrix[(i, i)]).collect())
            } else {
                None
            }
        }
    }
}

/// Searches for per-qutrit diagonal corrections L_0 (x) ... (x) L_{N-1}
/// such that the corrected unitary reaches the target with infidelity at
/// most `tol`.
pub fn equal_up_to_local_phases(
    u: &RegisterUnitary,
    target: &RegisterUnitary,
    tol: f64,
) -> Result<LocalPhaseMatch> {
    if u.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: target.dim(),
        });
    }
    let n = u.n_qutrits();
    let (du, dt) = match (effective_diagonal(u, tol), effective_diagonal(target, tol)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            // structurally different; no local diagonal correction can help
            return Ok(LocalPhaseMatch {
                matches: false,
                phases: vec![],
                fidelity: fidelity_up_to_global_phase(u, target)?,
            });
        }
    };

    let residual = |idx: usize| (dt[idx] / du[idx]).arg();
    let r0 = residual(0);
    let mut phases = vec![[0.0f64; 3]; n];
    for (q, ph) in phases.iter_mut().enumerate() {
        let stride = 3usize.pow((n - 1 - q) as u32);
        for d in 1..3 {
            ph[d] = residual(d * stride) - r0;
        }
    }

    // verify against the full register
    let dim = dimension(n);
    let mut corrected = Vec::with_capacity(dim);
    for (idx, val) in du.iter().enumerate() {
        let mut phase = 0.0;
        for (q, ph) in phases.iter().enumerate() {
            phase += ph[digit(idx, q, n)];
        }
        corrected.push(val * C64::from_polar(1.0, phase));
    }
    let corrected = RegisterUnitary::Diagonal { n_qutrits: n, diag: corrected };
    let target_diag = RegisterUnitary::Diagonal { n_qutrits: n, diag: dt };
    let fidelity = fidelity_up_to_global_phase(&corrected, &target_diag)?;
    Ok(LocalPhaseMatch {
        matches: fidelity >= 1.0 - tol,
        phases,
        fidelity,
    })
}

/// Pure state of the register.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterState {
    pub n_qutrits: usize,
    pub amplitudes: Vec<C64>,
}

impl RegisterState {
    /// Computational basis state |d_0 d_1 ... >.
    pub fn basis(n_qutrits: usize, index: usize) -> Result<Self> {
        check_diag_width(n_qutrits)?;
        let dim = dimension(n_qutrits);
        if index >= dim {
            return Err(Error::InvalidInput(format!("basis index {index} >= {dim}")));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(RegisterState { n_qutrits, amplitudes })
    }

    pub fn from_amplitudes(n_qutrits: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_diag_width(n_qutrits)?;
        if amplitudes.len() != dimension(n_qutrits) {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: dimension(n_qutrits),
            });
        }
        let state = RegisterState { n_qutrits, amplitudes };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn apply(&self, u: &RegisterUnitary) -> Result<RegisterState> {
        if u.dim() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch {
                left: u.dim(),
                right: self.amplitudes.len(),
            });
        }
        let amplitudes = match u {
            RegisterUnitary::Diagonal { diag, .. } => self
                .amplitudes
                .iter()
                .zip(diag)
                .map(|(a, d)| a * d)
                .collect(),
            RegisterUnitary::Dense { matrix, .. } => {
                let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
                (matrix * v).iter().copied().collect()
            }
        };
        Ok(RegisterState {
            n_qutrits: self.n_qutrits,
            amplitudes,
        })
    }
}

/// Outcome counts of the two-step readout.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MeasurementCounts {
    pub shots: u64,
    pub seed: u64,
    /// counts[ion][level]
    pub per_ion: Vec<[u64; 3]>,
    /// Shots fluorescing in the first illumination (projected onto |2>).
    pub step1_bright: Vec<u64>,
    /// Shots fluorescing after the 1-2 pi-pulse (originally |1>).
    pub step2_bright: Vec<u64>,
}

/// Samples the two-step readout protocol with a seeded generator.
///
/// Step 1 illuminates the chain and detects ions projected onto |2>; a
/// pi-pulse on 1-2 then swaps |1> into the fluorescing level, so the second
/// illumination detects what was |1>, and dark-dark ions are |0>. Both
/// projections are in the computational basis, so the joint outcome
/// distribution is the Born distribution of the full base-3 string; the
/// sampler draws the string and translates it through the two fluorescence
/// patterns.
pub fn measure_register(state: &RegisterState, shots: u64, seed: u64) -> Result<MeasurementCounts> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(norm));
    }
    let n = state.n_qutrits;
    let dim = state.amplitudes.len();
    let mut cumulative = Vec::with_capacity(dim);
    let mut acc = 0.0;
    for a in &state.amplitudes {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let total = acc;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut per_ion = vec![[0u64; 3]; n];
    let mut step1_bright = vec![0u64; n];
    let mut step2_bright = vec![0u64; n];

    for _ in 0..shots {
        let x: f64 = rng.gen::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= x).min(dim - 1);
        for ion in 0..n {
            let d = digit(idx, ion, n);
            let bright1 = d == 2;
            // after the 1-2 pi-pulse the former |1> population fluoresces
            let bright2 = d == 1;
            if bright1 {
                step1_bright[ion] += 1;
            }
            if bright2 {
                step2_bright[ion] += 1;
            }
            let outcome = if bright1 {
                2
            } else if bright2 {
                1
            } else {
                0
            };
            per_ion[ion][outcome] += 1;
        }
    }
    Ok(MeasurementCounts {
        shots,
        seed,
        per_ion,
        step1_bright,
        step2_bright,
    })
}
