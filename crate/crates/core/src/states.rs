//! Density matrices, the state families used by the bounds, entropies,
//! purifications and the three qubit noise channels.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    embed, hermitian_eig, kron, partial_trace, pauli_x, pauli_y, pauli_z, ComplexMatrix, C64,
};

/// Tolerance on Hermiticity, trace and negativity of a [`DensityMatrix`].
pub const STATE_TOL: f64 = 1e-9;
/// Eigenvalues at or below this are outside the support of a state.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// Hermitian, positive semidefinite, unit-trace operator on a tensor product space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || !matrix.is_square() || matrix.rows() != total {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix vs factor dims {dims:?}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let dev = matrix.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::OutOfRange(format!("trace {tr} is not 1")));
        }
        let matrix = matrix.hermitian_part();
        let spec = hermitian_eig(&matrix)?;
        spec.clamped_psd(STATE_TOL)?;
        Ok(Self { matrix, dims })
    }

    /// Normalises a PSD operator by its trace.
    pub fn from_unnormalized(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= 0.0 {
            return Err(Error::OutOfRange(format!("trace {tr} is not positive")));
        }
        Self::new(matrix.scale(1.0 / tr), dims)
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { matrix: ComplexMatrix::outer(&psi.amplitudes), dims: psi.dims.clone() }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self { matrix: ComplexMatrix::identity(d).scale(1.0 / d as f64), dims }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Eigenvalues (descending) with round-off negatives clamped to zero.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eig(&self.matrix)?.clamped_psd(STATE_TOL)
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { matrix: kron(&self.matrix, &other.matrix), dims }
    }

    /// Reduced state on the listed factors.
    pub fn reduce(&self, keep: &[usize]) -> Result<Self> {
        let m = partial_trace(&self.matrix, &self.dims, keep)?;
        let mut k = keep.to_vec();
        k.sort_unstable();
        k.dedup();
        let dims = if k.is_empty() { vec![1] } else { k.iter().map(|&i| self.dims[i]).collect() };
        Ok(Self { matrix: m.hermitian_part(), dims })
    }

    /// Expectation value `tr(ρ O)` (real part).
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<f64> {
        Ok(self.matrix.trace_product(op)?.re)
    }

    /// Convex mixture `t·self + (1−t)·other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("mixing states of different shape".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(format!("mixing weight {t}")));
        }
        Ok(Self {
            matrix: &self.matrix.scale(t) + &other.matrix.scale(1.0 - t),
            dims: self.dims.clone(),
        })
    }
}

/// Unit vector on a tensor product space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
    pub dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes vs dims {dims:?}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::OutOfRange(format!("state norm {norm}")));
        }
        Ok(Self { amplitudes, dims })
    }
}

fn bell_vector(sign: f64) -> Vec<C64> {
    let r = FRAC_1_SQRT_2;
    vec![C64::new(r, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(sign * r, 0.0)]
}

/// `|Φ⁺⟩ = (|00⟩+|11⟩)/√2`.
pub fn phi_plus() -> PureState {
    PureState { amplitudes: bell_vector(1.0), dims: vec![2, 2] }
}

/// `|Φ⁻⟩ = (|00⟩−|11⟩)/√2`.
pub fn phi_minus() -> PureState {
    PureState { amplitudes: bell_vector(-1.0), dims: vec![2, 2] }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(Error::OutOfRange(format!("{name} = {x} not in [0, 1]")));
    }
    Ok(())
}

/// Isotropic two-qubit state `(1−ν)|Φ⁺⟩⟨Φ⁺| + (ν/4)·𝟙`.
pub fn make_isotropic(nu: f64) -> Result<DensityMatrix> {
    check_unit("nu", nu)?;
    let phi = ComplexMatrix::outer(&bell_vector(1.0));
    let m = &phi.scale(1.0 - nu) + &ComplexMatrix::identity(4).scale(nu / 4.0);
    Ok(DensityMatrix { matrix: m, dims: vec![2, 2] })
}

/// `w₊|Φ⁺⟩⟨Φ⁺| + w₋|Φ⁻⟩⟨Φ⁻|`.
pub fn make_bell_diagonal(w_plus: f64, w_minus: f64) -> Result<DensityMatrix> {
    if w_plus < 0.0 || w_minus < 0.0 || (w_plus + w_minus - 1.0).abs() > 1e-12 {
        return Err(Error::OutOfRange(format!("Bell weights ({w_plus}, {w_minus})")));
    }
    let m = &ComplexMatrix::outer(&bell_vector(1.0)).scale(w_plus)
        + &ComplexMatrix::outer(&bell_vector(-1.0)).scale(w_minus);
    Ok(DensityMatrix { matrix: m, dims: vec![2, 2] })
}

/// `−x·log₂x`, continuous at 0.
pub(crate) fn eta(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Binary entropy in bits, with the argument clamped into [0, 1].
pub(crate) fn h2(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    eta(x) + eta(1.0 - x)
}

/// Binary Shannon entropy `H(x)` in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(h2(x))
}

/// Shannon entropy (bits) of a list of non-negative weights.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| eta(x)).sum()
}

/// `−tr X log₂ X` for a (possibly subnormalised) PSD operator.
pub fn operator_entropy(x: &ComplexMatrix) -> Result<f64> {
    let ev = hermitian_eig(x)?.clamped_psd(STATE_TOL)?;
    Ok(ev.into_iter().map(eta).sum())
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(rho.eigenvalues()?.into_iter().map(eta).sum())
}

/// Quantum relative entropy `D(ρ‖σ)` in bits; `+∞` when the support of ρ is
/// not contained in that of σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy between dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let sr = hermitian_eig(rho.matrix())?;
    let ss = hermitian_eig(sigma.matrix())?;
    let lr = sr.clamped_psd(STATE_TOL)?;
    let ls = ss.clamped_psd(STATE_TOL)?;
    let n = rho.dim();
    let mut cross = 0.0;
    for j in 0..n {
        // weight of ρ along the j-th eigenvector of σ
        let mut w = 0.0;
        for i in 0..n {
            if lr[i] <= 0.0 {
                continue;
            }
            let mut ov = C64::new(0.0, 0.0);
            for k in 0..n {
                ov += sr.eigenvectors[(k, i)].conj() * ss.eigenvectors[(k, j)];
            }
            w += lr[i] * ov.norm_sqr();
        }
        if ls[j] <= SUPPORT_CUTOFF {
            if w > SUPPORT_CUTOFF {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += w * ls[j].log2();
    }
    let neg_s: f64 = lr.iter().map(|&l| -eta(l)).sum();
    Ok((neg_s - cross).max(0.0))
}

/// Rank-minimal purification `Σ √λᵢ |vᵢ⟩⊗|i⟩`; the purifier is appended as the
/// last tensor factor.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let spec = hermitian_eig(rho.matrix())?;
    let ev = spec.clamped_psd(STATE_TOL)?;
    let kept: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] > SUPPORT_CUTOFF).collect();
    let r = kept.len().max(1);
    let d = rho.dim();
    let mut amps = vec![C64::new(0.0, 0.0); d * r];
    let norm: f64 = kept.iter().map(|&i| ev[i]).sum();
    for (col, &i) in kept.iter().enumerate() {
        let w = (ev[i] / norm).sqrt();
        for row in 0..d {
            amps[row * r + col] = spec.eigenvectors[(row, i)] * w;
        }
    }
    let mut dims = rho.dims().to_vec();
    dims.push(r);
    Ok(PureState { amplitudes: amps, dims })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Dephasing,
    Depolarizing,
    Erasure,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dephasing" => Ok(Self::Dephasing),
            "depolarizing" => Ok(Self::Depolarizing),
            "erasure" => Ok(Self::Erasure),
            other => Err(Error::Parse(format!("unknown channel kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dephasing => "dephasing",
            Self::Depolarizing => "depolarizing",
            Self::Erasure => "erasure",
        })
    }
}

/// One of the three qubit noise channels.
///
/// * dephasing: `(1−p)ρ + p·ZρZ`
/// * depolarizing: `(1−p)ρ + p·𝟙/2`
/// * erasure: `(1−p)ρ ⊕ p·|e⟩⟨e|`, with `p` the erasure probability and the
///   flag `|e⟩` as the third basis vector of the output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitChannel {
    kind: ChannelKind,
    noise: f64,
}

impl QubitChannel {
    pub fn new(kind: ChannelKind, noise: f64) -> Result<Self> {
        check_unit("channel noise", noise)?;
        Ok(Self { kind, noise })
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            ChannelKind::Erasure => 3,
            _ => 2,
        }
    }

    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        let p = self.noise;
        match self.kind {
            ChannelKind::Dephasing => vec![
                ComplexMatrix::identity(2).scale((1.0 - p).sqrt()),
                pauli_z().scale(p.sqrt()),
            ],
            ChannelKind::Depolarizing => vec![
                ComplexMatrix::identity(2).scale((1.0 - 0.75 * p).sqrt()),
                pauli_x().scale((p / 4.0).sqrt()),
                pauli_y().scale((p / 4.0).sqrt()),
                pauli_z().scale((p / 4.0).sqrt()),
            ],
            ChannelKind::Erasure => {
                let keep = ComplexMatrix::from_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
                    .unwrap()
                    .scale((1.0 - p).sqrt());
                let e0 = ComplexMatrix::from_real(3, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
                    .unwrap()
                    .scale(p.sqrt());
                let e1 = ComplexMatrix::from_real(3, 2, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
                    .unwrap()
                    .scale(p.sqrt());
                vec![keep, e0, e1]
            }
        }
    }
}

/// Applies a Kraus map to one tensor factor.
pub fn apply_kraus(
    kraus: &[ComplexMatrix],
    rho: &DensityMatrix,
    which_factor: usize,
) -> Result<DensityMatrix> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::DimensionMismatch("empty Kraus list".into()))?;
    let mut out_dims = rho.dims().to_vec();
    if which_factor >= out_dims.len() {
        return Err(Error::DimensionMismatch(format!("no factor {which_factor}")));
    }
    out_dims[which_factor] = first.rows();
    let d_out: usize = out_dims.iter().product();
    let mut acc = ComplexMatrix::zeros(d_out, d_out);
    for k in kraus {
        let full = embed(k, rho.dims(), which_factor)?;
        let term = full.matmul(rho.matrix())?.matmul(&full.adjoint())?;
        acc = acc.try_add(&term)?;
    }
    DensityMatrix::new(acc.hermitian_part(), out_dims)
}

/// Kraus-sum action of a qubit channel on factor `which_factor`.
pub fn apply_channel(
    ch: &QubitChannel,
    rho: &DensityMatrix,
    which_factor: usize,
) -> Result<DensityMatrix> {
    if rho.dims().get(which_factor) != Some(&2) {
        return Err(Error::DimensionMismatch(format!(
            "factor {which_factor} of {:?} is not a qubit",
            rho.dims()
        )));
    }
    apply_kraus(&ch.kraus(), rho, which_factor)
}

/// Choi state: the channel applied to Bob's half of `|Φ⁺⟩`.
pub fn choi_state(ch: &QubitChannel) -> DensityMatrix {
    apply_channel(ch, &DensityMatrix::from_pure(&phi_plus()), 1)
        .expect("Φ⁺ has a qubit second factor")
}
