//! Dense complex matrices and Hermitian spectral routines.
//!
//! Everything here targets small dimensions (up to a few dozen), which is all
//! the state and measurement algebra downstream ever needs.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm (relative to `max(1, ‖A‖_F)`) at which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;
/// Largest admissible `‖A − A†‖_F` for [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries. Rejects non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Column vector from amplitudes.
    pub fn column(v: &[C64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// Rank-one projector `|v⟩⟨v|` (no normalisation applied).
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column_vec(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A − A†‖_F`, or infinity for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    m.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(m)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `Re tr(A·B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::DimensionMismatch("trace of product".into()));
        }
        let mut s = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                s += self[(i, k)] * other[(k, i)];
            }
        }
        Ok(s)
    }

    /// Applies `f` to the spectrum of a Hermitian matrix.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let spec = hermitian_eig(self)?;
        Ok(spec.reconstruct_with(f))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

// Operator sugar for call sites where the shapes are fixed by construction.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix shapes must agree")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix shapes must agree")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix shapes must agree")
    }
}

/// Kronecker product. Entry `(i1·rb + i2, j1·cb + j2)` is `a[i1,j1]·b[i2,j2]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rb, cb) = (b.rows, b.cols);
    let mut m = ComplexMatrix::zeros(a.rows * rb, a.cols * cb);
    for i1 in 0..a.rows {
        for j1 in 0..a.cols {
            let x = a[(i1, j1)];
            for i2 in 0..rb {
                for j2 in 0..cb {
                    m[(i1 * rb + i2, j1 * cb + j2)] = x * b[(i2, j2)];
                }
            }
        }
    }
    m
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut it = factors.iter();
    let first = match it.next() {
        Some(f) => (*f).clone(),
        None => return ComplexMatrix::identity(1),
    };
    it.fold(first, |acc, f| kron(&acc, f))
}

/// Lifts `op` (possibly rectangular) onto tensor factor `which` of a space with
/// factor dimensions `dims`, identity elsewhere.
pub fn embed(op: &ComplexMatrix, dims: &[usize], which: usize) -> Result<ComplexMatrix> {
    if which >= dims.len() || op.cols() != dims[which] {
        return Err(Error::DimensionMismatch(format!(
            "operator with {} columns cannot act on factor {which} of {dims:?}",
            op.cols()
        )));
    }
    let left: usize = dims[..which].iter().product();
    let right: usize = dims[which + 1..].iter().product();
    Ok(kron(&kron(&ComplexMatrix::identity(left), op), &ComplexMatrix::identity(right)))
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Real eigenvalues, sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Columns are the corresponding orthonormal eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    /// `V·diag(f(λ))·V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    if fl[k] != 0.0 {
                        s += v[(i, k)] * v[(j, k)].conj() * fl[k];
                    }
                }
                m[(i, j)] = s;
            }
        }
        m
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| l)
    }

    /// Eigenvalues with small negatives (≥ −tol) set to zero.
    pub fn clamped_psd(&self, tol: f64) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                if l < -tol {
                    Err(Error::NotPsd(l))
                } else {
                    Ok(l.max(0.0))
                }
            })
            .collect()
    }
}

/// Cyclic complex Jacobi diagonalisation of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot element and then applies
/// a real Givens rotation, so the iterate stays Hermitian throughout.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let dev = a.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let tol = JACOBI_TOL * a.fro_norm().max(1.0);

    let off = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= tol;
    let mut sweep = 0;
    while !converged {
        if sweep >= JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U restricted to (p, q): diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = phase.conj() * (-s);
                let u_qq = phase.conj() * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * u_pp + mkq * u_qp;
                    m[(k, q)] = mkp * u_pq + mkq * u_qq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = u_pp.conj() * mpk + u_qp.conj() * mqk;
                    m[(q, k)] = u_pq.conj() * mpk + u_qq.conj() * mqk;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
        converged = off(&m) <= tol;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok(Spectrum { eigenvalues, eigenvectors: vecs })
}

fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

fn compose(ds: &[usize], dims: &[usize]) -> usize {
    ds.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Traces out every factor not listed in `keep`. Kept factors retain their
/// original relative order.
pub fn partial_trace(a: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !a.is_square() || a.rows() != total {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix vs factor dims {dims:?}",
            a.rows(),
            a.cols()
        )));
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!("keep {keep:?} outside {dims:?}")));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let kdims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kd: usize = kdims.iter().product();
    let td: usize = tdims.iter().product();

    let mut out = ComplexMatrix::zeros(kd, kd);
    let mut full = vec![0usize; dims.len()];
    let mut full2 = vec![0usize; dims.len()];
    for i in 0..kd {
        let di = digits(i, &kdims);
        for j in 0..kd {
            let dj = digits(j, &kdims);
            let mut s = C64::new(0.0, 0.0);
            for t in 0..td {
                let dt = digits(t, &tdims);
                for (pos, &k) in keep_sorted.iter().enumerate() {
                    full[k] = di[pos];
                    full2[k] = dj[pos];
                }
                for (pos, &k) in traced.iter().enumerate() {
                    full[k] = dt[pos];
                    full2[k] = dt[pos];
                }
                s += a[(compose(&full, dims), compose(&full2, dims))];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    let i = C64::new(0.0, 1.0);
    ComplexMatrix::new(2, 2, vec![C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).fro_norm() <= tol
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let zz = kron(&pauli_z(), &pauli_z());
        assert_eq!(zz, ComplexMatrix::from_diag(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn kron_xx_flips_00_to_11() {
        let xx = kron(&pauli_x(), &pauli_x());
        let ket00 = ComplexMatrix::from_real(4, 1, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = &xx * &ket00;
        assert_eq!(out, ComplexMatrix::from_real(4, 1, &[0.0, 0.0, 0.0, 1.0]).unwrap());
    }

    #[test]
    fn kron_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let c = random_hermitian(2, &mut rng);
        assert!((&kron(&kron(&a, &b), &c) - &kron(&a, &kron(&b, &c))).fro_norm() < 1e-14);
    }

    #[test]
    fn eig_of_paulis() {
        let s = hermitian_eig(&pauli_z()).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, -1.0]);

        let s = hermitian_eig(&pauli_x()).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] + 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = s.eigenvectors.column_vec(0);
        // (|0⟩+|1⟩)/√2 up to a global phase
        let overlap = (v0[0] * r + v0[1] * r).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
        let v1 = s.eigenvectors.column_vec(1);
        let overlap = (v1[0] * r - v1[1] * r).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_of_maximally_mixed() {
        let s = hermitian_eig(&ComplexMatrix::identity(4).scale(0.25)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.25; 4]);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eig_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 4, 6, 8, 12, 16] {
            for _ in 0..10 {
                let mut a = random_hermitian(n, &mut rng);
                let norm = a.fro_norm();
                if norm > 10.0 {
                    a = a.scale(10.0 / norm);
                }
                let s = hermitian_eig(&a).unwrap();
                assert!(close(&s.reconstruct(), &a, 1e-10), "n={n}");
                let vv = &s.eigenvectors.adjoint() * &s.eigenvectors;
                assert!(close(&vv, &ComplexMatrix::identity(n), 1e-10));
                assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn partial_trace_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [C64::new(r, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(r, 0.0)];
        let proj = ComplexMatrix::outer(&phi);
        let pa = partial_trace(&proj, &[2, 2], &[0]).unwrap();
        assert!(close(&pa, &ComplexMatrix::identity(2).scale(0.5), 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(2, &mut rng);
        let b = ComplexMatrix::from_diag(&[0.2, 0.3, 0.5]);
        let ab = kron(&a, &b);
        assert!(close(&partial_trace(&ab, &[2, 3], &[0]).unwrap(), &a, 1e-14));
        assert!(close(&partial_trace(&ab, &[2, 3], &[1]).unwrap(), &b.scale(a.trace().re), 1e-14));

        let full = partial_trace(&proj, &[2, 2], &[]).unwrap();
        assert_eq!((full.rows(), full.cols()), (1, 1));
        assert!((full[(0, 0)].re - 1.0).abs() < 1e-15);

        assert!(matches!(
            partial_trace(&proj, &[2, 3], &[0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn partial_trace_middle_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let c = random_hermitian(2, &mut rng);
        let abc = kron_all(&[&a, &b, &c]);
        let ac = partial_trace(&abc, &[2, 3, 2], &[2, 0]).unwrap();
        assert!(close(&ac, &kron(&a, &c).scale_c(b.trace()), 1e-13));
    }

    #[test]
    fn embed_matches_kron() {
        let z = pauli_z();
        let e = embed(&z, &[2, 3, 2], 2).unwrap();
        assert_eq!(e, kron(&ComplexMatrix::identity(6), &z));
    }

    proptest::proptest! {
        #[test]
        fn partial_trace_is_linear(seed in 0u64..1000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(6, &mut rng);
            let b = random_hermitian(6, &mut rng);
            let lhs = partial_trace(&(&a.scale(alpha) + &b.scale(beta)), &[2, 3], &[1]).unwrap();
            let rhs = &partial_trace(&a, &[2, 3], &[1]).unwrap().scale(alpha)
                + &partial_trace(&b, &[2, 3], &[1]).unwrap().scale(beta);
            proptest::prop_assert!((&lhs - &rhs).fro_norm() < 1e-13);
        }
    }
}
