//! Measurement families, behaviors `p(a,b|x,y)`, the CHSH functional and the
//! assembly of classical-classical-quantum states seen by an eavesdropper.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};
use crate::linalg::{kron, pauli_x, pauli_z, ComplexMatrix, C64};
use crate::states::{make_isotropic, purify, DensityMatrix, STATE_TOL};

/// Entries of a behavior down to this negative value are treated as round-off.
pub const BEHAVIOR_NEG_TOL: f64 = 1e-12;
/// Normalisation and no-signaling tolerance for behaviors.
pub const BEHAVIOR_TOL: f64 = 1e-9;

/// A POVM: PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let d = first.rows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (k, e) in elements.iter().enumerate() {
            if e.rows() != d || e.cols() != d {
                return Err(Error::InvalidPovm(format!("element {k} has the wrong shape")));
            }
            let spec = crate::linalg::hermitian_eig(e)
                .map_err(|err| Error::InvalidPovm(format!("element {k}: {err}")))?;
            spec.clamped_psd(STATE_TOL)
                .map_err(|err| Error::InvalidPovm(format!("element {k}: {err}")))?;
            sum = &sum + e;
        }
        let dev = (&sum - &ComplexMatrix::identity(d)).fro_norm();
        if dev > STATE_TOL {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {dev:.3e}")));
        }
        Ok(Self { elements })
    }

    /// Two-outcome projective measurement of a ±1-valued observable; outcome 0
    /// is the +1 eigenspace.
    pub fn from_observable(obs: &ComplexMatrix) -> Result<Self> {
        let id = ComplexMatrix::identity(obs.rows());
        Self::new(vec![(&id + obs).scale(0.5), (&id - obs).scale(0.5)])
    }

    /// Computational-basis measurement on a `d`-dimensional system.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|i| {
                let mut m = ComplexMatrix::zeros(d, d);
                m[(i, i)] = C64::new(1.0, 0.0);
                m
            })
            .collect();
        Self { elements }
    }

    /// Outcome-wise mixture `t·self + (1−t)·other`: measure `self` with
    /// probability `t`, `other` otherwise.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if self.elements.len() != other.elements.len() || self.dim() != other.dim() {
            return Err(Error::InvalidPovm("mixing POVMs of different shape".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(format!("mixing weight {t}")));
        }
        Self::new(
            self.elements
                .iter()
                .zip(&other.elements)
                .map(|(a, b)| &a.scale(t) + &b.scale(1.0 - t))
                .collect(),
        )
    }

    /// Swaps outcome labels according to `perm` (new outcome `k` is old `perm[k]`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.elements.len() {
            return Err(Error::InvalidPovm("relabelling of wrong length".into()));
        }
        Self::new(perm.iter().map(|&k| self.elements[k].clone()).collect())
    }

    /// Appends a projector-free outcome by padding each element onto a larger
    /// space: `extra` lists the elements to use on the added dimensions.
    pub fn extend_dim(&self, extra_dims: usize, assign: &[usize]) -> Result<Self> {
        let d = self.dim();
        let n = d + extra_dims;
        if assign.len() != extra_dims {
            return Err(Error::InvalidPovm("one outcome per added dimension".into()));
        }
        let mut elements: Vec<ComplexMatrix> = self
            .elements
            .iter()
            .map(|e| {
                let mut m = ComplexMatrix::zeros(n, n);
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = e[(i, j)];
                    }
                }
                m
            })
            .collect();
        for (k, &outcome) in assign.iter().enumerate() {
            while outcome >= elements.len() {
                elements.push(ComplexMatrix::zeros(n, n));
            }
            elements[outcome][(d + k, d + k)] = C64::new(1.0, 0.0);
        }
        Self::new(elements)
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }
}

/// Per-party lists of POVMs, indexed by input.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFamily {
    pub alice: Vec<Povm>,
    pub bob: Vec<Povm>,
}

impl MeasurementFamily {
    pub fn new(alice: Vec<Povm>, bob: Vec<Povm>) -> Result<Self> {
        if alice.is_empty() || bob.is_empty() {
            return Err(Error::BadSetting("each party needs at least one input".into()));
        }
        let (da, db) = (alice[0].dim(), bob[0].dim());
        if alice.iter().any(|m| m.dim() != da) || bob.iter().any(|m| m.dim() != db) {
            return Err(Error::DimensionMismatch("POVMs of one party act on different spaces".into()));
        }
        Ok(Self { alice, bob })
    }

    pub fn x_count(&self) -> usize {
        self.alice.len()
    }

    pub fn y_count(&self) -> usize {
        self.bob.len()
    }

    pub fn a_count(&self) -> usize {
        self.alice.iter().map(Povm::outcomes).max().unwrap_or(0)
    }

    pub fn b_count(&self) -> usize {
        self.bob.iter().map(Povm::outcomes).max().unwrap_or(0)
    }
}

/// Conditional distribution table `p(a,b|x,y)`, stored flat as `p[x][y][a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    x_count: usize,
    y_count: usize,
    a_count: usize,
    b_count: usize,
    p: Vec<f64>,
}

impl Behavior {
    /// Validates normalisation, positivity and no-signaling.
    pub fn new(
        x_count: usize,
        y_count: usize,
        a_count: usize,
        b_count: usize,
        p: Vec<f64>,
    ) -> Result<Self> {
        let b = Self::new_unchecked_ns(x_count, y_count, a_count, b_count, p)?;
        b.check_no_signaling(BEHAVIOR_TOL)?;
        Ok(b)
    }

    /// Validates shape, positivity and normalisation only.
    pub(crate) fn new_unchecked_ns(
        x_count: usize,
        y_count: usize,
        a_count: usize,
        b_count: usize,
        p: Vec<f64>,
    ) -> Result<Self> {
        if x_count == 0 || y_count == 0 || a_count == 0 || b_count == 0 {
            return Err(Error::InvalidBehavior("cardinalities must be positive".into()));
        }
        if p.len() != x_count * y_count * a_count * b_count {
            return Err(Error::InvalidBehavior(format!(
                "expected {} entries, got {}",
                x_count * y_count * a_count * b_count,
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < -BEHAVIOR_NEG_TOL) {
            return Err(Error::InvalidBehavior(format!("invalid probability {bad}")));
        }
        let b = Self { x_count, y_count, a_count, b_count, p };
        for x in 0..x_count {
            for y in 0..y_count {
                let s: f64 = b.slice(x, y).iter().sum();
                if (s - 1.0).abs() > BEHAVIOR_TOL {
                    return Err(Error::InvalidBehavior(format!(
                        "slice (x={x}, y={y}) sums to {s}"
                    )));
                }
            }
        }
        Ok(b)
    }

    /// Builds from a nested table `p[x][y][a][b]`.
    pub fn from_nested(table: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let x_count = table.len();
        let y_count = table.first().map_or(0, Vec::len);
        let a_count = table.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let b_count = table
            .first()
            .and_then(|t| t.first())
            .and_then(|t| t.first())
            .map_or(0, Vec::len);
        let mut p = Vec::with_capacity(x_count * y_count * a_count * b_count);
        for tx in table {
            if tx.len() != y_count {
                return Err(Error::InvalidBehavior("ragged table over y".into()));
            }
            for ty in tx {
                if ty.len() != a_count {
                    return Err(Error::InvalidBehavior("ragged table over a".into()));
                }
                for ta in ty {
                    if ta.len() != b_count {
                        return Err(Error::InvalidBehavior("ragged table over b".into()));
                    }
                    p.extend_from_slice(ta);
                }
            }
        }
        Self::new(x_count, y_count, a_count, b_count, p)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.x_count)
            .map(|x| {
                (0..self.y_count)
                    .map(|y| {
                        (0..self.a_count)
                            .map(|a| (0..self.b_count).map(|b| self.get(x, y, a, b)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn x_count(&self) -> usize {
        self.x_count
    }
    pub fn y_count(&self) -> usize {
        self.y_count
    }
    pub fn a_count(&self) -> usize {
        self.a_count
    }
    pub fn b_count(&self) -> usize {
        self.b_count
    }

    /// Raw entries in `[x][y][a][b]` order.
    pub fn raw(&self) -> &[f64] {
        &self.p
    }

    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.y_count + y) * self.a_count + a) * self.b_count + b
    }

    /// Probability with round-off negatives clamped to zero.
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.index(x, y, a, b)].max(0.0)
    }

    pub fn slice(&self, x: usize, y: usize) -> &[f64] {
        let n = self.a_count * self.b_count;
        let start = (x * self.y_count + y) * n;
        &self.p[start..start + n]
    }

    /// `p(a,b|x,y)` as an `a_count × b_count` table.
    pub fn joint(&self, x: usize, y: usize) -> Vec<Vec<f64>> {
        (0..self.a_count)
            .map(|a| (0..self.b_count).map(|b| self.get(x, y, a, b)).collect())
            .collect()
    }

    pub fn check_no_signaling(&self, tol: f64) -> Result<()> {
        for x in 0..self.x_count {
            for a in 0..self.a_count {
                let m0: f64 = (0..self.b_count).map(|b| self.get(x, 0, a, b)).sum();
                for y in 1..self.y_count {
                    let m: f64 = (0..self.b_count).map(|b| self.get(x, y, a, b)).sum();
                    if (m - m0).abs() > tol {
                        return Err(Error::InvalidBehavior(format!(
                            "Alice's marginal p(a={a}|x={x}) depends on y"
                        )));
                    }
                }
            }
        }
        for y in 0..self.y_count {
            for b in 0..self.b_count {
                let m0: f64 = (0..self.a_count).map(|a| self.get(0, y, a, b)).sum();
                for x in 1..self.x_count {
                    let m: f64 = (0..self.a_count).map(|a| self.get(x, y, a, b)).sum();
                    if (m - m0).abs() > tol {
                        return Err(Error::InvalidBehavior(format!(
                            "Bob's marginal p(b={b}|y={y}) depends on x"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Uniform distribution over outcomes for every input pair.
    pub fn uniform(x_count: usize, y_count: usize, a_count: usize, b_count: usize) -> Self {
        let v = 1.0 / (a_count * b_count) as f64;
        Self { x_count, y_count, a_count, b_count, p: vec![v; x_count * y_count * a_count * b_count] }
    }

    /// Convex combination `t·self + (1−t)·other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch("behaviors of different shape".into()));
        }
        let p = self.p.iter().zip(&other.p).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Ok(Self { p, ..self.clone() })
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.x_count, self.y_count, self.a_count, self.b_count)
            == (other.x_count, other.y_count, other.a_count, other.b_count)
    }

    /// Correlator `E(x,y) = Σ (−1)^{a⊕b} p(a,b|x,y)` over binary outcomes.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        self.check_setting(x, y)?;
        let mut e = 0.0;
        for a in 0..self.a_count {
            for b in 0..self.b_count {
                let v = self.get(x, y, a, b);
                if a > 1 || b > 1 {
                    if v > BEHAVIOR_NEG_TOL {
                        return Err(Error::BadSetting(format!(
                            "setting (x={x}, y={y}) has weight on non-binary outcomes"
                        )));
                    }
                    continue;
                }
                e += if a == b { v } else { -v };
            }
        }
        Ok(e)
    }

    fn check_setting(&self, x: usize, y: usize) -> Result<()> {
        if x >= self.x_count || y >= self.y_count {
            return Err(Error::BadSetting(format!(
                "input pair ({x}, {y}) outside {}x{}",
                self.x_count, self.y_count
            )));
        }
        Ok(())
    }
}

/// `p(a,b|x,y) = tr[(M^x_a ⊗ M^y_b) ρ]`.
pub fn behavior_from(state: &DensityMatrix, m: &MeasurementFamily) -> Result<Behavior> {
    let (da, db) = (m.alice[0].dim(), m.bob[0].dim());
    if state.dims().len() != 2 || state.dims()[0] != da || state.dims()[1] != db {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs measurement dims [{da}, {db}]",
            state.dims()
        )));
    }
    let (xc, yc, ac, bc) = (m.x_count(), m.y_count(), m.a_count(), m.b_count());
    let mut p = vec![0.0; xc * yc * ac * bc];
    for (x, ma) in m.alice.iter().enumerate() {
        for (y, mb) in m.bob.iter().enumerate() {
            for (a, ea) in ma.elements().iter().enumerate() {
                for (b, eb) in mb.elements().iter().enumerate() {
                    let v = state.expectation(&kron(ea, eb))?;
                    p[((x * yc + y) * ac + a) * bc + b] = if v.abs() < 1e-15 { 0.0 } else { v };
                }
            }
        }
    }
    Behavior::new(xc, yc, ac, bc, p)
}

/// CHSH expression `E(x₁y₁) + E(x₁y₂) + E(x₂y₁) − E(x₂y₂)` (signed).
pub fn chsh_value(b: &Behavior, alice_inputs: (usize, usize), bob_inputs: (usize, usize)) -> Result<f64> {
    let (x1, x2) = alice_inputs;
    let (y1, y2) = bob_inputs;
    if x1 == x2 || y1 == y2 {
        return Err(Error::BadSetting("CHSH needs two distinct inputs per party".into()));
    }
    Ok(b.correlator(x1, y1)? + b.correlator(x1, y2)? + b.correlator(x2, y1)?
        - b.correlator(x2, y2)?)
}

/// CHSH inputs used throughout: Alice's test inputs 1 and 2, Bob's 0 and 1.
pub const CHSH_ALICE: (usize, usize) = (1, 2);
pub const CHSH_BOB: (usize, usize) = (0, 1);
/// Key-generating input pair `(x̂, ŷ)`.
pub const KEY_PAIR: (usize, usize) = (0, 0);

/// Error rate `P(a ≠ b | x̂, ŷ)`.
pub fn qber(b: &Behavior, x_hat: usize, y_hat: usize) -> Result<f64> {
    b.check_setting(x_hat, y_hat)?;
    let mut err = 0.0;
    for a in 0..b.a_count() {
        for bb in 0..b.b_count() {
            if a != bb {
                err += b.get(x_hat, y_hat, a, bb);
            }
        }
    }
    Ok(err)
}

/// The honest CHSH measurements: Alice `σz, (σz+σx)/√2, (σz−σx)/√2`,
/// Bob `σz, σx`.
pub fn honest_measurements() -> MeasurementFamily {
    let z = pauli_z();
    let x = pauli_x();
    let a1 = (&z + &x).scale(FRAC_1_SQRT_2);
    let a2 = (&z - &x).scale(FRAC_1_SQRT_2);
    let obs = |o: &ComplexMatrix| Povm::from_observable(o).expect("Pauli combinations are ±1-valued");
    MeasurementFamily {
        alice: vec![obs(&z), obs(&a1), obs(&a2)],
        bob: vec![obs(&z), obs(&x)],
    }
}

/// Isotropic state of noise `ν` together with the honest CHSH measurements.
pub fn honest_chsh_device(nu: f64) -> Result<(DensityMatrix, MeasurementFamily)> {
    Ok((make_isotropic(nu)?, honest_measurements()))
}

/// CHSH value `2√2(1−ν)` of the honest device.
pub fn honest_omega(nu: f64) -> f64 {
    2.0 * SQRT_2 * (1.0 - nu)
}

/// Separable strategy on `|00⟩` reaching CHSH value 2 and error rate `q`.
///
/// Alice's test inputs and Bob's first input measure `σz`, Bob's second input
/// `σx`; Alice's key input measures `σx` with probability `2q` and `σz`
/// otherwise.
pub fn separable_chsh2_strategy(q: f64) -> Result<(DensityMatrix, MeasurementFamily)> {
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::OutOfRange(format!("QBER {q} not in [0, 1/2]")));
    }
    let z = Povm::from_observable(&pauli_z())?;
    let x = Povm::from_observable(&pauli_x())?;
    let key = x.mix(&z, 2.0 * q)?;
    let state = DensityMatrix::new(ComplexMatrix::from_diag(&[1.0, 0.0, 0.0, 0.0]), vec![2, 2])?;
    Ok((state, MeasurementFamily::new(vec![key, z.clone(), z.clone()], vec![z, x])?))
}

/// Classical-classical-quantum state `Σ_{ab} |ab⟩⟨ab| ⊗ ρ_E^{ab}` with
/// subnormalised Eve blocks, `tr ρ_E^{ab} = p(a,b)`.
#[derive(Debug, Clone)]
pub struct CcqState {
    a_count: usize,
    b_count: usize,
    eve_dim: usize,
    blocks: Vec<ComplexMatrix>,
}

impl CcqState {
    pub fn new(a_count: usize, b_count: usize, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if blocks.len() != a_count * b_count || blocks.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks for {a_count}x{b_count} outcomes",
                blocks.len()
            )));
        }
        let eve_dim = blocks[0].rows();
        let mut total = 0.0;
        for blk in &blocks {
            if !blk.is_square() || blk.rows() != eve_dim {
                return Err(Error::DimensionMismatch("Eve blocks of unequal size".into()));
            }
            if blk.hermitian_deviation() > STATE_TOL {
                return Err(Error::NotHermitian(blk.hermitian_deviation()));
            }
            crate::linalg::hermitian_eig(blk)?.clamped_psd(STATE_TOL)?;
            total += blk.trace().re;
        }
        if (total - 1.0).abs() > STATE_TOL {
            return Err(Error::OutOfRange(format!("ccq state has trace {total}")));
        }
        let blocks = blocks.into_iter().map(|b| b.hermitian_part()).collect();
        Ok(Self { a_count, b_count, eve_dim, blocks })
    }

    /// Classical embedding of `p(a,b,e)`: diagonal Eve blocks.
    pub fn from_classical(p: &crate::measures::TripleDistribution) -> Result<Self> {
        let (na, nb, ne) = p.shape();
        let blocks = (0..na)
            .flat_map(|a| (0..nb).map(move |b| (a, b)))
            .map(|(a, b)| {
                let diag: Vec<f64> = (0..ne).map(|e| p.get(a, b, e)).collect();
                ComplexMatrix::from_diag(&diag)
            })
            .collect();
        Self::new(na, nb, blocks)
    }

    pub fn a_count(&self) -> usize {
        self.a_count
    }
    pub fn b_count(&self) -> usize {
        self.b_count
    }
    pub fn eve_dim(&self) -> usize {
        self.eve_dim
    }

    pub fn block(&self, a: usize, b: usize) -> &ComplexMatrix {
        &self.blocks[a * self.b_count + b]
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    /// `p(a,b) = tr ρ_E^{ab}`.
    pub fn joint(&self) -> Vec<Vec<f64>> {
        (0..self.a_count)
            .map(|a| (0..self.b_count).map(|b| self.block(a, b).trace().re.max(0.0)).collect())
            .collect()
    }

    /// Eve's marginal `Σ_{ab} ρ_E^{ab}`.
    pub fn eve_marginal(&self) -> ComplexMatrix {
        self.blocks
            .iter()
            .fold(ComplexMatrix::zeros(self.eve_dim, self.eve_dim), |acc, b| &acc + b)
    }
}

/// Eve's post-processing of her purifying system.
#[derive(Debug, Clone)]
pub enum EveMap {
    Identity,
    /// CPTP map in Kraus form (operators may change the dimension).
    Channel(Vec<ComplexMatrix>),
    /// Measurement whose classical outcome Eve keeps.
    Measure(Povm),
}

impl EveMap {
    fn apply(&self, block: &ComplexMatrix) -> Result<ComplexMatrix> {
        match self {
            EveMap::Identity => Ok(block.clone()),
            EveMap::Channel(kraus) => {
                let d_out = kraus
                    .first()
                    .ok_or_else(|| Error::DimensionMismatch("empty Kraus list".into()))?
                    .rows();
                let mut acc = ComplexMatrix::zeros(d_out, d_out);
                for k in kraus {
                    acc = acc.try_add(&k.matmul(block)?.matmul(&k.adjoint())?)?;
                }
                Ok(acc)
            }
            EveMap::Measure(povm) => {
                if povm.dim() != block.rows() {
                    return Err(Error::DimensionMismatch(format!(
                        "Eve POVM on dimension {} but her system has {}",
                        povm.dim(),
                        block.rows()
                    )));
                }
                let diag = povm
                    .elements()
                    .iter()
                    .map(|f| Ok(f.trace_product(block)?.re.max(0.0)))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(ComplexMatrix::from_diag(&diag))
            }
        }
    }
}

/// Eve's conditional states after Alice and Bob measure `pair_povm` on a
/// purification of `state`: `ρ_E^{ab} = tr_AB[(M_a ⊗ M_b ⊗ 𝟙)|ψ⟩⟨ψ|]`,
/// followed by `eve_map`.
pub fn assemble_ccq(
    state: &DensityMatrix,
    pair_povm: (&Povm, &Povm),
    eve_map: &EveMap,
) -> Result<CcqState> {
    let (ma, mb) = pair_povm;
    if state.dims().len() != 2 || state.dims()[0] != ma.dim() || state.dims()[1] != mb.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs POVM dims [{}, {}]",
            state.dims(),
            ma.dim(),
            mb.dim()
        )));
    }
    let psi = purify(state)?;
    let d_ab = state.dim();
    let r = *psi.dims.last().expect("purifier factor");
    // ψ as a d_AB × r coefficient matrix
    let coeff = ComplexMatrix::new(d_ab, r, psi.amplitudes.clone())?;
    let coeff_dag = coeff.adjoint();
    let mut blocks = Vec::with_capacity(ma.outcomes() * mb.outcomes());
    for ea in ma.elements() {
        for eb in mb.elements() {
            let m = kron(ea, eb);
            // ρ_E = (Ψ† M Ψ)ᵀ
            let blk = coeff_dag.matmul(&m)?.matmul(&coeff)?.transpose();
            blocks.push(eve_map.apply(&blk)?);
        }
    }
    CcqState::new(ma.outcomes(), mb.outcomes(), blocks)
}

/// Setting-flagged ccq state: the direct sum over `(x,y)` of the per-setting
/// ccq states weighted by `p(x,y)`, the flag living in Eve's register.
///
/// `settings[k] = (x, y, p(x,y))` and `eve_maps[k]` is applied in that setting.
pub fn broadcast_ccq(
    state: &DensityMatrix,
    family: &MeasurementFamily,
    settings: &[(usize, usize, f64)],
    eve_maps: &[EveMap],
) -> Result<CcqState> {
    if settings.len() != eve_maps.len() {
        return Err(Error::DimensionMismatch("one Eve map per setting".into()));
    }
    check_input_distribution(settings)?;
    let (na, nb) = (family.a_count(), family.b_count());
    let mut parts = Vec::with_capacity(settings.len());
    for (&(x, y, w), map) in settings.iter().zip(eve_maps) {
        let ma = family
            .alice
            .get(x)
            .ok_or_else(|| Error::BadSetting(format!("no Alice input {x}")))?;
        let mb = family
            .bob
            .get(y)
            .ok_or_else(|| Error::BadSetting(format!("no Bob input {y}")))?;
        parts.push((w, assemble_ccq(state, (ma, mb), map)?));
    }
    let total_dim: usize = parts.iter().map(|(_, c)| c.eve_dim()).sum();
    let mut blocks = vec![ComplexMatrix::zeros(total_dim, total_dim); na * nb];
    let mut offset = 0;
    for (w, c) in &parts {
        let d = c.eve_dim();
        for a in 0..c.a_count() {
            for b in 0..c.b_count() {
                let src = c.block(a, b);
                let dst = &mut blocks[a * nb + b];
                for i in 0..d {
                    for j in 0..d {
                        dst[(offset + i, offset + j)] = src[(i, j)] * *w;
                    }
                }
            }
        }
        offset += d;
    }
    CcqState::new(na, nb, blocks)
}

pub(crate) fn check_input_distribution(settings: &[(usize, usize, f64)]) -> Result<()> {
    if settings.is_empty() {
        return Err(Error::OutOfRange("empty input distribution".into()));
    }
    if settings.iter().any(|s| !(s.2 >= 0.0) || !s.2.is_finite()) {
        return Err(Error::OutOfRange("negative input probability".into()));
    }
    let total: f64 = settings.iter().map(|s| s.2).sum();
    if (total - 1.0).abs() > BEHAVIOR_TOL {
        return Err(Error::OutOfRange(format!("input distribution sums to {total}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_bell_diagonal, phi_plus, tests::random_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pr_box() -> Behavior {
        let mut p = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        if (a ^ b) == (x & y) {
                            p[((x * 2 + y) * 2 + a) * 2 + b] = 0.5;
                        }
                    }
                }
            }
        }
        Behavior::new(2, 2, 2, 2, p).unwrap()
    }

    #[test]
    fn honest_device_at_zero_noise() {
        let (rho, m) = honest_chsh_device(0.0).unwrap();
        let b = behavior_from(&rho, &m).unwrap();
        let s = chsh_value(&b, CHSH_ALICE, CHSH_BOB).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-10);
        assert!(qber(&b, 0, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn honest_device_at_half_noise() {
        let (rho, m) = honest_chsh_device(0.5).unwrap();
        let b = behavior_from(&rho, &m).unwrap();
        assert!((chsh_value(&b, CHSH_ALICE, CHSH_BOB).unwrap() - SQRT_2).abs() < 1e-10);
        assert!((qber(&b, 0, 0).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn honest_correlator_row() {
        let (rho, m) = honest_chsh_device(0.2).unwrap();
        let b = behavior_from(&rho, &m).unwrap();
        assert!((b.correlator(1, 0).unwrap() - 0.8 * FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn behavior_examples() {
        let phi = DensityMatrix::from_pure(&phi_plus());
        let z = Povm::from_observable(&pauli_z()).unwrap();
        let fam = MeasurementFamily::new(vec![z.clone()], vec![z]).unwrap();
        let b = behavior_from(&phi, &fam).unwrap();
        assert!((b.get(0, 0, 0, 0) - 0.5).abs() < 1e-12);
        assert!((b.get(0, 0, 1, 1) - 0.5).abs() < 1e-12);
        assert!(b.get(0, 0, 0, 1).abs() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let b = behavior_from(&mixed, &honest_measurements()).unwrap();
        assert!(b.raw().iter().all(|&v| (v - 0.25).abs() < 1e-12));

        let bad = DensityMatrix::maximally_mixed(vec![2, 3]);
        assert!(matches!(behavior_from(&bad, &honest_measurements()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn chsh_examples() {
        let det = Behavior::new(
            2,
            2,
            2,
            2,
            (0..16).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        assert!((chsh_value(&det, (0, 1), (0, 1)).unwrap() - 2.0).abs() < 1e-12);
        assert!((chsh_value(&pr_box(), (0, 1), (0, 1)).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(chsh_value(&det, (0, 0), (0, 1)), Err(Error::BadSetting(_))));
        assert!(matches!(chsh_value(&det, (0, 5), (0, 1)), Err(Error::BadSetting(_))));
    }

    #[test]
    fn qber_examples() {
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let b = behavior_from(&mixed, &honest_measurements()).unwrap();
        assert!((qber(&b, 0, 0).unwrap() - 0.5).abs() < 1e-12);
        for nu in [0.0, 0.1, 0.37, 1.0] {
            let (rho, m) = honest_chsh_device(nu).unwrap();
            let b = behavior_from(&rho, &m).unwrap();
            assert!((qber(&b, 0, 0).unwrap() - nu / 2.0).abs() < 1e-12);
        }
        assert!(matches!(qber(&b, 3, 0), Err(Error::BadSetting(_))));
    }

    #[test]
    fn no_signaling_is_enforced() {
        let mut p = pr_box().raw().to_vec();
        // shift mass in one slice so Alice's marginal depends on y
        p[0] += 0.25;
        p[1] -= 0.25;
        p[3] -= 0.0;
        let p = p.iter().map(|v: &f64| v.max(0.0)).collect::<Vec<_>>();
        assert!(Behavior::new(2, 2, 2, 2, p).is_err());
    }

    #[test]
    fn separable_strategy_examples() {
        for (q, want_qber) in [(0.0, 0.0), (0.25, 0.25), (0.5, 0.5)] {
            let (rho, m) = separable_chsh2_strategy(q).unwrap();
            let b = behavior_from(&rho, &m).unwrap();
            assert!((chsh_value(&b, CHSH_ALICE, CHSH_BOB).unwrap() - 2.0).abs() < 1e-10);
            assert!((qber(&b, 0, 0).unwrap() - want_qber).abs() < 1e-10);
        }
        let (rho, m) = separable_chsh2_strategy(0.5).unwrap();
        let b = behavior_from(&rho, &m).unwrap();
        let pa0: f64 = (0..2).map(|bb| b.get(0, 0, 0, bb)).sum();
        assert!((pa0 - 0.5).abs() < 1e-12);
        assert!(separable_chsh2_strategy(0.6).is_err());
    }

    #[test]
    fn separable_strategy_grid() {
        for i in 0..50 {
            let q = 0.5 * i as f64 / 49.0;
            let (rho, m) = separable_chsh2_strategy(q).unwrap();
            let b = behavior_from(&rho, &m).unwrap();
            assert!((chsh_value(&b, CHSH_ALICE, CHSH_BOB).unwrap() - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ccq_examples() {
        let z = Povm::from_observable(&pauli_z()).unwrap();
        let pure = DensityMatrix::from_pure(&phi_plus());
        let c = assemble_ccq(&pure, (&z, &z), &EveMap::Identity).unwrap();
        assert_eq!(c.eve_dim(), 1);
        assert!((c.joint()[0][0] - 0.5).abs() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let c = assemble_ccq(&mixed, (&z, &z), &EveMap::Identity).unwrap();
        for blk in c.blocks() {
            assert!((blk.trace().re - 0.25).abs() < 1e-12);
        }

        let bd = make_bell_diagonal(0.9, 0.1).unwrap();
        let c = assemble_ccq(&bd, (&z, &z), &EveMap::Identity).unwrap();
        assert_eq!(c.eve_dim(), 2);
        let j = c.joint();
        assert!((j[0][0] - 0.5).abs() < 1e-12 && (j[1][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ccq_marginal_matches_purifier() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let fam = honest_measurements();
        for _ in 0..20 {
            let rho = random_state(&[2, 2], &mut rng);
            let c = assemble_ccq(&rho, (&fam.alice[1], &fam.bob[1]), &EveMap::Identity).unwrap();
            let psi = purify(&rho).unwrap();
            let eve = DensityMatrix::from_pure(&psi).reduce(&[2]).unwrap();
            assert!((&c.eve_marginal() - eve.matrix()).fro_norm() < 1e-9);
        }
    }

    #[test]
    fn broadcast_normalisation_and_single_setting() {
        let (rho, fam) = honest_chsh_device(0.3).unwrap();
        let single = broadcast_ccq(&rho, &fam, &[(0, 0, 1.0)], &[EveMap::Identity]).unwrap();
        let direct = assemble_ccq(&rho, (&fam.alice[0], &fam.bob[0]), &EveMap::Identity).unwrap();
        for (a, b) in single.blocks().iter().zip(direct.blocks()) {
            assert!((a - b).fro_norm() < 1e-12);
        }
        let two = broadcast_ccq(
            &rho,
            &fam,
            &[(0, 0, 0.5), (1, 1, 0.5)],
            &[EveMap::Identity, EveMap::Identity],
        )
        .unwrap();
        assert!((two.eve_marginal().trace().re - 1.0).abs() < 1e-9);
        assert!(broadcast_ccq(&rho, &fam, &[(0, 0, 0.7)], &[EveMap::Identity]).is_err());
    }

    #[test]
    fn eve_measurement_map() {
        let z = Povm::from_observable(&pauli_z()).unwrap();
        let classical =
            DensityMatrix::new(ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5]), vec![2, 2]).unwrap();
        let c = assemble_ccq(&classical, (&z, &z), &EveMap::Measure(Povm::computational(2))).unwrap();
        assert_eq!(c.eve_dim(), 2);
        // Eve's record is perfectly correlated with (a, b)
        assert!((c.block(0, 0)[(0, 0)].re - 0.5).abs() < 1e-12 || (c.block(0, 0)[(1, 1)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn povm_validation() {
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(Povm::new(vec![half.clone(), half.clone()]).is_ok());
        assert!(Povm::new(vec![half.clone()]).is_err());
        let neg = ComplexMatrix::from_diag(&[1.5, 1.0]);
        let comp = ComplexMatrix::from_diag(&[-0.5, 0.0]);
        assert!(Povm::new(vec![neg, comp]).is_err());
    }
}
