//! Relative entropy of entanglement, conditional mutual information of ccq
//! states, and intrinsic information of classical tripartite distributions.

use std::f64::consts::{LN_2, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::devices::CcqState;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, kron, ComplexMatrix, C64};
use crate::optimize::{lbfgs, nelder_mead, LbfgsConfig, NelderMeadConfig};
use crate::states::{eta, h2, operator_entropy, relative_entropy, von_neumann_entropy, DensityMatrix};

const DIST_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// classical distributions

/// Joint distribution `p(a,b,e)` stored flat in `[a][b][e]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleDistribution {
    na: usize,
    nb: usize,
    ne: usize,
    p: Vec<f64>,
}

impl TripleDistribution {
    pub fn new(na: usize, nb: usize, ne: usize, p: Vec<f64>) -> Result<Self> {
        if na == 0 || nb == 0 || ne == 0 || p.len() != na * nb * ne {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for alphabets {na}x{nb}x{ne}",
                p.len()
            )));
        }
        check_distribution(&p)?;
        Ok(Self { na, nb, ne, p: p.into_iter().map(|v| v.max(0.0)).collect() })
    }

    /// `p(a,b)` with Eve's symbol independent of it.
    pub fn with_trivial_eve(joint: &[Vec<f64>]) -> Result<Self> {
        let na = joint.len();
        let nb = joint.first().map_or(0, Vec::len);
        Self::new(na, nb, 1, joint.iter().flatten().copied().collect())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.na, self.nb, self.ne)
    }

    pub fn get(&self, a: usize, b: usize, e: usize) -> f64 {
        self.p[(a * self.nb + b) * self.ne + e]
    }

    pub fn raw(&self) -> &[f64] {
        &self.p
    }

    /// `p(a,b)`.
    pub fn joint_ab(&self) -> Vec<Vec<f64>> {
        (0..self.na)
            .map(|a| (0..self.nb).map(|b| (0..self.ne).map(|e| self.get(a, b, e)).sum()).collect())
            .collect()
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(Error::OutOfRange("distribution has negative or non-finite entries".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DIST_TOL {
        return Err(Error::OutOfRange(format!("distribution sums to {s}")));
    }
    Ok(())
}

/// `I(A:B)` in bits.
pub fn mutual_info(joint: &[Vec<f64>]) -> Result<f64> {
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    let nb = joint.first().map_or(0, Vec::len);
    if joint.iter().any(|r| r.len() != nb) || nb == 0 {
        return Err(Error::DimensionMismatch("ragged joint distribution".into()));
    }
    check_distribution(&flat)?;
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..nb).map(|b| joint.iter().map(|r| r[b]).sum()).collect();
    let h = |v: &[f64]| v.iter().map(|&x| eta(x)).sum::<f64>();
    Ok((h(&pa) + h(&pb) - h(&flat)).max(0.0))
}

/// `I(A:B|E)` in bits for a flat `[a][b][e]` table.
fn cmi_flat(p: &[f64], na: usize, nb: usize, ne: usize) -> f64 {
    let mut pae = vec![0.0; na * ne];
    let mut pbe = vec![0.0; nb * ne];
    let mut pe = vec![0.0; ne];
    let mut h_abe = 0.0;
    for a in 0..na {
        for b in 0..nb {
            for e in 0..ne {
                let v = p[(a * nb + b) * ne + e];
                pae[a * ne + e] += v;
                pbe[b * ne + e] += v;
                pe[e] += v;
                h_abe += eta(v);
            }
        }
    }
    let h = |v: &[f64]| v.iter().map(|&x| eta(x)).sum::<f64>();
    h(&pae) + h(&pbe) - h_abe - h(&pe)
}

/// Classical `I(A:B|E)` in bits.
pub fn conditional_mutual_info(p: &TripleDistribution) -> f64 {
    cmi_flat(&p.p, p.na, p.nb, p.ne).max(0.0)
}

// ---------------------------------------------------------------------------
// ccq states

/// `I(A:B|E) = S(AE) + S(BE) − S(ABE) − S(E)` from the block structure of a
/// ccq state.
pub fn cmi_ccq(c: &CcqState) -> Result<f64> {
    let (na, nb, d) = (c.a_count(), c.b_count(), c.eve_dim());
    let mut s_abe = 0.0;
    for blk in c.blocks() {
        s_abe += operator_entropy(blk)?;
    }
    let mut s_ae = 0.0;
    for a in 0..na {
        let sum = (0..nb).fold(ComplexMatrix::zeros(d, d), |acc, b| &acc + c.block(a, b));
        s_ae += operator_entropy(&sum)?;
    }
    let mut s_be = 0.0;
    for b in 0..nb {
        let sum = (0..na).fold(ComplexMatrix::zeros(d, d), |acc, a| &acc + c.block(a, b));
        s_be += operator_entropy(&sum)?;
    }
    let s_e = operator_entropy(&c.eve_marginal())?;
    Ok((s_ae + s_be - s_abe - s_e).max(0.0))
}

// ---------------------------------------------------------------------------
// intrinsic information

/// Stochastic post-processing `P(ē|e)`, stored row-major as `[e][ē]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EveChannel {
    n_in: usize,
    n_out: usize,
    m: Vec<f64>,
}

impl EveChannel {
    pub fn new(n_in: usize, n_out: usize, m: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 || m.len() != n_in * n_out {
            return Err(Error::DimensionMismatch("channel matrix shape".into()));
        }
        if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::OutOfRange("negative channel entry".into()));
        }
        for row in m.chunks(n_out) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::OutOfRange(format!("channel row sums to {s}")));
            }
        }
        Ok(Self { n_in, n_out, m })
    }

    /// Deterministic channel `e ↦ map[e]`.
    pub fn deterministic(map: &[usize], n_out: usize) -> Result<Self> {
        let mut m = vec![0.0; map.len() * n_out];
        for (e, &o) in map.iter().enumerate() {
            if o >= n_out {
                return Err(Error::OutOfRange(format!("output symbol {o} ≥ {n_out}")));
            }
            m[e * n_out + o] = 1.0;
        }
        Self::new(map.len(), n_out, m)
    }

    pub fn identity(n: usize) -> Self {
        Self::deterministic(&(0..n).collect::<Vec<_>>(), n).expect("identity is a channel")
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn prob(&self, e: usize, e_bar: usize) -> f64 {
        self.m[e * self.n_out + e_bar]
    }

    pub fn apply(&self, p: &TripleDistribution) -> Result<TripleDistribution> {
        if p.ne != self.n_in {
            return Err(Error::DimensionMismatch(format!(
                "channel on {} symbols applied to alphabet {}",
                self.n_in, p.ne
            )));
        }
        let q = push_forward(&p.p, p.na * p.nb, p.ne, &self.m, self.n_out);
        Ok(TripleDistribution { na: p.na, nb: p.nb, ne: self.n_out, p: q })
    }

    /// The same channel with zero-probability outputs appended up to `n_out`.
    fn padded(&self, n_out: usize) -> Self {
        let mut m = vec![0.0; self.n_in * n_out];
        for e in 0..self.n_in {
            for o in 0..self.n_out.min(n_out) {
                m[e * n_out + o] = self.prob(e, o);
            }
        }
        Self { n_in: self.n_in, n_out, m }
    }
}

fn push_forward(p: &[f64], n_ab: usize, ne: usize, ch: &[f64], n_out: usize) -> Vec<f64> {
    let mut q = vec![0.0; n_ab * n_out];
    for ab in 0..n_ab {
        for e in 0..ne {
            let v = p[ab * ne + e];
            if v == 0.0 {
                continue;
            }
            let row = &ch[e * n_out..(e + 1) * n_out];
            let out = &mut q[ab * n_out..(ab + 1) * n_out];
            for (o, c) in out.iter_mut().zip(row) {
                *o += v * c;
            }
        }
    }
    q
}

/// Largest Eve alphabet accepted by `intrinsic_info`.
pub const MAX_EVE_ALPHABET: usize = 64;

#[derive(Debug, Clone)]
pub struct IntrinsicConfig {
    pub seed: u64,
    /// Exhaustive search over deterministic channels while `|E|^|E|` is at most this;
    /// otherwise this many random deterministic channels.
    pub deterministic_cap: usize,
    pub restarts: usize,
    pub nelder_mead: NelderMeadConfig,
    /// Extra channels (any output size ≤ |E|) to evaluate and refine from.
    pub hints: Vec<EveChannel>,
}

impl Default for IntrinsicConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            deterministic_cap: 50_000,
            restarts: 4,
            nelder_mead: NelderMeadConfig { initial_step: 0.3, diameter_tol: 1e-9, max_evals: 20_000 },
            hints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntrinsicResult {
    pub value: f64,
    pub channel: EveChannel,
}

/// `min over P(ē|e)` of `I(A:B|Ē)`, with `|Ē| = |E|`.
///
/// Every reported value is the exact conditional mutual information of the
/// returned channel, so the result is an upper bound on the true minimum.
pub fn intrinsic_info(p: &TripleDistribution, cfg: &IntrinsicConfig) -> Result<IntrinsicResult> {
    let ne = p.ne;
    if ne > MAX_EVE_ALPHABET {
        return Err(Error::AlphabetTooLarge(ne));
    }
    let n_ab = p.na * p.nb;
    let eval = |ch: &[f64]| -> f64 { cmi_flat(&push_forward(&p.p, n_ab, ne, ch, ne), p.na, p.nb, ne) };
    let det_matrix = |map: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; ne * ne];
        for (e, &o) in map.iter().enumerate() {
            m[e * ne + o] = 1.0;
        }
        m
    };

    // deterministic stage
    let total = (ne as f64).powi(ne as i32);
    let maps: Vec<Vec<usize>> = if total <= cfg.deterministic_cap as f64 {
        let total = total as usize;
        (0..total)
            .map(|mut k| {
                (0..ne)
                    .map(|_| {
                        let d = k % ne;
                        k /= ne;
                        d
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut v: Vec<Vec<usize>> = (0..cfg.deterministic_cap)
            .map(|_| (0..ne).map(|_| rng.gen_range(0..ne)).collect())
            .collect();
        v.push((0..ne).collect());
        v.push(vec![0; ne]);
        v
    };
    let mut scored: Vec<(f64, Vec<f64>)> = maps
        .par_iter()
        .map(|m| {
            let ch = det_matrix(m);
            (eval(&ch), ch)
        })
        .collect();
    for h in &cfg.hints {
        if h.n_in != ne || h.n_out > ne {
            return Err(Error::DimensionMismatch("hint channel alphabet".into()));
        }
        let ch = h.padded(ne).m;
        scored.push((eval(&ch), ch));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // distinct starting points for refinement
    let mut starts: Vec<&(f64, Vec<f64>)> = Vec::new();
    for s in &scored {
        if starts.len() >= cfg.restarts {
            break;
        }
        if starts.iter().all(|t| t.1 != s.1) {
            starts.push(s);
        }
    }
    // hints always seed a refinement
    for s in scored.iter().filter(|s| cfg.hints.iter().any(|h| h.padded(ne).m == s.1)) {
        if starts.iter().all(|t| t.1 != s.1) {
            starts.push(s);
        }
    }
    let (mut best_val, mut best_ch) = scored[0].clone();
    if best_val <= 0.0 {
        return Ok(IntrinsicResult { value: 0.0, channel: EveChannel { n_in: ne, n_out: ne, m: best_ch } });
    }

    // continuous refinement: row e is (θ_e ⊙ θ_e)/‖θ_e‖²
    let decode = |theta: &[f64]| -> Vec<f64> {
        let mut m = vec![0.0; ne * ne];
        for e in 0..ne {
            let row = &theta[e * ne..(e + 1) * ne];
            let s: f64 = row.iter().map(|v| v * v).sum();
            for o in 0..ne {
                m[e * ne + o] = if s > 0.0 { row[o] * row[o] / s } else { 1.0 / ne as f64 };
            }
        }
        m
    };
    let refined: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|(_, ch)| {
            let x0: Vec<f64> = ch.iter().map(|&v| if v > 0.5 { 1.0 } else { v.sqrt().max(0.05) }).collect();
            let res = nelder_mead(|th| eval(&decode(th)), &x0, &cfg.nelder_mead);
            let m = decode(&res.x);
            (eval(&m), m)
        })
        .collect();
    for (v, m) in refined {
        if v < best_val {
            best_val = v;
            best_ch = m;
        }
    }
    Ok(IntrinsicResult { value: best_val.max(0.0), channel: EveChannel { n_in: ne, n_out: ne, m: best_ch } })
}

// ---------------------------------------------------------------------------
// relative entropy of entanglement

/// `1 − H(λ)` for `λ ∈ [½, 1]`.
pub fn er_bell_diagonal_closed(lambda_max: f64) -> Result<f64> {
    if !(0.5 - 1e-12..=1.0 + 1e-12).contains(&lambda_max) {
        return Err(Error::OutOfRange(format!("largest Bell weight {lambda_max} not in [1/2, 1]")));
    }
    Ok((1.0 - h2(lambda_max.clamp(0.5, 1.0))).max(0.0))
}

/// Isotropic-state `E_R` from its singlet fraction `λ`; zero for `λ ≤ ½`.
pub fn er_isotropic_from_lambda(lambda: f64) -> Result<f64> {
    if !(0.0..=1.0 + 1e-12).contains(&lambda) {
        return Err(Error::OutOfRange(format!("singlet fraction {lambda} not in [0, 1]")));
    }
    if lambda <= 0.5 {
        return Ok(0.0);
    }
    Ok((1.0 - h2(lambda.min(1.0))).max(0.0))
}

/// Singlet fraction of the isotropic state with CHSH value `ω`.
pub fn isotropic_lambda(omega: f64) -> f64 {
    3.0 * omega / (8.0 * SQRT_2) + 0.25
}

/// Isotropic-state `E_R` as a function of its CHSH value `ω ∈ [0, 2√2]`.
pub fn er_isotropic_closed(omega: f64) -> Result<f64> {
    if !(-1e-12..=2.0 * SQRT_2 + 1e-12).contains(&omega) {
        return Err(Error::OutOfRange(format!("CHSH value {omega} not in [0, 2√2]")));
    }
    er_isotropic_from_lambda(isotropic_lambda(omega.clamp(0.0, 2.0 * SQRT_2)).min(1.0))
}

/// Separable ensemble `σ = Σₖ qₖ |aₖ⟩⟨aₖ| ⊗ |bₖ⟩⟨bₖ|`.
#[derive(Debug, Clone)]
pub struct ProductEnsemble {
    pub weights: Vec<f64>,
    pub alice: Vec<Vec<C64>>,
    pub bob: Vec<Vec<C64>>,
}

impl ProductEnsemble {
    pub fn new(weights: Vec<f64>, alice: Vec<Vec<C64>>, bob: Vec<Vec<C64>>) -> Result<Self> {
        if weights.len() != alice.len() || weights.len() != bob.len() || weights.is_empty() {
            return Err(Error::DimensionMismatch("ensemble term counts differ".into()));
        }
        check_distribution(&weights)?;
        let unit = |v: &Vec<C64>| (v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9;
        if !alice.iter().chain(&bob).all(unit) {
            return Err(Error::OutOfRange("ensemble vectors must be normalised".into()));
        }
        Ok(Self { weights, alice, bob })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.alice[0].len(), self.bob[0].len())
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        let (da, db) = self.dims();
        let mut m = ComplexMatrix::zeros(da * db, da * db);
        for ((q, a), b) in self.weights.iter().zip(&self.alice).zip(&self.bob) {
            let term = kron(&ComplexMatrix::outer(a), &ComplexMatrix::outer(b));
            m = &m + &term.scale(*q);
        }
        DensityMatrix::new(m.hermitian_part(), vec![da, db])
    }
}

#[derive(Debug, Clone)]
pub struct ErConfig {
    /// Number of product terms; defaults to 16 for 2⊗2 and 24 for 2⊗3.
    pub terms: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub lbfgs: LbfgsConfig,
}

impl Default for ErConfig {
    fn default() -> Self {
        Self { terms: None, restarts: 8, seed: 0, lbfgs: LbfgsConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ErResult {
    /// `D(ρ‖σ)` of the best ensemble found, in bits.
    pub value: f64,
    pub ensemble: ProductEnsemble,
}

/// Parameter layout per term: weight amplitude, then `re, im` pairs of the
/// unnormalised Alice and Bob vectors.
struct ErProblem<'a> {
    rho: &'a ComplexMatrix,
    neg_entropy: f64,
    k: usize,
    da: usize,
    db: usize,
}

impl ErProblem<'_> {
    fn stride(&self) -> usize {
        1 + 2 * self.da + 2 * self.db
    }

    fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<C64>>, Vec<Vec<C64>>, Vec<f64>, Vec<f64>) {
        let st = self.stride();
        let s2: Vec<f64> = (0..self.k).map(|i| x[i * st].powi(2)).collect();
        let total: f64 = s2.iter().sum::<f64>().max(1e-300);
        let weights = s2.iter().map(|v| v / total).collect();
        let mut alice = Vec::with_capacity(self.k);
        let mut bob = Vec::with_capacity(self.k);
        let mut na = Vec::with_capacity(self.k);
        let mut nb = Vec::with_capacity(self.k);
        for i in 0..self.k {
            let base = i * st + 1;
            let u: Vec<C64> = (0..self.da).map(|j| C64::new(x[base + 2 * j], x[base + 2 * j + 1])).collect();
            let off = base + 2 * self.da;
            let v: Vec<C64> = (0..self.db).map(|j| C64::new(x[off + 2 * j], x[off + 2 * j + 1])).collect();
            let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            alice.push(u.iter().map(|z| z / nu).collect());
            bob.push(v.iter().map(|z| z / nv).collect());
            na.push(nu);
            nb.push(nv);
        }
        (weights, alice, bob, na, nb)
    }

    fn sigma(&self, w: &[f64], alice: &[Vec<C64>], bob: &[Vec<C64>]) -> ComplexMatrix {
        let n = self.da * self.db;
        let mut m = ComplexMatrix::zeros(n, n);
        for ((q, a), b) in w.iter().zip(alice).zip(bob) {
            let psi: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += psi[i] * psi[j].conj() * *q;
                }
            }
        }
        m
    }

    /// `D(ρ‖σ(x))` in bits and its gradient.
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let fail = (f64::INFINITY, vec![0.0; x.len()]);
        let (w, alice, bob, na, nb) = self.unpack(x);
        let sigma = self.sigma(&w, &alice, &bob);
        let Ok(spec) = hermitian_eig(&sigma) else { return fail };
        let n = sigma.rows();
        let s = &spec.eigenvalues;
        if s.iter().any(|&v| !(v > 1e-300)) {
            return fail;
        }
        let u = &spec.eigenvectors;
        // ρ in σ's eigenbasis
        let Ok(rt) = u.adjoint().matmul(self.rho).and_then(|m| m.matmul(u)) else { return fail };
        let logs: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        let cross: f64 = (0..n).map(|i| rt[(i, i)].re * logs[i]).sum();
        let value = self.neg_entropy - cross / LN_2;
        if !value.is_finite() {
            return fail;
        }
        // G = −D log_σ[ρ] / ln 2, the gradient with respect to σ
        let mut gt = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let gamma = if (s[i] - s[j]).abs() <= 1e-12 * s[i].max(s[j]) {
                    2.0 / (s[i] + s[j])
                } else {
                    (logs[i] - logs[j]) / (s[i] - s[j])
                };
                gt[(i, j)] = rt[(i, j)] * (-gamma / LN_2);
            }
        }
        let Ok(g) = u.matmul(&gt).and_then(|m| m.matmul(&u.adjoint())) else { return fail };

        let st = self.stride();
        let mut grad = vec![0.0; x.len()];
        let mut gk = vec![0.0; self.k];
        for i in 0..self.k {
            let (a, b) = (&alice[i], &bob[i]);
            // M_a = (𝟙⊗⟨b|) G (𝟙⊗|b⟩), M_b = (⟨a|⊗𝟙) G (|a⟩⊗𝟙)
            let mut ma = vec![C64::new(0.0, 0.0); self.da * self.da];
            let mut mb = vec![C64::new(0.0, 0.0); self.db * self.db];
            for i1 in 0..self.da {
                for j1 in 0..self.db {
                    for i2 in 0..self.da {
                        for j2 in 0..self.db {
                            let gv = g[(i1 * self.db + j1, i2 * self.db + j2)];
                            ma[i1 * self.da + i2] += b[j1].conj() * gv * b[j2];
                            mb[j1 * self.db + j2] += a[i1].conj() * gv * a[i2];
                        }
                    }
                }
            }
            let quad = |m: &[C64], v: &[C64], d: usize| -> (f64, Vec<C64>) {
                let mv: Vec<C64> =
                    (0..d).map(|r| (0..d).map(|c| m[r * d + c] * v[c]).sum()).collect();
                let val: f64 = v.iter().zip(&mv).map(|(x, y)| (x.conj() * y).re).sum();
                (val, mv)
            };
            let (val_a, ma_a) = quad(&ma, a, self.da);
            let (_, mb_b) = quad(&mb, b, self.db);
            gk[i] = val_a;
            let base = i * st + 1;
            for j in 0..self.da {
                // ∇ of u†Mu/u†u with u = ‖u‖·a
                let r = (ma_a[j] - a[j] * val_a) * (2.0 * w[i] / na[i]);
                grad[base + 2 * j] = r.re;
                grad[base + 2 * j + 1] = r.im;
            }
            let off = base + 2 * self.da;
            for j in 0..self.db {
                let r = (mb_b[j] - b[j] * val_a) * (2.0 * w[i] / nb[i]);
                grad[off + 2 * j] = r.re;
                grad[off + 2 * j + 1] = r.im;
            }
        }
        let mean: f64 = w.iter().zip(&gk).map(|(q, g)| q * g).sum();
        let s2: f64 = (0..self.k).map(|i| x[i * st].powi(2)).sum::<f64>().max(1e-300);
        for i in 0..self.k {
            grad[i * st] = 2.0 * x[i * st] * (gk[i] - mean) / s2;
        }
        (value, grad)
    }

    fn random_start(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.k * self.stride()).map(|_| gaussian(rng)).collect();
        for i in 0..self.k {
            x[i * self.stride()] = 0.5 + rng.gen::<f64>();
        }
        x
    }

    /// Dephases ρ in the product of its marginals' eigenbases; extra terms get
    /// small weight on random vectors.
    fn warm_start(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let dims = [self.da, self.db];
        let rho = DensityMatrix::new(self.rho.clone(), dims.to_vec())?;
        let ea = hermitian_eig(rho.reduce(&[0])?.matrix())?.eigenvectors;
        let eb = hermitian_eig(rho.reduce(&[1])?.matrix())?.eigenvectors;
        let mut x = self.random_start(rng);
        let st = self.stride();
        let mut term = 0;
        for i in 0..self.da {
            for j in 0..self.db {
                if term >= self.k {
                    break;
                }
                let a = ea.column_vec(i);
                let b = eb.column_vec(j);
                let psi: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
                let p = (0..psi.len())
                    .map(|r| {
                        (0..psi.len()).map(|c| psi[r].conj() * self.rho[(r, c)] * psi[c]).sum::<C64>().re
                    })
                    .sum::<f64>();
                let base = term * st;
                x[base] = p.max(1e-6).sqrt();
                for (jj, z) in a.iter().enumerate() {
                    x[base + 1 + 2 * jj] = z.re;
                    x[base + 2 + 2 * jj] = z.im;
                }
                let off = base + 1 + 2 * self.da;
                for (jj, z) in b.iter().enumerate() {
                    x[off + 2 * jj] = z.re;
                    x[off + 2 * jj + 1] = z.im;
                }
                term += 1;
            }
        }
        for t in term..self.k {
            x[t * st] = 1e-3;
        }
        Ok(x)
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Upper bound on `E_R(ρ)` from an optimised separable ensemble.
pub fn er_numeric(rho: &DensityMatrix, cfg: &ErConfig) -> Result<ErResult> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] * dims[1] > 12 || dims[0] < 2 || dims[1] < 2 {
        return Err(Error::DimensionMismatch(format!(
            "numerical E_R supports bipartite d_A·d_B ≤ 12, got {dims:?}"
        )));
    }
    let (da, db) = (dims[0], dims[1]);
    let k = cfg.terms.unwrap_or(if da * db <= 4 { 16 } else { 24 });
    if k == 0 {
        return Err(Error::OutOfRange("ensemble needs at least one term".into()));
    }
    let neg_entropy = -von_neumann_entropy(rho)?;
    let problem = ErProblem { rho: rho.matrix(), neg_entropy, k, da, db };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![problem.warm_start(&mut rng)?];
    for _ in 0..cfg.restarts {
        starts.push(problem.random_start(&mut rng));
    }
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| lbfgs(|x| problem.value_grad(x), x0, &cfg.lbfgs))
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    let (w, alice, bob, _, _) = problem.unpack(&best.x);
    let w_sum: f64 = w.iter().sum();
    let ensemble = ProductEnsemble::new(w.iter().map(|v| v / w_sum).collect(), alice, bob)?;
    // report the directly evaluated divergence of the final σ
    let value = relative_entropy(rho, &ensemble.state()?)?;
    if !value.is_finite() {
        return Err(Error::NumericalFailure("no separable state with full support found".into()));
    }
    Ok(ErResult { value, ensemble })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{assemble_ccq, broadcast_ccq, honest_chsh_device, EveMap, Povm};
    use crate::linalg::pauli_z;
    use crate::states::{make_bell_diagonal, make_isotropic, phi_plus, tests::random_state};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn bsc(eps: f64) -> Vec<Vec<f64>> {
        vec![vec![(1.0 - eps) / 2.0, eps / 2.0], vec![eps / 2.0, (1.0 - eps) / 2.0]]
    }

    #[test]
    fn mutual_info_examples() {
        assert!((mutual_info(&bsc(0.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(mutual_info(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap().abs() < 1e-12);
        let want = 1.0 - h2(0.11);
        assert!((mutual_info(&bsc(0.11)).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.5001).abs() < 1e-4);
        assert!(mutual_info(&[vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn cmi_ccq_examples() {
        // trivial Eve
        let blocks = bsc(0.2).iter().flatten().map(|&v| ComplexMatrix::from_diag(&[v])).collect();
        let c = CcqState::new(2, 2, blocks).unwrap();
        assert!((cmi_ccq(&c).unwrap() - mutual_info(&bsc(0.2)).unwrap()).abs() < 1e-12);

        // Eve holds a copy of (a, b)
        let mut blocks = Vec::new();
        for k in 0..4 {
            let mut d = vec![0.0; 4];
            d[k] = 0.25;
            blocks.push(ComplexMatrix::from_diag(&d));
        }
        let c = CcqState::new(2, 2, blocks).unwrap();
        assert!(cmi_ccq(&c).unwrap().abs() < 1e-12);

        // pure Φ⁺ measured in Z: Eve decoupled, one shared bit
        let z = Povm::from_observable(&pauli_z()).unwrap();
        let c = assemble_ccq(&DensityMatrix::from_pure(&phi_plus()), (&z, &z), &EveMap::Identity).unwrap();
        assert!((cmi_ccq(&c).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flag_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fam = crate::devices::honest_measurements();
        for _ in 0..10 {
            let rho = random_state(&[2, 2], &mut rng);
            let t: f64 = rng.gen();
            let settings = [(0, 0, t), (2, 1, 1.0 - t)];
            let maps = [EveMap::Identity, EveMap::Identity];
            let whole = cmi_ccq(&broadcast_ccq(&rho, &fam, &settings, &maps).unwrap()).unwrap();
            let parts: f64 = settings
                .iter()
                .map(|&(x, y, w)| {
                    w * cmi_ccq(&assemble_ccq(&rho, (&fam.alice[x], &fam.bob[y]), &EveMap::Identity).unwrap())
                        .unwrap()
                })
                .sum();
            assert!((whole - parts).abs() < 1e-9);
        }
    }

    #[test]
    fn er_closed_forms() {
        assert!((er_isotropic_closed(2.0 * SQRT_2).unwrap() - 1.0).abs() < 1e-12);
        let at2 = er_isotropic_closed(2.0).unwrap();
        assert!((isotropic_lambda(2.0) - 0.780_330_085_889_910_6).abs() < 1e-12);
        assert!((at2 - (1.0 - h2(isotropic_lambda(2.0)))).abs() < 1e-15);
        assert!((at2 - 0.240_435_682_349_715_8).abs() < 1e-12);
        assert_eq!(er_isotropic_from_lambda(0.5).unwrap(), 0.0);
        assert_eq!(er_isotropic_from_lambda(0.3).unwrap(), 0.0);
        assert!(er_isotropic_closed(3.0).is_err());

        assert!((er_bell_diagonal_closed(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(er_bell_diagonal_closed(0.5).unwrap().abs() < 1e-12);
        let c = (2.5f64 * 2.5 / 4.0 - 1.0).sqrt();
        assert!((c - 0.75).abs() < 1e-12);
        assert!((er_bell_diagonal_closed((1.0 + c) / 2.0).unwrap() - (1.0 - h2(0.875))).abs() < 1e-15);
        assert!(er_bell_diagonal_closed(0.4).is_err());
    }

    #[test]
    fn er_numeric_phi_plus_and_products() {
        let cfg = ErConfig { restarts: 2, ..Default::default() };
        let v = er_numeric(&DensityMatrix::from_pure(&phi_plus()), &cfg).unwrap().value;
        assert!((v - 1.0).abs() < 1e-3, "{v}");

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dims in [[2, 2], [2, 3]] {
            let a = random_state(&dims[..1], &mut rng);
            let b = random_state(&dims[1..], &mut rng);
            let v = er_numeric(&a.tensor(&b), &cfg).unwrap().value;
            assert!(v.abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn er_numeric_isotropic() {
        let omega = 2.4;
        let nu = 1.0 - omega / (2.0 * SQRT_2);
        let rho = make_isotropic(nu).unwrap();
        let v = er_numeric(&rho, &ErConfig::default()).unwrap().value;
        let want = er_isotropic_closed(omega).unwrap();
        assert!((v - want).abs() < 1e-3, "{v} vs {want}");
        assert!(v >= want - 1e-9);
    }

    #[test]
    fn er_numeric_bell_diagonal() {
        let rho = make_bell_diagonal(0.875, 0.125).unwrap();
        let v = er_numeric(&rho, &ErConfig::default()).unwrap().value;
        let want = er_bell_diagonal_closed(0.875).unwrap();
        assert!((v - want).abs() < 1e-3, "{v} vs {want}");
    }

    #[test]
    fn er_numeric_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_state(&[2, 2], &mut rng);
        let cfg = ErConfig { restarts: 2, seed: 3, ..Default::default() };
        let a = er_numeric(&rho, &cfg).unwrap().value;
        let b = er_numeric(&rho, &cfg).unwrap().value;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn er_numeric_rejects_large_systems() {
        let rho = DensityMatrix::maximally_mixed(vec![4, 4]);
        assert!(matches!(er_numeric(&rho, &ErConfig::default()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn er_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random_state(&[2, 3], &mut rng);
        let problem = ErProblem {
            rho: rho.matrix(),
            neg_entropy: -von_neumann_entropy(&rho).unwrap(),
            k: 7,
            da: 2,
            db: 3,
        };
        let x = problem.random_start(&mut rng);
        let (_, g) = problem.value_grad(&x);
        for i in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (problem.value_grad(&xp).0 - problem.value_grad(&xm).0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    fn noisy_copy(noise: f64) -> TripleDistribution {
        // a, b uniform and equal; e = a ⊕ n with n ~ Bernoulli(noise)
        let mut p = vec![0.0; 8];
        for a in 0..2 {
            for e in 0..2 {
                p[(a * 2 + a) * 2 + e] = 0.5 * if e == a { 1.0 - noise } else { noise };
            }
        }
        TripleDistribution::new(2, 2, 2, p).unwrap()
    }

    #[test]
    fn intrinsic_examples() {
        let cfg = IntrinsicConfig::default();
        // Eve independent
        let mut p = vec![0.0; 8];
        for (ab, w) in bsc(0.1).iter().flatten().enumerate() {
            p[ab * 2] = w * 0.3;
            p[ab * 2 + 1] = w * 0.7;
        }
        let indep = TripleDistribution::new(2, 2, 2, p).unwrap();
        let v = intrinsic_info(&indep, &cfg).unwrap().value;
        assert!((v - mutual_info(&bsc(0.1)).unwrap()).abs() < 1e-9);

        // Eve holds a copy
        let mut p = vec![0.0; 16];
        for ab in 0..4 {
            p[ab * 4 + ab] = 0.25;
        }
        let copy = TripleDistribution::new(2, 2, 4, p).unwrap();
        assert_eq!(intrinsic_info(&copy, &cfg).unwrap().value, 0.0);

        // e = a ⊕ n, n ~ Bernoulli(¼): conditioning on e is already optimal
        let p = noisy_copy(0.25);
        let v = intrinsic_info(&p, &cfg).unwrap().value;
        let brute = (0..4)
            .map(|k| {
                let map = [k % 2, k / 2];
                conditional_mutual_info(&EveChannel::deterministic(&map, 2).unwrap().apply(&p).unwrap())
            })
            .fold(f64::INFINITY, f64::min);
        assert!((v - brute).abs() < 1e-6, "{v} vs {brute}");
        assert!((v - h2(0.25)).abs() < 1e-9);
    }

    #[test]
    fn intrinsic_rejects_large_alphabets() {
        let ne = MAX_EVE_ALPHABET + 1;
        let p = TripleDistribution::new(1, 1, ne, vec![1.0 / ne as f64; ne]).unwrap();
        assert!(matches!(intrinsic_info(&p, &IntrinsicConfig::default()), Err(Error::AlphabetTooLarge(_))));
    }

    #[test]
    fn intrinsic_hint_is_respected() {
        let p = noisy_copy(0.1);
        let hint = EveChannel::deterministic(&[0, 0], 1).unwrap();
        let cfg = IntrinsicConfig { hints: vec![hint], restarts: 1, ..Default::default() };
        let v = intrinsic_info(&p, &cfg).unwrap().value;
        assert!(v <= conditional_mutual_info(&p) + 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn intrinsic_below_unprocessed(raw in proptest::collection::vec(0.01f64..1.0, 12)) {
            let s: f64 = raw.iter().sum();
            let p = TripleDistribution::new(2, 2, 3, raw.iter().map(|v| v / s).collect()).unwrap();
            let cfg = IntrinsicConfig { restarts: 1, ..Default::default() };
            let v = intrinsic_info(&p, &cfg).unwrap().value;
            prop_assert!(v <= conditional_mutual_info(&p) + 1e-9);
            let classical = CcqState::from_classical(&p).unwrap();
            prop_assert!(v <= cmi_ccq(&classical).unwrap() + 1e-9);
        }

        #[test]
        fn cmi_is_nonnegative(raw in proptest::collection::vec(0.0f64..1.0, 8), seed in 0u64..1000) {
            let s: f64 = raw.iter().sum::<f64>().max(1e-9);
            let p = TripleDistribution::new(2, 2, 2, raw.iter().map(|v| v / s).collect());
            if let Ok(p) = p {
                prop_assert!(conditional_mutual_info(&p) >= 0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_state(&[2, 2], &mut rng);
            let (_, fam) = honest_chsh_device(0.0).unwrap();
            let c = assemble_ccq(&rho, (&fam.alice[1], &fam.bob[0]), &EveMap::Identity).unwrap();
            prop_assert!(cmi_ccq(&c).unwrap() >= 0.0);
        }
    }
}
