//! Upper-bound curves for CHSH-based key rates and for channel devices.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::devices::{
    assemble_ccq, behavior_from, broadcast_ccq, chsh_value, honest_chsh_device, honest_omega, qber,
    Behavior, EveMap, MeasurementFamily, Povm, CHSH_ALICE, KEY_PAIR,
};
use crate::error::{Error, Result};
use crate::linalg::{pauli_x, pauli_z, ComplexMatrix};
use crate::measures::{
    cmi_ccq, er_isotropic_closed, intrinsic_info, EveChannel, IntrinsicConfig, TripleDistribution,
};
use crate::polytope::{max_local_weight, max_local_weight_with_nonlocal, LocalDecomposition};
use crate::states::{apply_channel, h2, phi_plus, ChannelKind, DensityMatrix, QubitChannel};

/// Isotropic noise at which the honest device stops violating CHSH.
pub const NU_CRITICAL: f64 = 1.0 - FRAC_1_SQRT_2;
pub const OMEGA_MAX: f64 = 2.0 * SQRT_2;
/// Slack on `ω ≥ 2` so that grid endpoints computed in floating point are kept.
const VIOLATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub param: f64,
    pub omega: f64,
    pub qber: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Nu,
    Omega,
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub name: String,
    pub axis: Axis,
    pub samples: Vec<CurveSample>,
}

impl BoundCurve {
    pub fn new(name: impl Into<String>, axis: Axis, samples: Vec<CurveSample>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].param > w[0].param)) {
            return Err(Error::OutOfRange("curve parameters must increase strictly".into()));
        }
        if samples.iter().any(|s| !(s.value >= 0.0) || s.value > 1.0 + 1e-9) {
            return Err(Error::OutOfRange("curve value outside [0, 1]".into()));
        }
        Ok(Self { name: name.into(), axis, samples })
    }

    pub fn params(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.param).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullResult {
    pub inputs: (String, String),
    pub hull: BoundCurve,
    /// Grid indices of the hull's vertices.
    pub support: Vec<usize>,
}

fn chsh_c(omega: f64) -> Option<f64> {
    if omega < 2.0 - VIOLATION_SLACK {
        None
    } else {
        let c2 = (omega / 2.0).powi(2) - 1.0;
        Some(if c2 <= VIOLATION_SLACK { 0.0 } else { c2.sqrt().min(1.0) })
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::OutOfRange(format!("noise {nu} not in [0, 1]")));
    }
    Ok(())
}

fn check_omega(omega: f64) -> Result<()> {
    if !(2.0 - VIOLATION_SLACK..=OMEGA_MAX + VIOLATION_SLACK).contains(&omega) {
        return Err(Error::OutOfRange(format!("CHSH value {omega} not in [2, 2√2]")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// attack-state bounds

/// Bell-diagonal attack state `(1+C)/2·Φ⁺ + (1−C)/2·Φ⁻` with `C = √((ω/2)² − 1)`.
pub fn attack_state(omega: f64) -> Result<DensityMatrix> {
    let c = chsh_c(omega).ok_or(Error::NoViolation(omega))?;
    crate::states::make_bell_diagonal((1.0 + c) / 2.0, (1.0 - c) / 2.0)
}

/// `I(A:B|E)` of the attack state measured with `σz` by Alice and by Bob's
/// `σz` replaced by a random bit with probability `2·P_err`.
pub fn al_bound(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let omega = honest_omega(nu);
    if chsh_c(omega).is_none_or(|c| c == 0.0) {
        return Ok(0.0);
    }
    let sigma = attack_state(omega)?;
    let perr = nu / 2.0;
    let z = Povm::from_observable(&pauli_z())?;
    let coin = Povm::new(vec![ComplexMatrix::identity(2).scale(0.5); 2])?;
    let bob = coin.mix(&z, 2.0 * perr)?;
    cmi_ccq(&assemble_ccq(&sigma, (&z, &bob), &EveMap::Identity)?)
}

/// Which behaviors may form the nonlocal part of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlocalModel {
    /// The noiseless honest device, a quantum behavior.
    #[default]
    HonestNoiseless,
    /// Any no-signaling behavior (maximal local weight).
    NoSignaling,
}

#[derive(Debug, Clone, Default)]
pub struct FbjlConfig {
    /// Let Eve keep the index of the sampled deterministic vertex.
    pub keep_index_register: bool,
    pub nonlocal: NonlocalModel,
    pub intrinsic: IntrinsicConfig,
}

#[derive(Debug, Clone)]
pub struct FbjlResult {
    pub value: f64,
    pub local_weight: f64,
}

/// Local/nonlocal attack: Eve learns the key outputs of the deterministic
/// vertex whenever the local part is used, and `?` otherwise; the result is the
/// intrinsic information of the key-setting distribution.
pub fn fbjl_bound(nu: f64, cfg: &FbjlConfig) -> Result<FbjlResult> {
    check_nu(nu)?;
    let (rho, fam) = honest_chsh_device(nu)?;
    let b = behavior_from(&rho, &fam)?;
    let dec = match cfg.nonlocal {
        NonlocalModel::NoSignaling => max_local_weight(&b)?,
        NonlocalModel::HonestNoiseless => {
            let (r0, f0) = honest_chsh_device(0.0)?;
            max_local_weight_with_nonlocal(&b, &[behavior_from(&r0, &f0)?])?
        }
    };
    let value = fbjl_from_decomposition(&b, &dec, KEY_PAIR, cfg)?;
    Ok(FbjlResult { value, local_weight: dec.local_weight })
}

/// Eve's view `p(a,b,e)` at the key setting for a given decomposition.
/// Without the register, symbols are `(a, b)` pairs in row-major order followed
/// by `?`; with it, one symbol per vertex in the decomposition followed by `?`.
pub fn eve_distribution(
    b: &Behavior,
    dec: &LocalDecomposition,
    key: (usize, usize),
    keep_index_register: bool,
) -> Result<TripleDistribution> {
    let (x, y) = key;
    let (na, nb) = (b.a_count(), b.b_count());
    let n_local = if keep_index_register { dec.vertices.len() } else { na * nb };
    let ne = n_local + 1;
    let mut p = vec![0.0; na * nb * ne];
    for (i, (v, w)) in dec.vertices.iter().enumerate() {
        let (a, bb) = (v.a[x], v.b[y]);
        let e = if keep_index_register { i } else { a * nb + bb };
        p[(a * nb + bb) * ne + e] += w;
    }
    if dec.residual_used {
        let nl = 1.0 - dec.local_weight;
        for a in 0..na {
            for bb in 0..nb {
                p[(a * nb + bb) * ne + n_local] += nl * dec.residual.get(x, y, a, bb);
            }
        }
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    TripleDistribution::new(na, nb, ne, p)
}

/// Attack value for an explicit decomposition.
pub fn fbjl_from_decomposition(
    b: &Behavior,
    dec: &LocalDecomposition,
    key: (usize, usize),
    cfg: &FbjlConfig,
) -> Result<f64> {
    let coarse = eve_distribution(b, dec, key, false)?;
    let coarse_val = intrinsic_info(&coarse, &cfg.intrinsic)?.value;
    if !cfg.keep_index_register {
        return Ok(coarse_val);
    }
    // Eve can always forget the index, so the coarse optimum is attainable too.
    let fine = eve_distribution(b, dec, key, true)?;
    let nb = b.b_count();
    let n_coarse = b.a_count() * nb;
    let mut map: Vec<usize> = dec.vertices.iter().map(|(v, _)| v.a[key.0] * nb + v.b[key.1]).collect();
    map.push(n_coarse);
    let forget = EveChannel::deterministic(&map, n_coarse + 1)?;
    let mut icfg = cfg.intrinsic.clone();
    if forget.n_out() <= fine.shape().2 {
        icfg.hints.push(forget);
    }
    let fine_val = intrinsic_info(&fine, &icfg)?.value;
    Ok(fine_val.min(coarse_val))
}

// ---------------------------------------------------------------------------
// hull

/// Lower convex envelope of `min(c1, c2)` over the shared parameter grid.
pub fn convex_hull_bound(c1: &BoundCurve, c2: &BoundCurve) -> Result<HullResult> {
    if c1.samples.len() != c2.samples.len()
        || c1.samples.iter().zip(&c2.samples).any(|(a, b)| a.param != b.param)
        || c1.samples.is_empty()
    {
        return Err(Error::GridMismatch);
    }
    let pts: Vec<(f64, f64)> =
        c1.samples.iter().zip(&c2.samples).map(|(a, b)| (a.param, a.value.min(b.value))).collect();
    let support = lower_hull(&pts);
    let samples = c1
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let k = support.partition_point(|&j| j <= i).saturating_sub(1);
            let value = if support[k] == i || k + 1 >= support.len() {
                pts[support[k]].1
            } else {
                let (x0, y0) = pts[support[k]];
                let (x1, y1) = pts[support[k + 1]];
                let t = (s.param - x0) / (x1 - x0);
                y0 + t * (y1 - y0)
            };
            // never above the pointwise minimum
            CurveSample { value: value.min(pts[i].1).max(0.0), ..*s }
        })
        .collect();
    Ok(HullResult {
        inputs: (c1.name.clone(), c2.name.clone()),
        hull: BoundCurve::new(format!("hull({},{})", c1.name, c2.name), c1.axis, samples)?,
        support,
    })
}

/// Monotone-chain lower hull; returns indices of the hull vertices.
fn lower_hull(pts: &[(f64, f64)]) -> Vec<usize> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..pts.len() {
        while hull.len() >= 2 {
            let (o, a) = (pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]]);
            // drop the middle point unless it lies strictly below the chord
            if cross(o, a, pts[i]) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

// ---------------------------------------------------------------------------
// relative-entropy bounds

/// `min over ω₁` of `(ω−2)/(ω₁−2) · E_R(ρ_iso(ω₁))`.
pub fn fractional_er_bound(omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let omega = omega.clamp(2.0, OMEGA_MAX);
    if omega - 2.0 <= VIOLATION_SLACK {
        return Ok(0.0);
    }
    let objective = |w1: f64| -> f64 {
        let p = ((omega - 2.0) / (w1 - 2.0)).min(1.0);
        p * er_isotropic_closed(w1).unwrap_or(f64::INFINITY)
    };
    let lo = omega.max(2.0 + 1e-9);
    let hi = OMEGA_MAX;
    if hi - lo <= 1e-12 {
        return Ok(objective(hi).clamp(0.0, 1.0));
    }
    let n = 256;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let (k, _) = grid
        .iter()
        .map(|&w| objective(w))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(n - 1)];
    let mut best = objective(grid[k]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    best = best.min(fc).min(fd);
    Ok(best.clamp(0.0, 1.0))
}

/// `E_R` of the Bell-diagonal attack state: `1 − H((1+C)/2)`.
pub fn pironio_er_bound(omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let c = chsh_c(omega).unwrap_or(0.0);
    Ok((1.0 - h2((1.0 + c) / 2.0)).max(0.0))
}

// ---------------------------------------------------------------------------
// channel devices

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("channel noise {p} not in [0, 1]")));
    }
    Ok(())
}

/// Bounds on the DI capacity of qubit channels.
pub fn channel_di_bound(kind: ChannelKind, p: f64) -> Result<f64> {
    check_p(p)?;
    let disc = 1.0 - 4.0 * p + 2.0 * p * p;
    let attack = if disc <= VIOLATION_SLACK { 0.0 } else { 1.0 - h2(0.5 * (1.0 - disc.sqrt())) };
    let v = match kind {
        ChannelKind::Dephasing => 1.0 - h2(p),
        ChannelKind::Depolarizing => attack.min(1.0 - h2(0.75 * p)),
        ChannelKind::Erasure => attack.min(1.0 - p),
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Bob's three inputs on channel devices: key, then the two CHSH settings.
pub const CHANNEL_CHSH_BOB: (usize, usize) = (1, 2);

/// `Φ⁺` with the channel applied to Bob's half, measured so that the CHSH
/// test uses Alice's inputs 1, 2 and Bob's inputs 1, 2, and the key uses
/// input 0 on both sides. On the erasure output Bob's key measurement reports
/// the flag as outcome 2 while his test measurements map it to outcome 0;
/// Alice's key outcome is flipped so that the key error rate is one.
pub fn channel_device(kind: ChannelKind, p: f64) -> Result<(DensityMatrix, MeasurementFamily)> {
    check_p(p)?;
    let ch = QubitChannel::new(kind, p)?;
    let rho = apply_channel(&ch, &DensityMatrix::from_pure(&phi_plus()), 1)?;
    let honest = crate::devices::honest_measurements();
    let z = Povm::from_observable(&pauli_z())?;
    let x = Povm::from_observable(&pauli_x())?;
    let (alice_key, bob) = match kind {
        ChannelKind::Erasure => (
            z.relabel(&[1, 0])?,
            vec![z.extend_dim(1, &[2])?, z.extend_dim(1, &[0])?, x.extend_dim(1, &[0])?],
        ),
        _ => (z.clone(), vec![z.clone(), z, x]),
    };
    let alice = vec![alice_key, honest.alice[1].clone(), honest.alice[2].clone()];
    Ok((rho, MeasurementFamily::new(alice, bob)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub kind: ChannelKind,
    pub p: f64,
    /// Dephasing noise of the simulating device.
    pub q: f64,
    /// Correlation `C = √((ω*/2)² − 1)` carried by the simulating measurements.
    pub c: f64,
    pub target_chsh: f64,
    pub simulated_chsh: f64,
    pub target_qber: f64,
    pub simulated_qber: f64,
    /// Alice's test observables `(σz ± C·σx)/√(1+C²)` as `(z, x)` coefficients.
    pub alice_test_observables: [(f64, f64); 2],
    pub chsh_match: bool,
    pub qber_match: bool,
}

/// Reproduces the target channel device's CHSH value and key error rate with a
/// dephasing channel and adapted measurements.
pub fn dephasing_simulation(kind: ChannelKind, p: f64) -> Result<SimulationReport> {
    if kind == ChannelKind::Dephasing {
        return Err(Error::BadSetting("the dephasing channel simulates itself".into()));
    }
    check_p(p)?;
    let omega_star = honest_omega(p);
    let c = chsh_c(omega_star).ok_or(Error::NoViolation(omega_star))?;
    let q = (1.0 - c) / 2.0;

    let (t_rho, t_fam) = channel_device(kind, p)?;
    let tb = behavior_from(&t_rho, &t_fam)?;
    let target_chsh = chsh_value(&tb, CHSH_ALICE, CHANNEL_CHSH_BOB)?;
    let target_qber = qber(&tb, 0, 0)?;

    let dephasing = QubitChannel::new(ChannelKind::Dephasing, q)?;
    let s_rho = apply_channel(&dephasing, &DensityMatrix::from_pure(&phi_plus()), 1)?;
    let norm = (1.0 + c * c).sqrt();
    let zc = 1.0 / norm;
    let xc = c / norm;
    let a1 = &pauli_z().scale(zc) + &pauli_x().scale(xc);
    let a2 = &pauli_z().scale(zc) - &pauli_x().scale(xc);
    let z = Povm::from_observable(&pauli_z())?;
    let x = Povm::from_observable(&pauli_x())?;
    let alice_key = match kind {
        ChannelKind::Erasure => z.relabel(&[1, 0])?,
        // σz with a random bit substituted at rate 2Q reproduces QBER Q
        _ => {
            let coin = Povm::new(vec![ComplexMatrix::identity(2).scale(0.5); 2])?;
            coin.mix(&z, (2.0 * target_qber).min(1.0))?
        }
    };
    let fam = MeasurementFamily::new(
        vec![alice_key, Povm::from_observable(&a1)?, Povm::from_observable(&a2)?],
        vec![z.clone(), z, x],
    )?;
    let sb = behavior_from(&s_rho, &fam)?;
    let simulated_chsh = chsh_value(&sb, CHSH_ALICE, CHANNEL_CHSH_BOB)?;
    let simulated_qber = qber(&sb, 0, 0)?;
    Ok(SimulationReport {
        kind,
        p,
        q,
        c,
        target_chsh,
        simulated_chsh,
        target_qber,
        simulated_qber,
        alice_test_observables: [(zc, xc), (zc, -xc)],
        chsh_match: (target_chsh - simulated_chsh).abs() <= 1e-9,
        qber_match: (target_qber - simulated_qber).abs() <= 1e-9,
    })
}

// ---------------------------------------------------------------------------
// multi-setting evaluators

/// `max over (x,y)` of the per-setting `I(A:B|E)` with Eve post-processing
/// `eve_maps[x][y]`.
pub fn intrinsic_nonlocality_upper(
    state: &DensityMatrix,
    family: &MeasurementFamily,
    eve_maps: &[Vec<EveMap>],
) -> Result<f64> {
    if eve_maps.len() != family.x_count() || eve_maps.iter().any(|r| r.len() != family.y_count()) {
        return Err(Error::DimensionMismatch("one Eve map per input pair".into()));
    }
    let mut best: f64 = 0.0;
    for (x, ma) in family.alice.iter().enumerate() {
        for (y, mb) in family.bob.iter().enumerate() {
            best = best.max(cmi_ccq(&assemble_ccq(state, (ma, mb), &eve_maps[x][y])?)?);
        }
    }
    Ok(best)
}

/// `Σ p(x,y) · I(A:B|E)_{x,y}` for the given settings and Eve maps.
pub fn cc_sq_multi(
    state: &DensityMatrix,
    family: &MeasurementFamily,
    settings: &[(usize, usize, f64)],
    eve_maps: &[EveMap],
) -> Result<f64> {
    if settings.len() != eve_maps.len() {
        return Err(Error::DimensionMismatch("one Eve map per setting".into()));
    }
    crate::devices::check_input_distribution(settings)?;
    let mut total = 0.0;
    for (&(x, y, w), map) in settings.iter().zip(eve_maps) {
        let ma = family.alice.get(x).ok_or_else(|| Error::BadSetting(format!("no Alice input {x}")))?;
        let mb = family.bob.get(y).ok_or_else(|| Error::BadSetting(format!("no Bob input {y}")))?;
        total += w * cmi_ccq(&assemble_ccq(state, (ma, mb), map)?)?;
    }
    Ok(total)
}

/// `I(A:B|E)` of the setting-flagged ccq state; equals [`cc_sq_multi`].
pub fn cc_sq_broadcast(
    state: &DensityMatrix,
    family: &MeasurementFamily,
    settings: &[(usize, usize, f64)],
    eve_maps: &[EveMap],
) -> Result<f64> {
    cmi_ccq(&broadcast_ccq(state, family, settings, eve_maps)?)
}

// ---------------------------------------------------------------------------
// curves

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Grid of isotropic noise values; on the ω axis the grid is uniform in ω.
pub fn noise_grid(axis: Axis, n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(Error::OutOfRange("grid needs at least two points".into()));
    }
    Ok(match axis {
        Axis::Nu | Axis::P => linspace(0.0, NU_CRITICAL, n).into_iter().map(|nu| (nu, nu)).collect(),
        Axis::Omega => linspace(2.0, OMEGA_MAX, n)
            .into_iter()
            .map(|w| (w, (1.0 - w / OMEGA_MAX).clamp(0.0, 1.0)))
            .collect(),
    })
}

fn curve_from(
    name: &str,
    axis: Axis,
    n: usize,
    f: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<BoundCurve> {
    let grid = noise_grid(axis, n)?;
    let samples = grid
        .par_iter()
        .map(|&(param, nu)| {
            Ok(CurveSample { param, omega: honest_omega(nu), qber: nu / 2.0, value: f(nu)? })
        })
        .collect::<Result<Vec<_>>>()?;
    BoundCurve::new(name, axis, samples)
}

pub fn al_curve(axis: Axis, n: usize) -> Result<BoundCurve> {
    curve_from("al", axis, n, al_bound)
}

pub fn fbjl_curve(axis: Axis, n: usize, cfg: &FbjlConfig) -> Result<BoundCurve> {
    curve_from("fbjl", axis, n, |nu| Ok(fbjl_bound(nu, cfg)?.value))
}

pub fn hull_curve(axis: Axis, n: usize, cfg: &FbjlConfig) -> Result<HullResult> {
    convex_hull_bound(&al_curve(axis, n)?, &fbjl_curve(axis, n, cfg)?)
}

pub fn fractional_curve(axis: Axis, n: usize) -> Result<BoundCurve> {
    curve_from("fractional", axis, n, |nu| fractional_er_bound(honest_omega(nu).max(2.0)))
}

pub fn pironio_curve(axis: Axis, n: usize) -> Result<BoundCurve> {
    curve_from("pironio", axis, n, |nu| pironio_er_bound(honest_omega(nu).max(2.0)))
}

/// Channel bound against `p ∈ [0, p_max]`; ω and QBER come from the channel
/// device with honest test measurements.
pub fn channel_curve(kind: ChannelKind, p_max: f64, n: usize) -> Result<BoundCurve> {
    check_p(p_max)?;
    if n < 2 {
        return Err(Error::OutOfRange("grid needs at least two points".into()));
    }
    if p_max <= 0.0 {
        return Err(Error::OutOfRange("p-max must be positive".into()));
    }
    let samples = linspace(0.0, p_max, n)
        .par_iter()
        .map(|&p| {
            let (rho, fam) = channel_device(kind, p)?;
            let b = behavior_from(&rho, &fam)?;
            Ok(CurveSample {
                param: p,
                omega: chsh_value(&b, CHSH_ALICE, CHANNEL_CHSH_BOB)?,
                qber: qber(&b, 0, 0)?,
                value: channel_di_bound(kind, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BoundCurve::new(format!("channel-{kind}"), Axis::P, samples)
}
