//! Deterministic vertices of the local polytope and local/nonlocal
//! decompositions of behaviors.

use crate::devices::{Behavior, BEHAVIOR_TOL};
use crate::error::{Error, Result};
use crate::simplex::{simplex_solve, LinearProgram};

/// Largest number of deterministic vertices `enumerate_vertices` will build.
pub const VERTEX_CAP: u128 = 1_000_000;

/// A local deterministic strategy: Alice outputs `a[x]`, Bob outputs `b[y]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicVertex {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl DeterministicVertex {
    /// The vertex as a behavior table with the given outcome counts.
    pub fn behavior(&self, a_count: usize, b_count: usize) -> Result<Behavior> {
        if self.a.iter().any(|&v| v >= a_count) || self.b.iter().any(|&v| v >= b_count) {
            return Err(Error::OutOfRange("vertex output exceeds outcome count".into()));
        }
        let (xc, yc) = (self.a.len(), self.b.len());
        let mut p = vec![0.0; xc * yc * a_count * b_count];
        for x in 0..xc {
            for y in 0..yc {
                p[((x * yc + y) * a_count + self.a[x]) * b_count + self.b[y]] = 1.0;
            }
        }
        Behavior::new(xc, yc, a_count, b_count, p)
    }

    /// `D(a,b|x,y)` without building the table.
    pub fn prob(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        if self.a[x] == a && self.b[y] == b {
            1.0
        } else {
            0.0
        }
    }
}

/// All deterministic vertices, lexicographic in `(a(0), …, a(X−1), b(0), …, b(Y−1))`.
pub fn enumerate_vertices(
    x_count: usize,
    y_count: usize,
    a_count: usize,
    b_count: usize,
) -> Result<Vec<DeterministicVertex>> {
    if x_count == 0 || y_count == 0 || a_count == 0 || b_count == 0 {
        return Err(Error::OutOfRange("cardinalities must be positive".into()));
    }
    let count = (a_count as u128)
        .checked_pow(x_count as u32)
        .and_then(|n| n.checked_mul((b_count as u128).checked_pow(y_count as u32)?))
        .unwrap_or(u128::MAX);
    if count > VERTEX_CAP {
        return Err(Error::Overflow(count));
    }
    let radices: Vec<usize> =
        std::iter::repeat_n(a_count, x_count).chain(std::iter::repeat_n(b_count, y_count)).collect();
    let mut digits = vec![0usize; radices.len()];
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        out.push(DeterministicVertex { a: digits[..x_count].to_vec(), b: digits[x_count..].to_vec() });
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < radices[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    Ok(out)
}

/// `behavior = Σᵢ wᵢ Dᵢ + (1 − q_L)·residual` with `q_L = Σᵢ wᵢ`.
#[derive(Debug, Clone)]
pub struct LocalDecomposition {
    pub local_weight: f64,
    /// `(vertex, weight)` pairs with positive weight.
    pub vertices: Vec<(DeterministicVertex, f64)>,
    /// Nonlocal part, normalised. Uniform and unused when `local_weight` is 1.
    pub residual: Behavior,
    pub residual_used: bool,
}

impl LocalDecomposition {
    /// Validates and normalises a user-supplied decomposition of `target`.
    pub fn custom(
        target: &Behavior,
        vertices: Vec<(DeterministicVertex, f64)>,
        residual: Behavior,
    ) -> Result<Self> {
        if !residual.same_shape(target) {
            return Err(Error::DimensionMismatch("residual shape differs from target".into()));
        }
        if vertices.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::OutOfRange("negative vertex weight".into()));
        }
        let local_weight: f64 = vertices.iter().map(|(_, w)| w).sum();
        if local_weight > 1.0 + BEHAVIOR_TOL {
            return Err(Error::OutOfRange(format!("local weight {local_weight} exceeds 1")));
        }
        let d = Self {
            local_weight: local_weight.min(1.0),
            vertices,
            residual,
            residual_used: local_weight < 1.0 - BEHAVIOR_TOL,
        };
        let err = d.reconstruction_error(target);
        if err > 1e-8 {
            return Err(Error::InvalidBehavior(format!("decomposition misses target by {err:.3e}")));
        }
        Ok(d)
    }

    /// Largest entrywise deviation between the recombined and the target behavior.
    pub fn reconstruction_error(&self, target: &Behavior) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..target.x_count() {
            for y in 0..target.y_count() {
                for a in 0..target.a_count() {
                    for b in 0..target.b_count() {
                        let local: f64 =
                            self.vertices.iter().map(|(v, w)| w * v.prob(x, y, a, b)).sum();
                        let nonlocal = if self.residual_used {
                            (1.0 - self.local_weight) * self.residual.get(x, y, a, b)
                        } else {
                            0.0
                        };
                        worst = worst.max((local + nonlocal - target.get(x, y, a, b)).abs());
                    }
                }
            }
        }
        worst
    }
}

fn vertex_column(v: &DeterministicVertex, b: &Behavior) -> Vec<f64> {
    let mut col = vec![0.0; b.raw().len()];
    for x in 0..b.x_count() {
        for y in 0..b.y_count() {
            col[b.index(x, y, v.a[x], v.b[y])] = 1.0;
        }
    }
    col
}

/// Maximal local weight: `max Σᵢ pᵢ` subject to `Σᵢ pᵢ Dᵢ ≤ p` entrywise.
///
/// The residual `p − Σᵢ pᵢ Dᵢ` is a difference of no-signaling tables and so
/// is itself no-signaling.
pub fn max_local_weight(b: &Behavior) -> Result<LocalDecomposition> {
    let verts = enumerate_vertices(b.x_count(), b.y_count(), b.a_count(), b.b_count())?;
    let cols: Vec<Vec<f64>> = verts.iter().map(|v| vertex_column(v, b)).collect();
    let mut lp = LinearProgram::maximize(vec![1.0; verts.len()]);
    for (e, &target) in b.raw().iter().enumerate() {
        lp = lp.less_eq(cols.iter().map(|c| c[e]).collect(), target.max(0.0));
    }
    let sol = match simplex_solve(&lp) {
        Ok(s) => s,
        Err(Error::Infeasible) | Err(Error::Unbounded) => {
            return Err(Error::NumericalFailure("local-weight LP lost feasibility".into()))
        }
        Err(e) => return Err(e),
    };
    let q_l = sol.objective.clamp(0.0, 1.0);
    let vertices: Vec<(DeterministicVertex, f64)> = verts
        .into_iter()
        .zip(sol.x)
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let (residual, used) = if q_l < 1.0 - BEHAVIOR_TOL {
        let mut r = b.raw().iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
        for (v, w) in &vertices {
            for (e, c) in vertex_column(v, b).into_iter().enumerate() {
                r[e] -= w * c;
            }
        }
        let scale = 1.0 - q_l;
        let r = r.into_iter().map(|v| (v / scale).max(0.0)).collect();
        (
            renormalised(b.x_count(), b.y_count(), b.a_count(), b.b_count(), r)?,
            true,
        )
    } else {
        (Behavior::uniform(b.x_count(), b.y_count(), b.a_count(), b.b_count()), false)
    };
    Ok(LocalDecomposition { local_weight: q_l, vertices, residual, residual_used: used })
}

/// Maximal local weight when the nonlocal part must be a mixture of the given
/// candidate behaviors: `max Σᵢ pᵢ` subject to `Σᵢ pᵢ Dᵢ + Σₖ wₖ Rₖ = p`,
/// `pᵢ, wₖ ≥ 0`. The returned residual is the normalised candidate mixture.
pub fn max_local_weight_with_nonlocal(
    b: &Behavior,
    candidates: &[Behavior],
) -> Result<LocalDecomposition> {
    if candidates.iter().any(|c| !c.same_shape(b)) {
        return Err(Error::DimensionMismatch("candidate shape differs from target".into()));
    }
    let verts = enumerate_vertices(b.x_count(), b.y_count(), b.a_count(), b.b_count())?;
    let nv = verts.len();
    let cols: Vec<Vec<f64>> = verts
        .iter()
        .map(|v| vertex_column(v, b))
        .chain(candidates.iter().map(|c| c.raw().iter().map(|v| v.max(0.0)).collect()))
        .collect();
    let mut objective = vec![1.0; nv];
    objective.resize(cols.len(), 0.0);
    let mut lp = LinearProgram::maximize(objective);
    for (e, &target) in b.raw().iter().enumerate() {
        lp = lp.equal(cols.iter().map(|c| c[e]).collect(), target.max(0.0));
    }
    let sol = simplex_solve(&lp)?;
    let q_l = sol.objective.clamp(0.0, 1.0);
    let (local_x, cand_x) = sol.x.split_at(nv);
    let vertices: Vec<(DeterministicVertex, f64)> =
        verts.into_iter().zip(local_x.iter().copied()).filter(|(_, w)| *w > 0.0).collect();
    let cand_total: f64 = cand_x.iter().sum();
    let (residual, used) = if q_l < 1.0 - BEHAVIOR_TOL && cand_total > 0.0 {
        let mut r = vec![0.0; b.raw().len()];
        for (c, w) in candidates.iter().zip(cand_x) {
            for (e, v) in c.raw().iter().enumerate() {
                r[e] += w * v.max(0.0) / cand_total;
            }
        }
        (renormalised(b.x_count(), b.y_count(), b.a_count(), b.b_count(), r)?, true)
    } else {
        (Behavior::uniform(b.x_count(), b.y_count(), b.a_count(), b.b_count()), false)
    };
    Ok(LocalDecomposition { local_weight: q_l, vertices, residual, residual_used: used })
}

/// Rescales each `(x,y)` slice to sum to one, absorbing round-off.
fn renormalised(xc: usize, yc: usize, ac: usize, bc: usize, mut p: Vec<f64>) -> Result<Behavior> {
    let n = ac * bc;
    for slice in p.chunks_mut(n) {
        let s: f64 = slice.iter().sum();
        if s <= 0.0 {
            return Err(Error::NumericalFailure("empty residual slice".into()));
        }
        slice.iter_mut().for_each(|v| *v /= s);
    }
    let out = Behavior::new_unchecked_ns(xc, yc, ac, bc, p)?;
    out.check_no_signaling(1e-7)?;
    Ok(out)
}
