//! Small unconstrained minimisers: Nelder-Mead and L-BFGS.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub initial_step: f64,
    /// Stop when the simplex diameter falls below this.
    pub diameter_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { initial_step: 0.5, diameter_tol: 1e-9, max_evals: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction ½, shrink ½).
/// Returns the best point ever evaluated.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i].abs() > 1e-8 { cfg.initial_step * p[i].abs().max(0.1) } else { cfg.initial_step };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut best = Minimum { x: x0.to_vec(), value: f64::INFINITY, evals: 0 };

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if vals[0] < best.value {
            best.value = vals[0];
            best.x = pts[0].clone();
        }
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < cfg.diameter_tol || evals.get() >= cfg.max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[i] = eval(&shrunk);
            pts[i] = shrunk;
        }
    }
    best.evals = evals.get();
    best
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Stop once an iteration improves the value by less than this.
    pub value_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 10, max_iters: 2000, grad_tol: 1e-10, value_tol: 1e-15 }
    }
}

/// L-BFGS with Armijo backtracking. `fg` returns the value and gradient.
/// Returns the best point visited.
pub fn lbfgs(fg: impl Fn(&[f64]) -> (f64, Vec<f64>), x0: &[f64], cfg: &LbfgsConfig) -> Minimum {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = fg(&x);
    let mut evals = 1;
    let mut best = Minimum { x: x.clone(), value: fx, evals };
    if !fx.is_finite() {
        return best;
    }
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut stalls = 0;

    for _ in 0..cfg.max_iters {
        if dot(&g, &g).sqrt() < cfg.grad_tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if hist.is_empty() { 1.0 / dot(&g, &g).sqrt().max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (fnew, gnew) = fg(&xn);
            evals += 1;
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > cfg.memory {
                hist.pop_front();
            }
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gnew;
        if fx < best.value {
            best.value = fx;
            best.x = x.clone();
        }
        if improvement < cfg.value_tol {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    best.evals = evals;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadConfig::default());
        assert!(m.value < 1e-12, "{}", m.value);
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_quadratic_bowl() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 0.3).powi(2)).sum();
        let m = nelder_mead(f, &[0.0; 5], &NelderMeadConfig::default());
        assert!(m.value < 1e-12);
    }

    #[test]
    fn lbfgs_rosenbrock() {
        let fg = |x: &[f64]| {
            let f = rosenbrock(x);
            let g = vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ];
            (f, g)
        };
        let m = lbfgs(fg, &[-1.2, 1.0], &LbfgsConfig::default());
        assert!(m.value < 1e-14, "{}", m.value);
    }

    #[test]
    fn lbfgs_high_dimensional_quadratic() {
        let n = 50;
        let fg = |x: &[f64]| {
            let f = x.iter().enumerate().map(|(i, v)| (1.0 + i as f64) * v * v).sum();
            let g = x.iter().enumerate().map(|(i, v)| 2.0 * (1.0 + i as f64) * v).collect();
            (f, g)
        };
        let m = lbfgs(fg, &vec![1.0; n], &LbfgsConfig::default());
        assert!(m.value < 1e-14, "{}", m.value);
    }
}
