//! Adaptive Gauss-Legendre quadrature in one dimension and over boxes.

use std::sync::OnceLock;

const ORDER: usize = 10;
const MAX_DEPTH: u32 = 48;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn gl_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive integral of `f` over `[a, b]` to relative tolerance `rel_tol`
/// (with an absolute floor of `abs_tol`).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let whole = gl_1d(&f, a, b);
    adapt_1d(&f, a, b, whole, rel_tol, abs_tol, 0)
}

fn adapt_1d<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    abs_tol: f64,
    depth: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let left = gl_1d(f, a, m);
    let right = gl_1d(f, m, b);
    let refined = left + right;
    if (refined - whole).abs() <= (rel_tol * refined.abs()).max(abs_tol) || depth >= MAX_DEPTH {
        return refined;
    }
    adapt_1d(f, a, m, left, rel_tol, abs_tol / 2.0, depth + 1)
        + adapt_1d(f, m, b, right, rel_tol, abs_tol / 2.0, depth + 1)
}

fn gl_box<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], x: &mut Vec<f64>) -> f64 {
    let (nodes, weights) = rule();
    let d = lo.len();
    let n = nodes.len();
    let mut idx = vec![0usize; d];
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a) / 2.0).product();
    let mut total = 0.0;
    loop {
        x.clear();
        let mut w = 1.0;
        for k in 0..d {
            let (mid, half) = ((lo[k] + hi[k]) / 2.0, (hi[k] - lo[k]) / 2.0);
            x.push(mid + half * nodes[idx[k]]);
            w *= weights[idx[k]];
        }
        total += w * f(x);
        let mut k = 0;
        loop {
            if k == d {
                return total * vol;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Adaptive tensor-product integral of `f` over the box `[lo, hi]`,
/// refining by bisecting the widest axis.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
        return 0.0;
    }
    let mut x = Vec::with_capacity(lo.len());
    let whole = gl_box(&f, lo, hi, &mut x);
    adapt_box(&f, lo.to_vec(), hi.to_vec(), whole, rel_tol, abs_tol, 0, &mut x)
}

#[allow(clippy::too_many_arguments)]
fn adapt_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: Vec<f64>,
    hi: Vec<f64>,
    whole: f64,
    rel_tol: f64,
    abs_tol: f64,
    depth: u32,
    x: &mut Vec<f64>,
) -> f64 {
    let axis = (0..lo.len())
        .max_by(|&i, &j| (hi[i] - lo[i]).total_cmp(&(hi[j] - lo[j])))
        .unwrap_or(0);
    let m = (lo[axis] + hi[axis]) / 2.0;
    let mut hi_left = hi.clone();
    hi_left[axis] = m;
    let mut lo_right = lo.clone();
    lo_right[axis] = m;
    let left = gl_box(f, &lo, &hi_left, x);
    let right = gl_box(f, &lo_right, &hi, x);
    let refined = left + right;
    if (refined - whole).abs() <= (rel_tol * refined.abs()).max(abs_tol) || depth >= MAX_DEPTH {
        return refined;
    }
    adapt_box(f, lo, hi_left, left, rel_tol, abs_tol / 2.0, depth + 1, x)
        + adapt_box(f, lo_right, hi, right, rel_tol, abs_tol / 2.0, depth + 1, x)
}
