use crate::numerics::{dot, span_basis, Cholesky, Mat};
use crate::scalar::Real;

pub const DEFAULT_DESIGN_TOL: f64 = 0.01;
const MAX_FW_ITER: usize = 100_000;
const SPAN_TOL: f64 = 1e-9;

/// An approximate G-optimal design over a set of arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub weights: Vec<T>,
    /// `max_a ‖x_a‖²_{V(π)⁺}` at the returned weights.
    pub max_leverage: T,
    /// Dimension of the span of the arms.
    pub span_dim: usize,
    pub iterations: usize,
}

fn leverages<T: Real>(coords: &[Vec<T>], weights: &[T]) -> Vec<T> {
    let r = coords[0].len();
    let mut v = Mat::zeros(r, r);
    for (c, &w) in coords.iter().zip(weights) {
        if w > T::zero() {
            v.add_outer_scaled(w, c);
        }
    }
    let chol = Cholesky::new(&v).expect("design matrix is SPD on the span");
    coords
        .iter()
        .map(|c| {
            let n = chol.inv_quad_norm(c);
            n * n
        })
        .collect()
}

/// Frank–Wolfe (Fedorov–Wynn) ascent on `log det V(π)` restricted to the
/// span of `arms`, stopped once the largest leverage is within `(1 + tol)`
/// of the span dimension.
pub fn g_optimal_design<T: Real>(arms: &[Vec<T>], tol: T) -> Design<T> {
    let k = arms.len();
    assert!(k > 0, "design needs at least one arm");
    let uniform = T::one() / T::count(k);
    let basis = span_basis(arms, T::tol(SPAN_TOL));
    let r = basis.len();
    if r == 0 {
        return Design {
            weights: vec![uniform; k],
            max_leverage: T::zero(),
            span_dim: 0,
            iterations: 0,
        };
    }
    let coords: Vec<Vec<T>> = arms
        .iter()
        .map(|x| basis.iter().map(|q| dot(q, x)).collect())
        .collect();
    let rf = T::count(r);
    let target = (T::one() + tol) * rf;
    let mut weights = vec![uniform; k];
    let mut iterations = 0;
    loop {
        let lev = leverages(&coords, &weights);
        let (best, g) = lev
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bg), (i, &g)| if g > bg { (i, g) } else { (bi, bg) });
        if g <= target || iterations >= MAX_FW_ITER {
            return Design {
                weights,
                max_leverage: g,
                span_dim: r,
                iterations,
            };
        }
        let step = (g / rf - T::one()) / (g - T::one());
        for (i, w) in weights.iter_mut().enumerate() {
            *w = (T::one() - step) * *w + if i == best { step } else { T::zero() };
        }
        iterations += 1;
    }
}

/// Integer allocation of `total` pulls proportional to `weights` that sums
/// to `total` exactly: floors first, then the leftover pulls go to the
/// largest fractional remainders (lowest index on ties).
pub fn largest_remainder<T: Real>(weights: &[T], total: usize) -> Vec<usize> {
    let sum: T = weights.iter().copied().sum();
    let mut counts = Vec::with_capacity(weights.len());
    let mut rema = Vec::with_capacity(weights.len());
    for &w in weights {
        let exact = (w / sum * T::count(total)).as_f64();
        let floor = exact.floor();
        counts.push(floor as usize);
        rema.push(exact - floor);
    }
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| rema[j].total_cmp(&rema[i]).then(i.cmp(&j)));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}
