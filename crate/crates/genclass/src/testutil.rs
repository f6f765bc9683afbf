//! Shared helpers for module unit tests.

use rand::distributions::Distribution;

use crate::matrix::Matrix;

pub fn randn(rng: &mut impl rand::Rng, rows: usize, cols: usize) -> Matrix {
    let dist = rand::distributions::Uniform::new(-1.0, 1.0);
    Matrix::new(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect())
}

/// Central finite differences of a scalar function of flat parameters.
pub fn finite_diff(
    f: impl Fn(&[Matrix]) -> f64,
    params: &[Matrix],
    step: f64,
) -> Vec<Matrix> {
    params
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let mut grad = Matrix::zeros(p.rows(), p.cols());
            for k in 0..p.len() {
                let mut plus = params.to_vec();
                plus[pi].data_mut()[k] += step;
                let mut minus = params.to_vec();
                minus[pi].data_mut()[k] -= step;
                grad.data_mut()[k] = (f(&plus) - f(&minus)) / (2.0 * step);
            }
            grad
        })
        .collect()
}

pub fn max_rel_err(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(1e-8);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
