use super::linalg::DenseVector;

/// Central-difference gradient `(f(x+εeᵢ) − f(x−εeᵢ)) / 2ε` for every coordinate.
pub fn finite_difference_grad<F>(mut f: F, point: &[f64], epsilon: f64) -> DenseVector
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + epsilon;
        let plus = f(&x);
        x[i] = orig - epsilon;
        let minus = f(&x);
        x[i] = orig;
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    DenseVector(grad)
}

/// Largest elementwise relative error `|a−b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let g = finite_difference_grad(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn sum_gives_ones() {
        let g = finite_difference_grad(|x| x.iter().sum(), &[0.3, -7.0, 12.5, 1e3], 1e-5);
        for v in g.iter() {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }
}
