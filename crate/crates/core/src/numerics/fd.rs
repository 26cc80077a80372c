use crate::{Error, Result};

/// Central-difference gradient of `objective` at `params`.
pub fn finite_diff_grad<F>(objective: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = objective(&p);
        p[i] = orig - h;
        let down = objective(&p);
        p[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("objective at coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_is_zero() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, 2.0, 3.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn sine_at_origin() {
        let g = finite_diff_grad(|p| p[0].sin(), &[0.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn errors() {
        assert!(finite_diff_grad(|p| p[0], &[0.0], 0.0).is_err());
        assert!(finite_diff_grad(|p| 1.0 / p[0], &[1e-5], 1e-5).is_err());
    }
}
