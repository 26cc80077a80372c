use crate::{Error, Result};

/// `ln(2 pi)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-density of an isotropic Gaussian `N(mean, std^2 I)` at `x`.
pub fn gaussian_logpdf(x: &super::Tensor, mean: &super::Tensor, std: f64) -> Result<f64> {
    if x.shape() != mean.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", x.shape(), mean.shape())));
    }
    gaussian_logpdf_slice(x.data(), mean.data(), std)
}

pub fn gaussian_logpdf_slice(x: &[f64], mean: &[f64], std: f64) -> Result<f64> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::InvalidArgument(format!("standard deviation must be positive, got {std}")));
    }
    if x.len() != mean.len() {
        return Err(Error::Shape(format!("{} vs {}", x.len(), mean.len())));
    }
    let norm = -0.5 * LN_2PI - std.ln();
    let inv = 1.0 / std;
    Ok(x.iter()
        .zip(mean)
        .map(|(xi, mi)| {
            let r = (xi - mi) * inv;
            norm - 0.5 * r * r
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{RandomSource, Tensor};

    #[test]
    fn standard_normal_at_mean() {
        let v = gaussian_logpdf_slice(&[0.3], &[0.3], 1.0).unwrap();
        assert!((v - (-0.918_938_533_204_672_7)).abs() < 1e-15);
        assert!((LN_2PI - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn one_std_away() {
        let s = 0.4;
        let v = gaussian_logpdf_slice(&[1.0 + s], &[1.0], s).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() - s.ln() - 0.5;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn additive_over_dimensions() {
        let x = Tensor::from_vec(vec![0.2, -1.0]);
        let m = Tensor::from_vec(vec![0.0, 0.5]);
        let joint = gaussian_logpdf(&x, &m, 0.7).unwrap();
        let a = gaussian_logpdf_slice(&[0.2], &[0.0], 0.7).unwrap();
        let b = gaussian_logpdf_slice(&[-1.0], &[0.5], 0.7).unwrap();
        assert!((joint - (a + b)).abs() < 1e-14);
    }

    #[test]
    fn maximized_at_mean() {
        let mut rng = RandomSource::new(11, 0);
        let mean = [0.1, -0.2, 0.3];
        let top = gaussian_logpdf_slice(&mean, &mean, 0.5).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = mean.iter().map(|m| m + 0.3 * rng.normal()).collect();
            assert!(gaussian_logpdf_slice(&x, &mean, 0.5).unwrap() <= top);
        }
    }

    #[test]
    fn rejects_bad_std() {
        assert!(gaussian_logpdf_slice(&[0.0], &[0.0], 0.0).is_err());
        assert!(gaussian_logpdf_slice(&[0.0], &[0.0], -1.0).is_err());
        let x = Tensor::from_vec(vec![0.0]);
        let m = Tensor::from_vec(vec![0.0, 1.0]);
        assert!(gaussian_logpdf(&x, &m, 1.0).is_err());
    }
}
