use super::ensure_finite;
use crate::{Error, Result};

/// Moment decay rates and the denominator floor of the adaptive-moment rule.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl OptState {
    pub fn new(n_params: usize) -> Self {
        Self::with_config(n_params, AdamConfig::default())
    }

    pub fn with_config(n_params: usize, config: AdamConfig) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0, config }
    }
}

/// One bias-corrected Adam descent step on `params` (in place).
pub fn opt_step(params: &mut [f64], grads: &[f64], state: &mut OptState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "optimizer: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate {lr}")));
    }
    ensure_finite(grads, "gradient")?;
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_everything_at_rest() {
        let mut p = vec![1.0, -2.0];
        let mut st = OptState::new(2);
        opt_step(&mut p, &[0.0, 0.0], &mut st, 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.m, vec![0.0, 0.0]);
        assert_eq!(st.v, vec![0.0, 0.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = vec![0.0];
        let mut st = OptState::new(1);
        opt_step(&mut p, &[1.0], &mut st, 0.1).unwrap();
        let expected = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_lr_zero_is_identity() {
        let g = [0.3, -0.7, 1.1];
        let mut a = vec![0.5, 0.5, 0.5];
        let mut b = a.clone();
        let mut sa = OptState::new(3);
        let mut sb = OptState::new(3);
        opt_step(&mut a, &g, &mut sa, 0.01).unwrap();
        opt_step(&mut b, &g, &mut sb, 0.01).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let mut c = vec![0.5, 0.5, 0.5];
        opt_step(&mut c, &g, &mut OptState::new(3), 0.0).unwrap();
        assert_eq!(c, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = vec![0.0];
        let mut st = OptState::new(1);
        let err = opt_step(&mut p, &[f64::NAN], &mut st, 0.1).unwrap_err();
        assert!(err.to_string().contains("gradient[0]"));
        assert_eq!(st.step, 0);
    }
}
