use super::condition::ContextEncoding;
use crate::microworld::Segment;
use crate::numerics::{ensure_finite, gaussian_logpdf_slice, ForwardCache, NetParams, RandomSource};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Denoising steps `K`.
    pub k: usize,
    /// `a` in the noise schedule `eta_t = a * sqrt(t)`.
    pub eta_scale: f64,
    /// Floor on `sigma_t` in the score term.
    pub delta: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { k: 10, eta_scale: 0.3, delta: 1e-3 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("sampler needs at least one step".into()));
        }
        if !(self.eta_scale >= 0.0 && self.eta_scale.is_finite()) {
            return Err(Error::Config(format!("eta_scale {} must be a finite value >= 0", self.eta_scale)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta {} must be positive", self.delta)));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// Time at the start of step `k`: `1 - k/K`.
    pub fn time(&self, k: usize) -> f64 {
        1.0 - k as f64 / self.k as f64
    }

    pub fn eta(&self, t: f64) -> f64 {
        self.eta_scale * t.sqrt()
    }

    /// Transition standard deviation `eta_t * sqrt(dt)`.
    pub fn step_std(&self, t: f64) -> f64 {
        self.eta(t) * self.dt().sqrt()
    }

    /// `d mean / d u` of the reverse-SDE transition at time `t`.
    pub fn mean_jacobian(&self, t: f64) -> f64 {
        let eta = self.eta(t);
        let sigma = t.max(self.delta);
        -self.dt() * (1.0 + 0.5 * eta * eta * (1.0 - t) * t / (sigma * sigma))
    }
}

/// Below this time the network output is no longer rescaled.
pub const TIME_FLOOR: f64 = 0.05;

/// The network predicts `h`, and `u = h / max(t, TIME_FLOOR)`. With the
/// skip gain near 1 the body only has to model `-x_pred`.
pub(crate) fn output_gain(t: f64) -> f64 {
    1.0 / t.max(TIME_FLOOR)
}

/// Network input `[z | t | cond]`.
fn net_input(z: &[f64], t: f64, cond: &ContextEncoding) -> Vec<f64> {
    let mut input = Vec::with_capacity(z.len() + 1 + cond.values.len());
    input.extend_from_slice(z);
    input.push(t);
    input.extend_from_slice(&cond.values);
    input
}

/// Predicted velocity `u_theta(z, t, cond) = net(z, t, cond) / max(t, TIME_FLOOR)`.
pub fn velocity(theta: &NetParams, z: &[f64], t: f64, cond: &ContextEncoding) -> Result<Vec<f64>> {
    Ok(velocity_cached(theta, z, t, cond)?.0)
}

/// Velocity plus the forward cache; gradients with respect to the network
/// output are the velocity gradients times [`output_gain`].
pub(crate) fn velocity_cached(
    theta: &NetParams,
    z: &[f64],
    t: f64,
    cond: &ContextEncoding,
) -> Result<(Vec<f64>, ForwardCache)> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("time {t} outside (0, 1]")));
    }
    if theta.output_width() != z.len() {
        return Err(Error::Shape(format!("state width {} but network output {}", z.len(), theta.output_width())));
    }
    let cache = theta.forward_cached(&net_input(z, t, cond))?;
    let gain = output_gain(t);
    let u = cache.output().iter().map(|h| h * gain).collect();
    Ok((u, cache))
}

/// `-(z - alpha_t x_pred) / sigma_t^2` with `alpha_t = 1 - t` and
/// `sigma_t = max(t, delta)`.
pub fn score_term(z: &[f64], x_pred: &[f64], t: f64, delta: f64) -> Vec<f64> {
    let alpha = 1.0 - t;
    let sigma = t.max(delta);
    let inv = 1.0 / (sigma * sigma);
    z.iter().zip(x_pred).map(|(zi, xi)| -(zi - alpha * xi) * inv).collect()
}

/// Mean of the reverse-SDE transition from `z` at time `t` given `u`.
pub(crate) fn transition_mean(config: &SamplerConfig, z: &[f64], u: &[f64], t: f64) -> Vec<f64> {
    let dt = config.dt();
    let eta = config.eta(t);
    let x_pred: Vec<f64> = z.iter().zip(u).map(|(zi, ui)| zi - t * ui).collect();
    let score = score_term(z, &x_pred, t, config.delta);
    z.iter()
        .zip(u)
        .zip(&score)
        .map(|((zi, ui), si)| zi - (ui - 0.5 * eta * eta * si) * dt)
        .collect()
}

/// One recorded denoising transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: f64,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: f64,
    pub next: Vec<f64>,
    /// Log-density of `next` under `N(mean, std^2 I)`; 0 when `std` is 0.
    pub logp: f64,
}

impl TraceStep {
    /// `x_pred = z - t u`.
    pub fn x_pred(&self) -> Vec<f64> {
        self.z.iter().zip(&self.u).map(|(z, u)| z - self.t * u).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenoiseTrace {
    pub steps: Vec<TraceStep>,
}

impl DenoiseTrace {
    pub fn total_logp(&self) -> f64 {
        self.steps.iter().map(|s| s.logp).sum()
    }

    /// The shared starting noise `z_K`.
    pub fn initial(&self) -> &[f64] {
        &self.steps[0].z
    }
}

fn to_segment(z: Vec<f64>, n_frames: usize) -> Result<Segment> {
    let width = z.len() / n_frames;
    Segment::new(n_frames, width, z)
}

/// Euler integration of `dz = u dt` from `t = 1` to `t = 0`. The result is
/// not clipped; decoding clips.
pub fn sample_ode(
    theta: &NetParams,
    cond: &ContextEncoding,
    z_k: &[f64],
    n_frames: usize,
    config: &SamplerConfig,
) -> Result<Segment> {
    config.validate()?;
    let dt = config.dt();
    let mut z = z_k.to_vec();
    for k in 0..config.k {
        let t = config.time(k);
        let u = velocity(theta, &z, t, cond)?;
        for (zi, ui) in z.iter_mut().zip(&u) {
            *zi -= ui * dt;
        }
        ensure_finite(&z, "ode state").map_err(|e| Error::Divergence(format!("sampler step {k}: {e}")))?;
    }
    to_segment(z, n_frames)
}

/// Euler-Maruyama on the reverse SDE
/// `dz = [u - eta_t^2/2 * score] dt + eta_t dW`, recording every transition.
/// With `eta_scale = 0` every step is the plain Euler step of [`sample_ode`].
pub fn sample_sde(
    theta: &NetParams,
    cond: &ContextEncoding,
    z_k: &[f64],
    n_frames: usize,
    config: &SamplerConfig,
    rng: &mut RandomSource,
) -> Result<(Segment, DenoiseTrace)> {
    config.validate()?;
    let dt = config.dt();
    let mut z = z_k.to_vec();
    let mut trace = DenoiseTrace { steps: Vec::with_capacity(config.k) };
    for k in 0..config.k {
        let t = config.time(k);
        let u = velocity(theta, &z, t, cond)?;
        let (mean, std, next, logp) = if config.eta_scale == 0.0 {
            let next: Vec<f64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui * dt).collect();
            (next.clone(), 0.0, next, 0.0)
        } else {
            let mean = transition_mean(config, &z, &u, t);
            let std = config.step_std(t);
            let next: Vec<f64> = mean.iter().map(|m| m + std * rng.normal()).collect();
            let logp = gaussian_logpdf_slice(&next, &mean, std)?;
            (mean, std, next, logp)
        };
        ensure_finite(&next, "sde state").map_err(|e| Error::Divergence(format!("sampler step {k}: {e}")))?;
        let step = TraceStep { t, z, u, mean, std, next, logp };
        debug_assert!(step.x_pred().iter().zip(&step.z).zip(&step.u).all(|((x, z), u)| *x == z - t * u));
        z = step.next.clone();
        trace.steps.push(step);
    }
    Ok((to_segment(z, n_frames)?, trace))
}

/// Log-density of a recorded transition under `theta`: the mean is
/// recomputed from `theta`, the standard deviation comes from the schedule.
pub fn transition_logprob(
    theta: &NetParams,
    step: &TraceStep,
    cond: &ContextEncoding,
    config: &SamplerConfig,
) -> Result<f64> {
    let std = config.step_std(step.t);
    if !(std > 0.0) {
        return Err(Error::InvalidArgument(
            "transition density needs eta_scale > 0; likelihood ratios require stochastic sampling".into(),
        ));
    }
    let u = velocity(theta, &step.z, step.t, cond)?;
    let mean = transition_mean(config, &step.z, &u, step.t);
    gaussian_logpdf_slice(&step.next, &mean, std)
}

/// Transition log-density and its gradient with respect to `theta`,
/// accumulated into `grads` with weight `scale`.
pub fn transition_logprob_grad(
    theta: &NetParams,
    step: &TraceStep,
    cond: &ContextEncoding,
    config: &SamplerConfig,
    scale: f64,
    grads: &mut [f64],
) -> Result<f64> {
    let std = config.step_std(step.t);
    if !(std > 0.0) {
        return Err(Error::InvalidArgument("transition density needs eta_scale > 0".into()));
    }
    let (u, cache) = velocity_cached(theta, &step.z, step.t, cond)?;
    let mean = transition_mean(config, &step.z, &u, step.t);
    let logp = gaussian_logpdf_slice(&step.next, &mean, std)?;
    if scale != 0.0 {
        let jac = config.mean_jacobian(step.t) * output_gain(step.t);
        let var = std * std;
        let out_grad: Vec<f64> = step.next.iter().zip(&mean).map(|(x, m)| (x - m) / var * jac).collect();
        theta.backward_into(&cache, &out_grad, scale, grads)?;
    }
    Ok(logp)
}

/// Transition mean under `theta` with its forward cache and
/// `d mean / d net output`.
pub(crate) fn mean_cached(
    theta: &NetParams,
    step: &TraceStep,
    cond: &ContextEncoding,
    config: &SamplerConfig,
) -> Result<(Vec<f64>, ForwardCache, f64)> {
    let (u, cache) = velocity_cached(theta, &step.z, step.t, cond)?;
    let mean = transition_mean(config, &step.z, &u, step.t);
    Ok((mean, cache, config.mean_jacobian(step.t) * output_gain(step.t)))
}
