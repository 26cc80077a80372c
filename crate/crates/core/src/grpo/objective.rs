use super::config::GrpoConfig;
use super::rollout::RolloutGroup;
use crate::numerics::{gaussian_logpdf_slice, l2_norm, opt_step, NetParams, OptState};
use crate::worldmodel::{mean_cached, transition_logprob, ContextEncoding, DenoiseTrace, PolicyBundle, SamplerConfig};
use crate::{Error, Result};

/// Value and gradient of the clipped surrogate minus the KL penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub surrogate: f64,
    pub kl: f64,
    /// Share of (member, step) terms whose ratio was clipped.
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` over kept terms.
    pub max_ratio_deviation: f64,
    /// Members dropped for non-finite ratios.
    pub dropped: usize,
    /// Gradient of `value` with respect to `theta`.
    pub grads: Vec<f64>,
}

/// Mean over the trace of `|mu_theta - mu_ref|^2 / (2 std^2)`, the closed
/// form KL between equal-variance Gaussian transitions.
pub fn kl_term(
    theta: &NetParams,
    reference: &NetParams,
    trace: &DenoiseTrace,
    cond: &ContextEncoding,
    sampler: &SamplerConfig,
) -> Result<f64> {
    if trace.steps.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for step in &trace.steps {
        let std = sampler.step_std(step.t);
        if !(std > 0.0) {
            return Err(Error::InvalidArgument("KL needs a positive transition std".into()));
        }
        let a = mean_cached(theta, step, cond, sampler)?.0;
        let b = mean_cached(reference, step, cond, sampler)?.0;
        total += a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / (2.0 * std * std);
    }
    Ok(total / trace.steps.len() as f64)
}

/// `min(rho A, clip(rho, 1-eps, 1+eps) A)` and whether the clipped branch
/// is the active one (its gradient is zero).
pub fn surrogate_term(rho: f64, a: f64, eps: f64) -> (f64, bool) {
    let clipped = (a > 0.0 && rho > 1.0 + eps) || (a < 0.0 && rho < 1.0 - eps);
    (if clipped { rho.clamp(1.0 - eps, 1.0 + eps) * a } else { rho * a }, clipped)
}

/// The GRPO objective on one group, averaged over members and denoising
/// steps, with per-step ratios against `theta_old`:
/// `mean min(rho A, clip(rho, 1-eps, 1+eps) A) - beta * mean KL`.
pub fn grpo_objective(
    theta: &NetParams,
    theta_old: &NetParams,
    reference: &NetParams,
    group: &RolloutGroup,
    sampler: &SamplerConfig,
    config: &GrpoConfig,
) -> Result<Objective> {
    let cond = &group.cond;
    let eps = config.epsilon;
    let mut grads = vec![0.0; theta.len()];

    struct Term {
        member: usize,
        step: usize,
        ratio: f64,
    }
    let mut terms = Vec::new();
    let mut dropped = 0;
    for (i, m) in group.members.iter().enumerate() {
        let mut member_terms = Vec::with_capacity(m.trace.steps.len());
        let mut finite = true;
        for (k, step) in m.trace.steps.iter().enumerate() {
            let std = sampler.step_std(step.t);
            let mean = mean_cached(theta, step, cond, sampler)?.0;
            let logp = gaussian_logpdf_slice(&step.next, &mean, std)?;
            let logp_old = transition_logprob(theta_old, step, cond, sampler)?;
            let ratio = (logp - logp_old).exp();
            if !ratio.is_finite() {
                finite = false;
                break;
            }
            member_terms.push(Term { member: i, step: k, ratio });
        }
        if finite {
            terms.extend(member_terms);
        } else {
            log::warn!("dropping group member {i}: non-finite importance ratio");
            dropped += 1;
        }
    }
    if terms.is_empty() {
        return Ok(Objective {
            value: 0.0,
            surrogate: 0.0,
            kl: 0.0,
            clip_fraction: 0.0,
            max_ratio_deviation: 0.0,
            dropped,
            grads,
        });
    }
    let n = terms.len() as f64;
    let (mut surrogate, mut kl, mut clipped, mut max_dev) = (0.0, 0.0, 0usize, 0.0f64);
    for term in &terms {
        let a = group.advantages[term.member];
        let step = &group.members[term.member].trace.steps[term.step];
        let std = sampler.step_std(step.t);
        let var = std * std;
        let (mean, cache, jac) = mean_cached(theta, step, cond, sampler)?;
        let mean_ref = mean_cached(reference, step, cond, sampler)?.0;
        let rho = term.ratio;
        max_dev = max_dev.max((rho - 1.0).abs());
        let (value, is_clipped) = surrogate_term(rho, a, eps);
        surrogate += value;
        clipped += usize::from(is_clipped);
        let step_kl = mean.iter().zip(&mean_ref).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / (2.0 * var);
        kl += step_kl;
        // d/d mean of rho A / n is rho A (next - mean) / var / n; of -beta KL / n is -beta (mean - ref) / var / n
        let w_surr = if is_clipped { 0.0 } else { rho * a };
        let out_grad: Vec<f64> = step
            .next
            .iter()
            .zip(&mean)
            .zip(&mean_ref)
            .map(|((x, m), r)| (w_surr * (x - m) - config.beta * (m - r)) / var * jac)
            .collect();
        if out_grad.iter().any(|g| *g != 0.0) {
            theta.backward_into(&cache, &out_grad, 1.0 / n, &mut grads)?;
        }
    }
    surrogate /= n;
    kl /= n;
    Ok(Objective {
        value: surrogate - config.beta * kl,
        surrogate,
        kl,
        clip_fraction: clipped as f64 / n,
        max_ratio_deviation: max_dev,
        dropped,
        grads,
    })
}

/// One Adam ascent step on [`grpo_objective`]. Returns the objective at the
/// pre-update parameters and the L2 norm of the parameter change; a group
/// whose members were all dropped leaves `theta` untouched.
pub fn grpo_update(
    bundle: &mut PolicyBundle,
    group: &RolloutGroup,
    sampler: &SamplerConfig,
    config: &GrpoConfig,
    opt: &mut OptState,
) -> Result<(Objective, f64)> {
    let obj = grpo_objective(&bundle.theta, &bundle.theta_old, &bundle.reference, group, sampler, config)?;
    if obj.dropped == group.members.len() {
        log::warn!("all group members dropped; update skipped");
        return Ok((obj, 0.0));
    }
    let before = bundle.theta.values().to_vec();
    let ascent: Vec<f64> = obj.grads.iter().map(|g| -g).collect();
    opt_step(bundle.theta.values_mut(), &ascent, opt, config.lr)?;
    let delta: Vec<f64> = bundle.theta.values().iter().zip(&before).map(|(a, b)| a - b).collect();
    Ok((obj, l2_norm(&delta)))
}
