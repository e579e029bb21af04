use super::episode::StepRecord;
use super::{RewardParams, SimError, EPISODE_STEPS};

/// Undiscounted return `sum r_t`.
pub fn ppo_sum(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}

/// Entropy-regularised discounted return `sum gamma^t (r_t + alpha H_t)`,
/// with `t` counted from 0.
pub fn sac_sum(rewards: &[f64], entropies: &[f64], p: &RewardParams) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for (r, h) in rewards.iter().zip(entropies) {
        total += discount * (r + p.alpha * h);
        discount *= p.gamma;
    }
    total
}

/// Goal-distance shaped return `sum r_t + lambda / max(D_t, eps_d)`.
pub fn tdmpc2_sum(rewards: &[f64], distances: &[f64], p: &RewardParams) -> f64 {
    rewards
        .iter()
        .zip(distances)
        .map(|(r, d)| r + p.lambda / d.max(p.eps_d))
        .sum()
}

fn full(trace: &[StepRecord]) -> Result<(), SimError> {
    if trace.len() != EPISODE_STEPS {
        return Err(SimError::IncompleteTrace {
            got: trace.len(),
            expected: EPISODE_STEPS,
        });
    }
    Ok(())
}

fn column(trace: &[StepRecord], f: impl Fn(&StepRecord) -> f64) -> Vec<f64> {
    trace.iter().map(f).collect()
}

pub fn aggregate_ppo(trace: &[StepRecord]) -> Result<f64, SimError> {
    full(trace)?;
    Ok(ppo_sum(&column(trace, |s| s.reward)))
}

pub fn aggregate_sac(trace: &[StepRecord], p: &RewardParams) -> Result<f64, SimError> {
    full(trace)?;
    Ok(sac_sum(&column(trace, |s| s.reward), &column(trace, |s| s.entropy), p))
}

pub fn aggregate_tdmpc2(trace: &[StepRecord], p: &RewardParams) -> Result<f64, SimError> {
    full(trace)?;
    Ok(tdmpc2_sum(&column(trace, |s| s.reward), &column(trace, |s| s.distance), p))
}
