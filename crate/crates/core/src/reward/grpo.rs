use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RewardReport;
use crate::ssu::TokenStream;

/// Floor on the group standard deviation used as the divisor.
pub const ADVANTAGE_EPSILON: f64 = 1e-8;
pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;
pub const DEFAULT_BETA_KL: f64 = 0.01;
pub const DEFAULT_GROUP_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("group has {0} candidates, need at least 2")]
    GroupTooSmall(usize),
    #[error("candidate {index}: {new} new vs {old} old log-probabilities")]
    LengthMismatch { index: usize, new: usize, old: usize },
    #[error("candidate {index}: non-finite log-probability")]
    NonFiniteLogprob { index: usize },
    #[error("non-finite reward for candidate {index}")]
    NonFiniteReward { index: usize },
    #[error("clip epsilon must be positive and finite, got {0}")]
    InvalidClipEpsilon(f64),
    #[error("KL coefficient must be non-negative and finite, got {0}")]
    InvalidBeta(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub clip_epsilon: f64,
    pub beta_kl: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: DEFAULT_CLIP_EPSILON,
            beta_kl: DEFAULT_BETA_KL,
        }
    }
}

/// One sampled output with the per-token log-probabilities under the
/// current and the sampling policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub stream: TokenStream,
    pub logprob_new: Vec<f64>,
    pub logprob_old: Vec<f64>,
    pub reward: RewardReport,
}

impl Candidate {
    /// Sequence-level importance ratio `exp(Σ new − Σ old)`.
    pub fn ratio(&self) -> f64 {
        let new: f64 = self.logprob_new.iter().sum();
        let old: f64 = self.logprob_old.iter().sum();
        (new - old).exp()
    }

    fn check(&self, index: usize) -> Result<(), GrpoError> {
        if self.logprob_new.len() != self.logprob_old.len() {
            return Err(GrpoError::LengthMismatch {
                index,
                new: self.logprob_new.len(),
                old: self.logprob_old.len(),
            });
        }
        if !self.logprob_new.iter().chain(&self.logprob_old).all(|v| v.is_finite()) {
            return Err(GrpoError::NonFiniteLogprob { index });
        }
        Ok(())
    }
}

/// Group-normalized advantages `(rᵢ − mean) / max(std, 1e-8)` with the
/// population standard deviation. The floor only guards near-constant
/// groups, so any group with a spread above it gets unit deviation.
pub fn grpo_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if let Some(index) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(GrpoError::NonFiniteReward { index });
    }
    // The float mean of equal values can miss them by an ulp, which the
    // floor would blow up to ~1e-8.
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let denom = var.sqrt().max(ADVANTAGE_EPSILON);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// `min(ρ·A, clip(ρ, 1−ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// `ρ − 1 − ln ρ`, non-negative for every `ρ > 0`.
pub fn kl_term(ratio: f64) -> f64 {
    ratio - 1.0 - ratio.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub surrogate: f64,
    pub kl_estimate: f64,
    /// `−surrogate + β·kl_estimate`; minimized.
    pub loss: f64,
}

pub fn grpo_loss(group: &[Candidate], advantages: &[f64], cfg: GrpoConfig) -> Result<LossTerms, GrpoError> {
    if group.len() < 2 {
        return Err(GrpoError::GroupTooSmall(group.len()));
    }
    assert_eq!(group.len(), advantages.len(), "one advantage per candidate");
    if !(cfg.clip_epsilon.is_finite() && cfg.clip_epsilon > 0.0) {
        return Err(GrpoError::InvalidClipEpsilon(cfg.clip_epsilon));
    }
    if !(cfg.beta_kl.is_finite() && cfg.beta_kl >= 0.0) {
        return Err(GrpoError::InvalidBeta(cfg.beta_kl));
    }
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for (i, (c, a)) in group.iter().zip(advantages).enumerate() {
        c.check(i)?;
        let rho = c.ratio();
        if !(rho.is_finite() && rho > 0.0) {
            return Err(GrpoError::NonFiniteLogprob { index: i });
        }
        surrogate += clipped_objective(rho, *a, cfg.clip_epsilon);
        kl += kl_term(rho);
    }
    let n = group.len() as f64;
    let surrogate = surrogate / n;
    let kl_estimate = kl / n;
    Ok(LossTerms {
        surrogate,
        kl_estimate,
        loss: -surrogate + cfg.beta_kl * kl_estimate,
    })
}

/// A scored group with its advantages and objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrpoBatch {
    pub group: Vec<Candidate>,
    pub advantages: Vec<f64>,
    pub clip_epsilon: f64,
    pub beta_kl: f64,
    pub surrogate: f64,
    pub kl_estimate: f64,
    pub loss: f64,
}

impl GrpoBatch {
    pub fn evaluate(group: Vec<Candidate>, cfg: GrpoConfig) -> Result<Self, GrpoError> {
        let rewards: Vec<f64> = group.iter().map(|c| c.reward.total).collect();
        let advantages = grpo_advantages(&rewards)?;
        let terms = grpo_loss(&group, &advantages, cfg)?;
        Ok(Self {
            group,
            advantages,
            clip_epsilon: cfg.clip_epsilon,
            beta_kl: cfg.beta_kl,
            surrogate: terms.surrogate,
            kl_estimate: terms.kl_estimate,
            loss: terms.loss,
        })
    }

    /// One record per candidate.
    pub fn lines(&self) -> Vec<BatchLine> {
        self.group
            .iter()
            .zip(&self.advantages)
            .enumerate()
            .map(|(i, (c, a))| BatchLine {
                candidate_index: i,
                r_align: c.reward.r_align,
                r_fmt: c.reward.r_fmt,
                total: c.reward.total,
                advantage: *a,
            })
            .collect()
    }

    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            group_size: self.group.len(),
            clip_epsilon: self.clip_epsilon,
            beta_kl: self.beta_kl,
            surrogate: self.surrogate,
            kl_estimate: self.kl_estimate,
            loss: self.loss,
        }
    }

    /// JSON lines: one per candidate, then the summary.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary()).expect("plain data serializes"));
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchLine {
    pub candidate_index: usize,
    pub r_align: f64,
    pub r_fmt: i8,
    pub total: f64,
    pub advantage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub beta_kl: f64,
    pub surrogate: f64,
    pub kl_estimate: f64,
    pub loss: f64,
}
