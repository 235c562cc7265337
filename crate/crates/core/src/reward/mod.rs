//! Hybrid reward `λ_align·r_align + λ_fmt·r_fmt` and the group-relative
//! policy objective built on it.

mod grpo;
mod scorer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::render_sequence;
use crate::ssu::parse_stream;
use crate::svg::SvgDocument;
use crate::validate::check_format;

pub use grpo::{
    clipped_objective, grpo_advantages, grpo_loss, kl_term, BatchLine, BatchSummary, Candidate, GrpoBatch,
    GrpoConfig, GrpoError, LossTerms, ADVANTAGE_EPSILON, DEFAULT_BETA_KL, DEFAULT_CLIP_EPSILON, DEFAULT_GROUP_SIZE,
};
pub use scorer::{semantic_score, word_set, ScoreRequest, ScoreResponse, ScorerError, SemanticScorer, StubScorer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lambda_align: f64,
    pub lambda_fmt: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda_align: 1.0,
            lambda_fmt: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub r_align: f64,
    pub r_fmt: i8,
    pub lambda_align: f64,
    pub lambda_fmt: f64,
    pub total: f64,
    /// Why `r_align` was not computed by the scorer, if it was not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl RewardReport {
    pub fn new(r_align: f64, r_fmt: i8, weights: RewardWeights, diagnostic: Option<String>) -> Self {
        Self {
            r_align,
            r_fmt,
            lambda_align: weights.lambda_align,
            lambda_fmt: weights.lambda_fmt,
            total: weights.lambda_align * r_align + weights.lambda_fmt * f64::from(r_fmt),
            diagnostic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("reward weights must be finite and non-negative, got {0:?}")]
    InvalidWeights(RewardWeights),
}

/// What a candidate is judged against.
pub struct RewardTask<'a> {
    pub prompt: &'a str,
    pub s0: &'a SvgDocument,
    /// Expected number of update frames.
    pub frames: usize,
    /// Manifest description of the target animation, for scorers that
    /// compare text.
    pub description: Option<&'a str>,
}

/// Scores one candidate stream. Invalid streams get `r_align = −1`
/// without a scorer call, as do valid streams that cannot be rendered.
/// With `λ_align = 0` the scorer is never called and `r_align` is 0.
pub fn hybrid_reward(
    task: &RewardTask<'_>,
    stream: &str,
    weights: RewardWeights,
    scorer: &dyn SemanticScorer,
) -> Result<RewardReport, RewardError> {
    let ok = |w: f64| w.is_finite() && w >= 0.0;
    if !ok(weights.lambda_align) || !ok(weights.lambda_fmt) {
        return Err(RewardError::InvalidWeights(weights));
    }
    let verdict = check_format(stream, task.s0, task.frames);
    if !verdict.is_valid() {
        return Ok(RewardReport::new(-1.0, -1, weights, verdict.first_failure));
    }
    if weights.lambda_align == 0.0 {
        return Ok(RewardReport::new(0.0, 1, weights, Some("lambda_align is 0; scorer skipped".into())));
    }
    let u = parse_stream(stream, task.s0, task.frames).expect("stream passed check_format");
    let frames = match render_sequence(&u, task.s0.viewport().pixel_size()) {
        Ok(f) => f,
        Err(e) => return Ok(RewardReport::new(-1.0, 1, weights, Some(format!("unrenderable: {e}")))),
    };
    let r_align = semantic_score(scorer, task.prompt, &frames, task.description)?;
    Ok(RewardReport::new(r_align, 1, weights, None))
}

/// Scores every candidate of a group concurrently; results keep the
/// input order.
pub fn score_group(
    task: &RewardTask<'_>,
    streams: &[String],
    weights: RewardWeights,
    scorer: &dyn SemanticScorer,
) -> Result<Vec<RewardReport>, RewardError> {
    streams
        .par_iter()
        .map(|s| hybrid_reward(task, s, weights, scorer))
        .collect()
}
