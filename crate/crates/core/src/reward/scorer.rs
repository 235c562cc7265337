use std::collections::BTreeSet;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Framebuffer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScorerError {
    /// Backend unreachable, timed out, or answered with a server error.
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    /// Backend answered, but not with a score in [-1, 1].
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
}

/// Maps a prompt and rendered frames to an alignment score in `[-1, 1]`.
pub trait SemanticScorer: Send + Sync {
    /// `description` is the per-animation text from the corpus manifest,
    /// when one exists.
    fn score(&self, prompt: &str, frames: &[Framebuffer], description: Option<&str>) -> Result<f64, ScorerError>;
}

impl<S: SemanticScorer + ?Sized> SemanticScorer for Box<S> {
    fn score(&self, prompt: &str, frames: &[Framebuffer], description: Option<&str>) -> Result<f64, ScorerError> {
        (**self).score(prompt, frames, description)
    }
}

impl<S: SemanticScorer + ?Sized> SemanticScorer for std::sync::Arc<S> {
    fn score(&self, prompt: &str, frames: &[Framebuffer], description: Option<&str>) -> Result<f64, ScorerError> {
        (**self).score(prompt, frames, description)
    }
}

/// Checks the request preconditions, calls `scorer`, and checks the
/// result range.
pub fn semantic_score(
    scorer: &dyn SemanticScorer,
    prompt: &str,
    frames: &[Framebuffer],
    description: Option<&str>,
) -> Result<f64, ScorerError> {
    if prompt.trim().is_empty() {
        return Err(ScorerError::InvalidRequest("empty prompt".into()));
    }
    if frames.is_empty() {
        return Err(ScorerError::InvalidRequest("no frames".into()));
    }
    let s = scorer.score(prompt, frames, description)?;
    if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
        return Err(ScorerError::Protocol(format!("score {s} is outside [-1, 1]")));
    }
    Ok(s)
}

/// Lowercased alphanumeric words.
pub fn word_set(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Deterministic stand-in for an embedding model: `2·J − 1` where `J` is
/// the Jaccard index of the word sets of the prompt and the description.
/// Frames are not inspected.
#[derive(Clone, Copy, Debug, Default)]
pub struct StubScorer;

impl StubScorer {
    pub fn score_text(prompt: &str, description: &str) -> f64 {
        let a = word_set(prompt);
        let b = word_set(description);
        let union = a.union(&b).count();
        if union == 0 {
            return 1.0;
        }
        let j = a.intersection(&b).count() as f64 / union as f64;
        2.0 * j - 1.0
    }
}

impl SemanticScorer for StubScorer {
    fn score(&self, prompt: &str, _frames: &[Framebuffer], description: Option<&str>) -> Result<f64, ScorerError> {
        let description = description.ok_or_else(|| {
            ScorerError::InvalidRequest("the stub scorer needs an animation description".into())
        })?;
        Ok(Self::score_text(prompt, description))
    }
}

/// Body of `POST /score`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    /// Base64 (standard alphabet, padded) PNG per frame.
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
}

impl ScoreRequest {
    pub fn new(prompt: &str, frames: &[Framebuffer], description: Option<&str>) -> Result<Self, ScorerError> {
        let frames = frames
            .iter()
            .map(|f| {
                f.encode_png()
                    .map(|png| base64::engine::general_purpose::STANDARD.encode(png))
                    .map_err(|e| ScorerError::InvalidRequest(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            prompt: prompt.to_owned(),
            frames,
            description: description.map(str::to_owned),
        })
    }

    pub fn decode_frames(&self) -> Result<Vec<Framebuffer>, ScorerError> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, b64)| {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(b64)
                    .map_err(|e| ScorerError::InvalidRequest(format!("frame {i}: {e}")))?;
                Framebuffer::decode_png(&bytes).map_err(|e| ScorerError::InvalidRequest(format!("frame {i}: {e}")))
            })
            .collect()
    }
}
