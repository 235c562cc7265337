//! Request and response bodies for every pipeline operation, and the
//! handlers that serve them. The HTTP service and the command line call
//! the same handlers, so a local run and a remote run agree byte for byte.

use std::fmt;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::color::{parse_color, Rgba};
use crate::raster::rasterize_report;
use crate::reward::{
    hybrid_reward, score_group, semantic_score, BatchLine, BatchSummary, Candidate, GrpoBatch, GrpoConfig,
    RewardReport, RewardTask, RewardWeights, ScoreRequest, ScoreResponse, ScorerError, SemanticScorer,
};
use crate::ssu::{apply, emit_stream, extract, parse_stream, token_stats, TokenStats, TokenStream, DEFAULT_FPS};
use crate::svg::{canonicalize, parse_svg, serialize_svg, FrameSequence, SvgDocument, Viewport, DEFAULT_VIEWPORT};
use crate::validate::{check_cot, check_format_with, CotReport, FormatOptions, ValidityVerdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiErrorKind {
    /// Malformed or unprocessable input.
    BadRequest,
    ScorerUnavailable,
    ScorerProtocol,
    Internal,
}

impl fmt::Display for ApiErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApiErrorKind::BadRequest => "bad request",
            ApiErrorKind::ScorerUnavailable => "scorer unavailable",
            ApiErrorKind::ScorerProtocol => "scorer protocol error",
            ApiErrorKind::Internal => "internal error",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct ApiError {
    pub kind: ApiErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl fmt::Display) -> Self {
        Self {
            kind: ApiErrorKind::BadRequest,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        Self {
            kind: ApiErrorKind::Internal,
            message: message.to_string(),
        }
    }
}

impl From<ScorerError> for ApiError {
    fn from(e: ScorerError) -> Self {
        let kind = match e {
            ScorerError::Unavailable(_) => ApiErrorKind::ScorerUnavailable,
            ScorerError::Protocol(_) => ApiErrorKind::ScorerProtocol,
            ScorerError::InvalidRequest(_) => ApiErrorKind::BadRequest,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

/// Error body of every failed HTTP call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ApiError,
}

fn viewport_of(v: Option<[f64; 2]>) -> Result<Viewport, ApiError> {
    match v {
        None => Ok(DEFAULT_VIEWPORT),
        Some([w, h]) if w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite() => Ok(Viewport::new(w, h)),
        Some([w, h]) => Err(ApiError::bad_request(format!("invalid viewport {w}x{h}"))),
    }
}

fn parse_doc(text: &str, what: &str) -> Result<SvgDocument, ApiError> {
    parse_svg(text).map_err(|e| ApiError::bad_request(format!("{what}: {e}")))
}

fn canonical_frames(frames: &[String], viewport: Viewport, fps: u32) -> Result<FrameSequence, ApiError> {
    let docs = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let doc = parse_doc(f, &format!("frame {i}"))?;
            canonicalize(&doc, viewport).map_err(|e| ApiError::bad_request(format!("frame {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    FrameSequence::new(docs, fps).map_err(ApiError::bad_request)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalizeRequest {
    pub svg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalizeResponse {
    pub svg: String,
}

pub fn canonicalize_svg(req: &CanonicalizeRequest) -> Result<CanonicalizeResponse, ApiError> {
    let doc = parse_doc(&req.svg, "input")?;
    let out = canonicalize(&doc, viewport_of(req.viewport)?).map_err(ApiError::bad_request)?;
    Ok(CanonicalizeResponse {
        svg: serialize_svg(&out),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeRequest {
    /// SVG text of frames 0..=T.
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub stream: TokenStream,
    /// Canonical initial document.
    pub s0: String,
    /// Number of update frames T.
    pub frame_count: usize,
    pub fps: u32,
    pub viewport: [f64; 2],
    pub stats: TokenStats,
}

pub fn encode(req: &EncodeRequest) -> Result<EncodeResponse, ApiError> {
    let fps = req.fps.unwrap_or(DEFAULT_FPS);
    let viewport = viewport_of(req.viewport)?;
    let seq = canonical_frames(&req.frames, viewport, fps)?;
    let u = extract(&seq).map_err(ApiError::bad_request)?;
    let stats = token_stats(&seq).map_err(ApiError::bad_request)?;
    Ok(EncodeResponse {
        stream: emit_stream(&u),
        s0: serialize_svg(seq.initial()),
        frame_count: seq.update_count(),
        fps,
        viewport: [viewport.width, viewport.height],
        stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub stream: TokenStream,
    pub s0: String,
    /// Expected update frame count T.
    pub frame_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResponse {
    /// SVG text of frames 0..=T.
    pub frames: Vec<String>,
}

pub fn decode(req: &DecodeRequest) -> Result<DecodeResponse, ApiError> {
    let s0 = parse_doc(&req.s0, "s0")?;
    let u = parse_stream(req.stream.as_str(), &s0, req.frame_count).map_err(ApiError::bad_request)?;
    let seq = apply(&u).map_err(ApiError::bad_request)?;
    Ok(DecodeResponse {
        frames: seq.frames().iter().map(serialize_svg).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub stream: TokenStream,
    pub s0: String,
    pub frame_count: usize,
    #[serde(default)]
    pub strict: bool,
}

pub fn validate(req: &ValidateRequest) -> Result<ValidityVerdict, ApiError> {
    let s0 = parse_doc(&req.s0, "s0")?;
    Ok(check_format_with(
        req.stream.as_str(),
        &s0,
        req.frame_count,
        FormatOptions { strict: req.strict },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CotRequest {
    pub text: String,
    pub s0: String,
}

pub fn cot(req: &CotRequest) -> Result<CotReport, ApiError> {
    let s0 = parse_doc(&req.s0, "s0")?;
    Ok(check_cot(&req.text, &s0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRequest {
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport: Option<[f64; 2]>,
}

pub fn stats(req: &StatsRequest) -> Result<TokenStats, ApiError> {
    let seq = canonical_frames(&req.frames, viewport_of(req.viewport)?, DEFAULT_FPS)?;
    token_stats(&seq).map_err(ApiError::bad_request)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderRequest {
    /// SVG text per frame, rendered as given (canonicalize first).
    pub frames: Vec<String>,
    /// Output pixel size; defaults to each frame's viewport.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<[u32; 2]>,
    /// Background color; defaults to white.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderResponse {
    /// Base64 PNG per frame.
    pub frames: Vec<String>,
    /// Features skipped while drawing, per frame.
    pub ignored: Vec<Vec<String>>,
}

pub fn render(req: &RenderRequest) -> Result<RenderResponse, ApiError> {
    use rayon::prelude::*;
    let background = match &req.background {
        Some(c) => parse_color(c).map_err(ApiError::bad_request)?,
        None => Rgba::WHITE,
    };
    let docs = req
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| parse_doc(f, &format!("frame {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let rendered = docs
        .par_iter()
        .map(|doc| {
            let size = req.size.map_or_else(|| doc.viewport().pixel_size(), |[w, h]| (w, h));
            let r = rasterize_report(doc, size, background).map_err(ApiError::bad_request)?;
            let png = r.framebuffer.encode_png().map_err(ApiError::internal)?;
            Ok((base64::engine::general_purpose::STANDARD.encode(png), r.ignored))
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    let (frames, ignored) = rendered.into_iter().unzip();
    Ok(RenderResponse { frames, ignored })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub prompt: String,
    pub stream: TokenStream,
    pub s0: String,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub weights: RewardWeights,
}

pub fn reward(req: &RewardRequest, scorer: &dyn SemanticScorer) -> Result<RewardReport, ApiError> {
    let s0 = parse_doc(&req.s0, "s0")?;
    let task = RewardTask {
        prompt: &req.prompt,
        s0: &s0,
        frames: req.frame_count,
        description: req.description.as_deref(),
    };
    hybrid_reward(&task, req.stream.as_str(), req.weights, scorer).map_err(reward_error)
}

fn reward_error(e: crate::reward::RewardError) -> ApiError {
    match e {
        crate::reward::RewardError::Scorer(s) => s.into(),
        other => ApiError::bad_request(other),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateInput {
    pub stream: TokenStream,
    pub logprob_new: Vec<f64>,
    pub logprob_old: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrpoRequest {
    pub prompt: String,
    pub s0: String,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub candidates: Vec<CandidateInput>,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default)]
    pub config: GrpoConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrpoResponse {
    pub lines: Vec<BatchLine>,
    pub summary: BatchSummary,
}

impl GrpoResponse {
    /// One JSON object per candidate, then the summary.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&serde_json::to_string(line).expect("plain data serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary).expect("plain data serializes"));
        out.push('\n');
        out
    }
}

pub fn grpo(req: &GrpoRequest, scorer: &dyn SemanticScorer) -> Result<GrpoResponse, ApiError> {
    let s0 = parse_doc(&req.s0, "s0")?;
    let task = RewardTask {
        prompt: &req.prompt,
        s0: &s0,
        frames: req.frame_count,
        description: req.description.as_deref(),
    };
    let streams: Vec<String> = req.candidates.iter().map(|c| c.stream.0.clone()).collect();
    let reports = score_group(&task, &streams, req.weights, scorer).map_err(reward_error)?;
    let group = req
        .candidates
        .iter()
        .zip(reports)
        .map(|(c, reward)| Candidate {
            stream: c.stream.clone(),
            logprob_new: c.logprob_new.clone(),
            logprob_old: c.logprob_old.clone(),
            reward,
        })
        .collect();
    let batch = GrpoBatch::evaluate(group, req.config).map_err(ApiError::bad_request)?;
    Ok(GrpoResponse {
        lines: batch.lines(),
        summary: batch.summary(),
    })
}

/// Serves the scorer protocol with `scorer`.
pub fn score(req: &ScoreRequest, scorer: &dyn SemanticScorer) -> Result<ScoreResponse, ApiError> {
    let frames = req.decode_frames()?;
    let score = semantic_score(scorer, &req.prompt, &frames, req.description.as_deref())?;
    Ok(ScoreResponse { score })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

pub fn health() -> Health {
    Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
}
