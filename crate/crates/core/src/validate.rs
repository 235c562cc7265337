//! Validity judgments over untrusted generator output: the ±1 format
//! reward for update streams and id grounding for reasoning text.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::color::parse_paint;
use crate::numfmt::{parse_list, parse_real};
use crate::path::{parse_path, parse_transform};
use crate::ssu::stream::{check_frame_indices, parse_syntax, RawFrame};
use crate::ssu::{apply, attr_applies_to, is_diffable, parse_stream, REMOVAL_SENTINEL};
use crate::svg::{NodeId, SvgDocument};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not evaluated because an earlier check made it meaningless.
    Skipped,
}

impl CheckStatus {
    fn from_ok(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Syntax,
    FrameCount,
    IdTopology,
    Render,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Syntax => "syntax",
            Check::FrameCount => "frame_count",
            Check::IdTopology => "id_topology",
            Check::Render => "render",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checks {
    pub syntax: CheckStatus,
    pub frame_count: CheckStatus,
    pub id_topology: CheckStatus,
    /// Present only in strict mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<CheckStatus>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub reward: i8,
    pub checks: Checks,
    pub first_failure: Option<String>,
}

impl ValidityVerdict {
    pub fn is_valid(&self) -> bool {
        self.reward == 1
    }

    /// The first failing check in evaluation order.
    pub fn failed_check(&self) -> Option<Check> {
        let c = &self.checks;
        [
            (Check::Syntax, Some(c.syntax)),
            (Check::FrameCount, Some(c.frame_count)),
            (Check::IdTopology, Some(c.id_topology)),
            (Check::Render, c.render),
        ]
        .into_iter()
        .find(|(_, s)| *s == Some(CheckStatus::Fail))
        .map(|(k, _)| k)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FormatOptions {
    /// Also rasterize the first update frame (frame 0 when there is none).
    pub strict: bool,
}

/// Grammar check for one attribute value. Unknown attributes pass; the
/// whitelist is enforced separately.
pub fn check_value(attr: &str, value: &str) -> Result<(), String> {
    if value == REMOVAL_SENTINEL {
        return Ok(());
    }
    let real = |v: &str| parse_real(v).ok_or_else(|| format!("'{value}' is not a number"));
    match attr {
        "d" => parse_path(value).map(|_| ()).map_err(|e| e.to_string()),
        "transform" => parse_transform(value).map(|_| ()).map_err(|e| e.to_string()),
        "opacity" | "fill-opacity" | "stroke-opacity" => {
            let v = real(value)?;
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{attr} {value} is outside [0, 1]"))
            }
        }
        "stroke-width" => {
            let v = real(value.strip_suffix("px").unwrap_or(value))?;
            if v >= 0.0 {
                Ok(())
            } else {
                Err(format!("negative stroke-width {value}"))
            }
        }
        "fill" | "stroke" => parse_paint(value).map(|_| ()).map_err(|e| e.to_string()),
        "values" => match parse_list(value) {
            Some(v) if !v.is_empty() => Ok(()),
            _ => Err(format!("malformed number list '{value}'")),
        },
        "radius" => match parse_list(value) {
            Some(v) if (1..=2).contains(&v.len()) && v.iter().all(|r| *r >= 0.0) => Ok(()),
            _ => Err(format!("radius must be one or two non-negative numbers, got '{value}'")),
        },
        "type" => match value {
            "matrix" | "saturate" | "hueRotate" | "luminanceToAlpha" => Ok(()),
            _ => Err(format!("unknown color matrix type '{value}'")),
        },
        "operator" => match value {
            "erode" | "dilate" => Ok(()),
            _ => Err(format!("unknown morphology operator '{value}'")),
        },
        _ => Ok(()),
    }
}

fn topology_failure(frames: &[RawFrame<'_>], s0: &SvgDocument) -> Option<String> {
    for frame in frames {
        for e in &frame.entries {
            let Some(node) = NodeId::parse(e.id).and_then(|id| s0.node(id)) else {
                return Some(format!("line {}: id {} does not exist in the initial document", e.line, e.id));
            };
            if !is_diffable(e.attr) {
                return Some(format!("line {}: attribute '{}' cannot be updated", e.line, e.attr));
            }
            if !attr_applies_to(&node.tag, e.attr) {
                return Some(format!(
                    "line {}: '{}' does not apply to <{}> (id {})",
                    e.line, e.attr, node.tag, e.id
                ));
            }
        }
    }
    None
}

/// Scores `stream` against the initial document and expected update
/// frame count: +1 iff syntax (including per-attribute value grammars),
/// frame count and id topology all pass.
pub fn check_format(stream: &str, s0: &SvgDocument, t: usize) -> ValidityVerdict {
    check_format_with(stream, s0, t, FormatOptions::default())
}

pub fn check_format_with(stream: &str, s0: &SvgDocument, t: usize, opts: FormatOptions) -> ValidityVerdict {
    let mut failures: Vec<String> = Vec::new();
    let mut checks = Checks {
        syntax: CheckStatus::Skipped,
        frame_count: CheckStatus::Skipped,
        id_topology: CheckStatus::Skipped,
        render: opts.strict.then_some(CheckStatus::Skipped),
    };

    match parse_syntax(stream) {
        Err(f) => {
            checks.syntax = CheckStatus::Fail;
            failures.push(f.to_string());
        }
        Ok(frames) => {
            let value_error = frames.iter().flat_map(|f| &f.entries).find_map(|e| {
                check_value(e.attr, e.value)
                    .err()
                    .map(|m| format!("syntax (line {}): {}: {m}", e.line, e.attr))
            });
            checks.syntax = CheckStatus::from_ok(value_error.is_none());
            failures.extend(value_error);

            let frame_count = check_frame_indices(&frames, t);
            checks.frame_count = CheckStatus::from_ok(frame_count.is_ok());
            failures.extend(frame_count.err().map(|f| f.to_string()));

            let topology = topology_failure(&frames, s0);
            checks.id_topology = CheckStatus::from_ok(topology.is_none());
            failures.extend(topology.map(|m| format!("id-topology: {m}")));

            if opts.strict && failures.is_empty() {
                let render = render_smoke_test(stream, s0, t);
                checks.render = Some(CheckStatus::from_ok(render.is_ok()));
                failures.extend(render.err().map(|m| format!("render: {m}")));
            }
        }
    }

    ValidityVerdict {
        reward: if failures.is_empty() { 1 } else { -1 },
        checks,
        first_failure: failures.into_iter().next(),
    }
}

fn render_smoke_test(stream: &str, s0: &SvgDocument, t: usize) -> Result<(), String> {
    let u = parse_stream(stream, s0, t).map_err(|e| e.to_string())?;
    let frames = apply(&u).map_err(|e| e.to_string())?;
    let frame = &frames.frames()[usize::from(t > 0)];
    let size = frame.viewport().pixel_size();
    crate::raster::rasterize(frame, size, crate::color::Rgba::WHITE)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotReport {
    /// Distinct ids in order of first mention, leading zeros removed.
    pub referenced_ids: Vec<u64>,
    pub unknown_ids: Vec<u64>,
    pub accepted: bool,
}

/// Id mentions: `ID 05`, `id=5`, `Id = "5"`, case-insensitive.
pub const COT_ID_PATTERN: &str = r#"(?i)\bid(?:\s*=\s*|\s+)"?(\d+)"?"#;

fn cot_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(COT_ID_PATTERN).expect("id pattern compiles"))
}

/// Accepts reasoning text iff it mentions at least one id and every
/// mentioned id exists in `s0`.
pub fn check_cot(text: &str, s0: &SvgDocument) -> CotReport {
    let mut seen = BTreeSet::new();
    let mut referenced_ids = Vec::new();
    for caps in cot_regex().captures_iter(text) {
        let digits = caps[1].trim_start_matches('0');
        // Ids too large for u64 can never resolve.
        let id = if digits.is_empty() { 0 } else { digits.parse().unwrap_or(u64::MAX) };
        if seen.insert(id) {
            referenced_ids.push(id);
        }
    }
    let unknown_ids: Vec<u64> = referenced_ids
        .iter()
        .copied()
        .filter(|&id| !u32::try_from(id).is_ok_and(|id| s0.contains_id(NodeId(id))))
        .collect();
    CotReport {
        accepted: !referenced_ids.is_empty() && unknown_ids.is_empty(),
        referenced_ids,
        unknown_ids,
    }
}
