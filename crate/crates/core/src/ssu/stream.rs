//! Wire format (UTF-8, LF line endings):
//!
//! ```text
//! stream := frame+
//! frame  := "<|time=" INT "|>" LF entry*
//! entry  := "  " "<|ID=" INT "|>" SP ATTRNAME ":" SP VALUE LF
//! VALUE  := any non-LF bytes, or "~" for removal
//! ```
//!
//! The empty string encodes a sequence with no update frames.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{is_diffable, AttrUpdate, AttrValue, UpdateSequence, UpdateSet, DEFAULT_FPS, REMOVAL_SENTINEL};
use crate::svg::{NodeId, SvgDocument};

/// Serialized update sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream(pub String);

impl TokenStream {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn emit_stream(u: &UpdateSequence) -> TokenStream {
    let mut out = String::new();
    for delta in &u.deltas {
        out.push_str("<|time=");
        out.push_str(&delta.t.to_string());
        out.push_str("|>\n");
        for up in &delta.updates {
            out.push_str("  <|ID=");
            out.push_str(&up.id.to_string());
            out.push_str("|> ");
            out.push_str(&up.attr);
            out.push_str(": ");
            out.push_str(&up.value.to_string());
            out.push('\n');
        }
    }
    TokenStream(out)
}

/// Which stream check failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Syntax,
    FrameCount,
    UnknownId,
    UndiffableAttr,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::Syntax => "syntax",
            FailureKind::FrameCount => "frame-count",
            FailureKind::UnknownId => "unknown-id",
            FailureKind::UndiffableAttr => "undiffable-attr",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamFailure {
    pub kind: FailureKind,
    /// 1-based line of the offending text, when there is one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for StreamFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {l}): {}", self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

impl std::error::Error for StreamFailure {}

fn fail(kind: FailureKind, line: Option<usize>, message: impl Into<String>) -> StreamFailure {
    StreamFailure {
        kind,
        line,
        message: message.into(),
    }
}

pub(crate) struct RawEntry<'a> {
    pub line: usize,
    /// Digits with leading zeros stripped.
    pub id: &'a str,
    pub attr: &'a str,
    pub value: &'a str,
}

pub(crate) struct RawFrame<'a> {
    pub line: usize,
    pub t: u64,
    pub entries: Vec<RawEntry<'a>>,
}

/// Parses an untrusted stream against `s0`. Checks run in order (syntax,
/// frame count, id resolution, attribute whitelist) and the first failing
/// one is reported. Entries that restate the current value are dropped and
/// entries are re-sorted, so the result is a canonical sequence.
pub fn parse_stream(text: &str, s0: &SvgDocument, expected_t: usize) -> Result<UpdateSequence, StreamFailure> {
    let frames = parse_syntax(text)?;
    check_frame_indices(&frames, expected_t)?;

    for frame in &frames {
        for e in &frame.entries {
            let known = NodeId::parse(e.id).is_some_and(|id| s0.contains_id(id));
            if !known {
                return Err(fail(
                    FailureKind::UnknownId,
                    Some(e.line),
                    format!("id {} does not exist in the initial document", e.id),
                ));
            }
        }
    }
    for frame in &frames {
        for e in &frame.entries {
            if !is_diffable(e.attr) {
                return Err(fail(
                    FailureKind::UndiffableAttr,
                    Some(e.line),
                    format!("attribute '{}' cannot be updated", e.attr),
                ));
            }
        }
    }

    // Track live values so no-op entries are dropped.
    let mut state: BTreeMap<(NodeId, &str), Option<&str>> = BTreeMap::new();
    let mut deltas = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let mut updates = Vec::with_capacity(frame.entries.len());
        for e in &frame.entries {
            let id = NodeId::parse(e.id).expect("checked above");
            let new = (e.value != REMOVAL_SENTINEL).then_some(e.value);
            let old = *state.entry((id, e.attr)).or_insert_with(|| {
                s0.node(id).and_then(|n| n.get(e.attr))
            });
            if old == new {
                continue;
            }
            state.insert((id, e.attr), new);
            updates.push(AttrUpdate {
                id,
                attr: e.attr.to_owned(),
                value: new.map_or(AttrValue::Remove, |v| AttrValue::Set(v.to_owned())),
            });
        }
        deltas.push(UpdateSet::new(i + 1, updates));
    }
    Ok(UpdateSequence {
        initial: s0.clone(),
        deltas,
        fps: DEFAULT_FPS,
    })
}

pub(crate) fn parse_syntax(text: &str) -> Result<Vec<RawFrame<'_>>, StreamFailure> {
    let mut frames: Vec<RawFrame<'_>> = Vec::new();
    if text.is_empty() {
        return Ok(frames);
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for (i, line) in body.split('\n').enumerate() {
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix("<|time=") {
            let digits = rest
                .strip_suffix("|>")
                .ok_or_else(|| fail(FailureKind::Syntax, Some(lineno), "malformed frame header"))?;
            let t = parse_int(digits)
                .ok_or_else(|| fail(FailureKind::Syntax, Some(lineno), "frame index is not a decimal integer"))?;
            frames.push(RawFrame {
                line: lineno,
                t,
                entries: Vec::new(),
            });
            seen.clear();
        } else if let Some(rest) = line.strip_prefix("  <|ID=") {
            let Some(frame) = frames.last_mut() else {
                return Err(fail(FailureKind::Syntax, Some(lineno), "update before the first frame header"));
            };
            let (id, rest) = rest
                .split_once("|>")
                .ok_or_else(|| fail(FailureKind::Syntax, Some(lineno), "unterminated <|ID=…|> tag"))?;
            if parse_int(id).is_none() {
                return Err(fail(FailureKind::Syntax, Some(lineno), "node id is not a decimal integer"));
            }
            let rest = rest
                .strip_prefix(' ')
                .ok_or_else(|| fail(FailureKind::Syntax, Some(lineno), "expected a space after the id tag"))?;
            let (attr, value) = rest
                .split_once(": ")
                .ok_or_else(|| fail(FailureKind::Syntax, Some(lineno), "expected 'attr: value'"))?;
            if !valid_attr_name(attr) {
                return Err(fail(
                    FailureKind::Syntax,
                    Some(lineno),
                    format!("invalid attribute name '{attr}'"),
                ));
            }
            if value.is_empty() {
                return Err(fail(FailureKind::Syntax, Some(lineno), "empty value"));
            }
            let id = id.trim_start_matches('0');
            let id = if id.is_empty() { "0" } else { id };
            if !seen.insert((id, attr)) {
                return Err(fail(
                    FailureKind::Syntax,
                    Some(lineno),
                    format!("duplicate update of {attr} on id {id} within one frame"),
                ));
            }
            frame.entries.push(RawEntry {
                line: lineno,
                id,
                attr,
                value,
            });
        } else {
            return Err(fail(FailureKind::Syntax, Some(lineno), "unrecognized line"));
        }
    }
    Ok(frames)
}

fn parse_int(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // Absurdly long digit strings are still integers; saturate.
    Some(s.parse().unwrap_or(u64::MAX))
}

fn valid_attr_name(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic())
        && bytes.all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b':'))
}

pub(crate) fn check_frame_indices(frames: &[RawFrame<'_>], expected_t: usize) -> Result<(), StreamFailure> {
    for (i, frame) in frames.iter().enumerate() {
        let want = i as u64 + 1;
        if frame.t == want {
            continue;
        }
        let message = if i > 0 && frames[..i].iter().any(|f| f.t == frame.t) {
            format!("duplicate frame header <|time={}|>", frame.t)
        } else {
            format!("expected <|time={want}|>, found <|time={}|>", frame.t)
        };
        return Err(fail(FailureKind::FrameCount, Some(frame.line), message));
    }
    if frames.len() != expected_t {
        return Err(fail(
            FailureKind::FrameCount,
            None,
            format!("stream has {} frames, expected {expected_t}", frames.len()),
        ));
    }
    Ok(())
}
