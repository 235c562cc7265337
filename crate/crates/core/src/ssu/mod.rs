//! Sparse state updates: per-frame attribute differentials on persistent
//! nodes, their reconstruction, and the `<|time=t|>` / `<|ID=id|>` token
//! stream that carries them.

mod codec;
mod stats;
pub(crate) mod stream;

use std::fmt;

use thiserror::Error;

use crate::svg::{NodeId, SvgDocument};

pub use codec::{apply, extract};
pub use stats::{count_tokens, token_stats, tokenize, TokenStats, TOKEN_PATTERN};
pub use stream::{emit_stream, parse_stream, FailureKind, StreamFailure, TokenStream};

/// Frame rate assumed when a stream is decoded without a manifest.
pub const DEFAULT_FPS: u32 = 24;

/// Text of the removal sentinel on the wire.
pub const REMOVAL_SENTINEL: &str = "~";

/// Attributes that may carry updates.
pub const DIFFABLE_ATTRS: &[&str] = &[
    "d",
    "transform",
    "fill",
    "stroke",
    "opacity",
    "fill-opacity",
    "stroke-opacity",
    "stroke-width",
    // filter primitive values
    "values",
    "type",
    "radius",
    "operator",
];

pub fn is_diffable(attr: &str) -> bool {
    DIFFABLE_ATTRS.contains(&attr)
}

/// Whether `attr` is meaningful on an element with `tag`. Updates that
/// break this would change what kind of node an id denotes.
pub fn attr_applies_to(tag: &str, attr: &str) -> bool {
    const SHAPES_AND_GROUPS: &[&str] = &["path", "rect", "circle", "ellipse", "line", "polyline", "polygon", "g"];
    match attr {
        "d" => tag == "path",
        "values" | "type" => tag == "feColorMatrix",
        "radius" | "operator" => tag == "feMorphology",
        a if is_diffable(a) => SHAPES_AND_GROUPS.contains(&tag),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AttrValue {
    Set(String),
    Remove,
}

impl AttrValue {
    pub fn as_set(&self) -> Option<&str> {
        match self {
            AttrValue::Set(v) => Some(v),
            AttrValue::Remove => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Set(v) => f.write_str(v),
            AttrValue::Remove => f.write_str(REMOVAL_SENTINEL),
        }
    }
}

/// One `(id, attr, value)` triple.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttrUpdate {
    pub id: NodeId,
    pub attr: String,
    pub value: AttrValue,
}

impl AttrUpdate {
    pub fn set(id: u32, attr: &str, value: &str) -> Self {
        Self {
            id: NodeId(id),
            attr: attr.to_owned(),
            value: AttrValue::Set(value.to_owned()),
        }
    }

    pub fn remove(id: u32, attr: &str) -> Self {
        Self {
            id: NodeId(id),
            attr: attr.to_owned(),
            value: AttrValue::Remove,
        }
    }
}

/// Updates of frame `t`, sorted by `(id, attr)`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UpdateSet {
    pub t: usize,
    pub updates: Vec<AttrUpdate>,
}

impl UpdateSet {
    pub fn new(t: usize, mut updates: Vec<AttrUpdate>) -> Self {
        updates.sort_by(|a, b| (a.id, &a.attr).cmp(&(b.id, &b.attr)));
        Self { t, updates }
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }
}

/// `(S0, Δ1, …, ΔT)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateSequence {
    pub initial: SvgDocument,
    pub deltas: Vec<UpdateSet>,
    pub fps: u32,
}

impl UpdateSequence {
    pub fn update_count(&self) -> usize {
        self.deltas.len()
    }

    pub fn total_updates(&self) -> usize {
        self.deltas.iter().map(|d| d.updates.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("frame {frame}: dynamic <{tag}> at {path} has no persistent id")]
    NonCanonicalInput { frame: usize, tag: String, path: String },
    #[error("frame {frame}: static node at {path} changed")]
    StaticNodeChanged { frame: usize, path: String },
    #[error("frame {frame}: id {id} changed non-diffable attribute '{attr}'")]
    UndiffableChange { frame: usize, id: NodeId, attr: String },
    #[error("frame {frame}: unknown id {id}")]
    UnknownId { frame: usize, id: NodeId },
    #[error("frame {frame}: attribute '{attr}' is not diffable")]
    UndiffableAttr { frame: usize, attr: String },
    #[error("expected update frame {expected}, found {found}")]
    NegativeFrameGap { expected: usize, found: usize },
    #[error(transparent)]
    Sequence(#[from] crate::svg::SvgError),
}
