//! Persistent, ID-anchored SVG document model.
//!
//! A document is parsed once, canonicalized (fixed viewport, relative path
//! data, canonical numbers, sequential ids on dynamic nodes) and then only
//! its attribute values change from frame to frame.

mod canonical;
mod frames;
mod iso;
mod parse;
mod serialize;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{canonical_attr_value, canonicalize, DEFAULT_VIEWPORT};
pub use frames::{read_frames_dir, write_frames_dir, FrameMeta, FrameSequence, DEFAULT_MAX_UPDATES};
pub use iso::{isomorphism_check, Divergence};
pub use parse::parse_svg;
pub use serialize::serialize_svg;

/// Tags that may change between frames and therefore carry persistent ids.
pub const DYNAMIC_TAGS: &[&str] = &[
    "path",
    "rect",
    "circle",
    "ellipse",
    "line",
    "polyline",
    "polygon",
    "g",
    "feColorMatrix",
    "feMorphology",
];

pub fn is_dynamic_tag(tag: &str) -> bool {
    DYNAMIC_TAGS.contains(&tag)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvgError {
    #[error("XML syntax error at {line}:{column}: {message}")]
    XmlSyntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("root element is <{0}>, expected <svg>")]
    NonSvgRoot(String),
    #[error("unsupported unit in {attr}=\"{value}\" (only px lengths are supported)")]
    UnsupportedUnit { attr: String, value: String },
    #[error("degenerate viewport {width}x{height}")]
    DegenerateViewport { width: f64, height: f64 },
    #[error("invalid {attr} on <{tag}>: {message}")]
    InvalidAttribute {
        tag: String,
        attr: String,
        message: String,
    },
    #[error("frames {} and {frame} are not isomorphic at {divergence}", frame - 1)]
    NotIsomorphic { frame: usize, divergence: Divergence },
    #[error("frame {frame} has viewport {found}, sequence uses {expected}")]
    ViewportMismatch {
        frame: usize,
        found: Viewport,
        expected: Viewport,
    },
    #[error("sequence has {updates} update frames, maximum is {max}")]
    TooManyFrames { updates: usize, max: usize },
    #[error("frame sequence is empty")]
    EmptySequence,
    #[error("fps must be positive")]
    InvalidFps,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl SvgError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SvgError::Io {
            path: path.display().to_string(),
            message: source.to_string(),
        }
    }
}

/// Persistent identifier of a dynamic node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl NodeId {
    /// Decimal digits only; leading zeros are accepted and normalized.
    pub fn parse(s: &str) -> Option<NodeId> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse().ok().map(NodeId)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SvgNode {
    pub tag: String,
    pub id: Option<NodeId>,
    pub attributes: BTreeMap<String, String>,
    pub children: Vec<SvgNode>,
    /// Trimmed character data, kept so opaque nodes such as `<title>`
    /// survive a round trip.
    pub text: Option<String>,
}

impl SvgNode {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            ..Default::default()
        }
    }

    pub fn with_id(mut self, id: u32) -> Self {
        self.id = Some(NodeId(id));
        self
    }

    pub fn attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(name.into(), value.into());
        self
    }

    pub fn child(mut self, node: SvgNode) -> Self {
        self.children.push(node);
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    /// Pre-order traversal with the child-index path of each node.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&[usize], &'a SvgNode)) {
        fn rec<'a>(node: &'a SvgNode, path: &mut Vec<usize>, f: &mut impl FnMut(&[usize], &'a SvgNode)) {
            f(path, node);
            for (i, c) in node.children.iter().enumerate() {
                path.push(i);
                rec(c, path, f);
                path.pop();
            }
        }
        rec(self, &mut Vec::new(), f);
    }

    fn at_path(&self, path: &[usize]) -> Option<&SvgNode> {
        path.iter().try_fold(self, |n, &i| n.children.get(i))
    }

    fn at_path_mut(&mut self, path: &[usize]) -> Option<&mut SvgNode> {
        path.iter().try_fold(self, |n, &i| n.children.get_mut(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub width: f64,
    pub height: f64,
}

impl Viewport {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    /// Pixel dimensions for rasterization (rounded up).
    pub fn pixel_size(&self) -> (u32, u32) {
        (self.width.ceil().max(1.0) as u32, self.height.ceil().max(1.0) as u32)
    }
}

impl fmt::Display for Viewport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}",
            crate::numfmt::format_number(self.width),
            crate::numfmt::format_number(self.height)
        )
    }
}

/// One frame: a tree rooted at `<svg>` plus an index from persistent id
/// to node position.
#[derive(Clone, Debug)]
pub struct SvgDocument {
    root: SvgNode,
    viewport: Viewport,
    id_index: BTreeMap<NodeId, Vec<usize>>,
}

impl PartialEq for SvgDocument {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.viewport == other.viewport
    }
}

impl SvgDocument {
    /// Validates the root and builds the id index. The viewport is read
    /// leniently from `width`/`height`, falling back to `viewBox` and then
    /// the SVG default of 300×150.
    pub fn from_root(root: SvgNode) -> Result<Self, SvgError> {
        if root.tag != "svg" {
            return Err(SvgError::NonSvgRoot(root.tag));
        }
        let mut id_index = BTreeMap::new();
        let mut seen_names = HashSet::new();
        let mut dup = None;
        root.walk(&mut |path, node| {
            if let Some(id) = node.id {
                if id_index.insert(id, path.to_vec()).is_some() {
                    dup.get_or_insert_with(|| id.to_string());
                }
            }
            if let Some(name) = node.get("id") {
                let key = NodeId::parse(name).map_or_else(|| name.to_owned(), |n| n.to_string());
                if !seen_names.insert(key) {
                    dup.get_or_insert_with(|| name.to_owned());
                }
            }
        });
        if let Some(d) = dup {
            return Err(SvgError::DuplicateId(d));
        }
        // Plain `id` attributes and persistent ids share one namespace.
        for id in id_index.keys() {
            if seen_names.contains(&id.to_string()) {
                return Err(SvgError::DuplicateId(id.to_string()));
            }
        }
        let viewport = lenient_viewport(&root);
        Ok(Self {
            root,
            viewport,
            id_index,
        })
    }

    pub fn root(&self) -> &SvgNode {
        &self.root
    }

    pub fn into_root(self) -> SvgNode {
        self.root
    }

    pub fn viewport(&self) -> Viewport {
        self.viewport
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.id_index.keys().copied()
    }

    pub fn contains_id(&self, id: NodeId) -> bool {
        self.id_index.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&SvgNode> {
        self.id_index.get(&id).and_then(|p| self.root.at_path(p))
    }

    pub fn node_path(&self, id: NodeId) -> Option<&[usize]> {
        self.id_index.get(&id).map(Vec::as_slice)
    }

    /// Sets (`Some`) or removes (`None`) an attribute on a dynamic node.
    /// Returns false when the id is unknown.
    pub fn set_attribute(&mut self, id: NodeId, name: &str, value: Option<&str>) -> bool {
        let Some(path) = self.id_index.get(&id) else {
            return false;
        };
        let node = self.root.at_path_mut(path).expect("id index is consistent with the tree");
        match value {
            Some(v) => {
                node.attributes.insert(name.to_owned(), v.to_owned());
            }
            None => {
                node.attributes.remove(name);
            }
        }
        true
    }

    /// Number of attributes on dynamic nodes (persistent ids excluded).
    pub fn dynamic_attribute_count(&self) -> usize {
        let mut n = 0;
        self.root.walk(&mut |_, node| {
            if node.id.is_some() {
                n += node.attributes.len();
            }
        });
        n
    }
}

fn lenient_viewport(root: &SvgNode) -> Viewport {
    let px = |name: &str| {
        root.get(name)
            .map(|v| v.trim().trim_end_matches("px"))
            .and_then(crate::numfmt::parse_real)
            .filter(|v| *v > 0.0)
    };
    let view_box = root
        .get("viewBox")
        .and_then(crate::numfmt::parse_list)
        .filter(|v| v.len() == 4 && v[2] > 0.0 && v[3] > 0.0);
    let width = px("width").or(view_box.as_ref().map(|v| v[2])).unwrap_or(300.0);
    let height = px("height").or(view_box.as_ref().map(|v| v[3])).unwrap_or(150.0);
    Viewport::new(width, height)
}
