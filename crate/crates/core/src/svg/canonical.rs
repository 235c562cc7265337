use std::collections::HashSet;

use super::{is_dynamic_tag, NodeId, SvgDocument, SvgError, SvgNode, Viewport};
use crate::numfmt::{format_list, format_number, parse_list, parse_real};
use crate::path::{canonical_path, parse_transform, TransformMatrix};

pub const DEFAULT_VIEWPORT: Viewport = Viewport::new(500.0, 500.0);

/// Tags whose attributes are interpreted. Anything else is carried through
/// untouched together with its subtree.
const KNOWN_TAGS: &[&str] = &[
    "svg", "g", "path", "rect", "circle", "ellipse", "line", "polyline", "polygon", "defs", "filter",
    "feColorMatrix", "feMorphology", "title", "desc", "metadata", "use", "clipPath", "mask", "symbol",
];

const LENGTH_ATTRS: &[&str] = &[
    "x", "y", "width", "height", "rx", "ry", "cx", "cy", "r", "x1", "y1", "x2", "y2", "stroke-width",
];

/// Children of the root that accept a `transform` folding the viewport scale.
const TRANSFORMABLE: &[&str] = &[
    "g", "path", "rect", "circle", "ellipse", "line", "polyline", "polygon", "use", "image", "text",
];

/// Rescales `doc` to `target`, relativizes path data, normalizes numbers
/// and assigns sequential persistent ids to dynamic nodes lacking one.
///
/// The uniform viewport scale (and any `viewBox` mapping) is folded into
/// the `transform` of each top-level drawable child; the root keeps only
/// `width`/`height`.
pub fn canonicalize(doc: &SvgDocument, target: Viewport) -> Result<SvgDocument, SvgError> {
    if !(target.width > 0.0 && target.height > 0.0) {
        return Err(SvgError::DegenerateViewport {
            width: target.width,
            height: target.height,
        });
    }
    let mut root = doc.root().clone();

    let width = strict_length(&root, "width")?;
    let height = strict_length(&root, "height")?;
    let view_box = match root.get("viewBox") {
        Some(v) => match parse_list(v) {
            Some(nums) if nums.len() == 4 => Some(nums),
            _ => {
                return Err(SvgError::InvalidAttribute {
                    tag: "svg".into(),
                    attr: "viewBox".into(),
                    message: format!("expected four numbers, got '{v}'"),
                })
            }
        },
        None => None,
    };
    let fallback = doc.viewport();
    let w = width
        .or(view_box.as_ref().map(|v| v[2]))
        .unwrap_or(fallback.width);
    let h = height
        .or(view_box.as_ref().map(|v| v[3]))
        .unwrap_or(fallback.height);
    if !(w > 0.0 && h > 0.0) {
        return Err(SvgError::DegenerateViewport { width: w, height: h });
    }

    let mut total = TransformMatrix::IDENTITY;
    if let Some(vb) = &view_box {
        if !(vb[2] > 0.0 && vb[3] > 0.0) {
            return Err(SvgError::DegenerateViewport {
                width: vb[2],
                height: vb[3],
            });
        }
        let s = (w / vb[2]).min(h / vb[3]);
        let tx = (w - vb[2] * s) / 2.0 - vb[0] * s;
        let ty = (h - vb[3] * s) / 2.0 - vb[1] * s;
        total = TransformMatrix::new(s, 0.0, 0.0, s, tx, ty);
    }
    let s = (target.width / w).min(target.height / h);
    let fit = TransformMatrix::new(
        s,
        0.0,
        0.0,
        s,
        (target.width - w * s) / 2.0,
        (target.height - h * s) / 2.0,
    );
    total = fit.then_after(&total);

    root.attributes.remove("viewBox");
    root.attributes.insert("width".into(), format_number(target.width));
    root.attributes.insert("height".into(), format_number(target.height));

    for child in &mut root.children {
        format_attributes(child)?;
    }
    if !total.is_identity() {
        for child in &mut root.children {
            if !TRANSFORMABLE.contains(&child.tag.as_str()) {
                continue;
            }
            let existing = match child.get("transform") {
                Some(t) => parse_transform(t).map_err(|e| SvgError::InvalidAttribute {
                    tag: child.tag.clone(),
                    attr: "transform".into(),
                    message: e.to_string(),
                })?,
                None => TransformMatrix::IDENTITY,
            };
            child
                .attributes
                .insert("transform".into(), total.then_after(&existing).to_string());
        }
    }
    for (name, value) in root.attributes.iter_mut() {
        if name != "width" && name != "height" {
            *value = canonical_attr_value("svg", name, value)?;
        }
    }

    assign_ids(&mut root);
    SvgDocument::from_root(root)
}

fn strict_length(node: &SvgNode, name: &str) -> Result<Option<f64>, SvgError> {
    let Some(raw) = node.get(name) else {
        return Ok(None);
    };
    let v = raw.trim();
    let number = v.strip_suffix("px").unwrap_or(v);
    parse_real(number).map(Some).ok_or_else(|| SvgError::UnsupportedUnit {
        attr: name.to_owned(),
        value: raw.to_owned(),
    })
}

fn format_attributes(node: &mut SvgNode) -> Result<(), SvgError> {
    if !KNOWN_TAGS.contains(&node.tag.as_str()) {
        return Ok(());
    }
    for (name, value) in node.attributes.iter_mut() {
        *value = canonical_attr_value(&node.tag, name, value)?;
    }
    for child in &mut node.children {
        format_attributes(child)?;
    }
    Ok(())
}

/// Canonical text of a single attribute value.
pub fn canonical_attr_value(tag: &str, name: &str, value: &str) -> Result<String, SvgError> {
    let invalid = |message: String| SvgError::InvalidAttribute {
        tag: tag.to_owned(),
        attr: name.to_owned(),
        message,
    };
    match name {
        "id" => Ok(value.to_owned()),
        "d" => canonical_path(value).map_err(|e| invalid(e.to_string())),
        "transform" => parse_transform(value)
            .map(|m| m.to_string())
            .map_err(|e| invalid(e.to_string())),
        "points" => {
            let nums = parse_list(value).ok_or_else(|| invalid(format!("malformed point list '{value}'")))?;
            if nums.len() % 2 != 0 {
                return Err(invalid("odd coordinate count".into()));
            }
            Ok(nums
                .chunks(2)
                .map(|p| format!("{},{}", format_number(p[0]), format_number(p[1])))
                .collect::<Vec<_>>()
                .join(" "))
        }
        "values" | "radius" | "stdDeviation" | "viewBox" => {
            Ok(parse_list(value).map_or_else(|| value.to_owned(), |v| format_list(&v)))
        }
        _ if LENGTH_ATTRS.contains(&name) => {
            let v = value.trim();
            let number = v.strip_suffix("px").unwrap_or(v);
            match parse_real(number) {
                Some(x) => Ok(format_number(x)),
                None if v.ends_with(|c: char| c.is_ascii_alphabetic() || c == '%') => {
                    Err(SvgError::UnsupportedUnit {
                        attr: name.to_owned(),
                        value: value.to_owned(),
                    })
                }
                None => Ok(value.to_owned()),
            }
        }
        _ => Ok(parse_real(value).map_or_else(|| value.to_owned(), format_number)),
    }
}

/// Pre-order sequential ids for dynamic nodes that lack one, skipping ids
/// already in use. Non-numeric `id` attributes on dynamic nodes are
/// replaced; static nodes never carry a persistent id.
fn assign_ids(root: &mut SvgNode) {
    fn collect(node: &mut SvgNode, used: &mut HashSet<NodeId>) {
        if is_dynamic_tag(&node.tag) {
            if let Some(id) = node.id {
                used.insert(id);
            }
        } else {
            node.id = None;
        }
        for c in &mut node.children {
            collect(c, used);
        }
    }
    fn assign(node: &mut SvgNode, used: &HashSet<NodeId>, next: &mut u32) {
        if is_dynamic_tag(&node.tag) && node.id.is_none() {
            while used.contains(&NodeId(*next)) {
                *next += 1;
            }
            node.id = Some(NodeId(*next));
            node.attributes.remove("id");
            *next += 1;
        }
        for c in &mut node.children {
            assign(c, used, next);
        }
    }
    let mut used = HashSet::new();
    collect(root, &mut used);
    assign(root, &used, &mut 0);
}
