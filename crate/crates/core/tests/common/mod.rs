//! Random canonical documents and attribute perturbations for property
//! tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use ssu_core::numfmt::format_number;
use ssu_core::ssu::{AttrUpdate, AttrValue, UpdateSet};
use ssu_core::svg::{FrameSequence, NodeId, SvgDocument, SvgNode};

pub const FILLS: &[&str] = &["#e63946", "#2a9d8f", "red", "#264653", "blue", "#fff"];

/// Shape kinds per group; 0 = path, 1 = rect, 2 = circle.
pub fn structure() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..3, 1..4), 1..4)
}

fn num(v: i32) -> String {
    format_number(v as f64 / 4.0)
}

pub fn path_d(seed: i32) -> String {
    let a = seed.rem_euclid(200);
    format!(
        "M{},{} c{},{} {},{} {},{} l{},{} z",
        num(a),
        num(a / 2 + 3),
        num(seed % 17),
        num(-5),
        num(seed % 9 + 8),
        num(11),
        num(20),
        num(seed % 13),
        num(-7),
        num(seed % 5 + 15)
    )
}

pub fn matrix(tx: i32, ty: i32) -> String {
    format!("matrix(1, 0, 0, 1, {}, {})", num(tx), num(ty))
}

/// A canonical 500×500 document with the given structure.
pub fn build_doc(groups: &[Vec<u8>]) -> SvgDocument {
    let mut id = 0u32;
    let mut next = || {
        id += 1;
        id - 1
    };
    let mut root = SvgNode::new("svg").attr("width", "500").attr("height", "500");
    for (gi, kinds) in groups.iter().enumerate() {
        let mut g = SvgNode::new("g")
            .with_id(next())
            .attr("transform", matrix(100 * gi as i32, 40));
        for (si, kind) in kinds.iter().enumerate() {
            let seed = (gi * 7 + si * 3) as i32;
            let node = match kind {
                0 => SvgNode::new("path").attr("d", path_d(seed)),
                1 => SvgNode::new("rect")
                    .attr("width", num(40 + seed))
                    .attr("height", num(30 + seed)),
                _ => SvgNode::new("circle").attr("r", num(20 + seed)).attr("cx", num(seed)),
            };
            g = g.child(
                node.with_id(next())
                    .attr("fill", FILLS[(gi + si) % FILLS.len()]),
            );
        }
        root = root.child(g);
    }
    root = root.child(SvgNode::new("title").attr("lang", "en"));
    SvgDocument::from_root(root).unwrap()
}

/// `(node selector, operation, value)`.
pub type Op = (usize, u8, i32);

pub fn frame_ops(max_frames: usize) -> impl Strategy<Value = Vec<Vec<Op>>> {
    prop::collection::vec(prop::collection::vec((0usize..64, 0u8..6, -400i32..400), 0..5), 0..max_frames)
}

pub fn apply_op(doc: &mut SvgDocument, (sel, op, v): Op) {
    let nodes: Vec<(NodeId, String)> = doc.ids().map(|id| (id, doc.node(id).unwrap().tag.clone())).collect();
    let (id, tag) = &nodes[sel % nodes.len()];
    let (name, value) = match op {
        0 => ("transform", Some(matrix(v, -v / 2))),
        1 => ("fill", Some(FILLS[v.rem_euclid(FILLS.len() as i32) as usize].to_owned())),
        2 => ("opacity", Some(format_number(v.rem_euclid(101) as f64 / 100.0))),
        3 => ("opacity", None),
        4 if tag == "path" => ("d", Some(path_d(v))),
        4 => ("fill-opacity", Some(format_number(v.rem_euclid(11) as f64 / 10.0))),
        _ => ("transform", None),
    };
    doc.set_attribute(*id, name, value.as_deref());
}

/// Frames 0..=T: frame t is frame t−1 with the t-th op list applied.
pub fn build_sequence(groups: &[Vec<u8>], ops: &[Vec<Op>]) -> FrameSequence {
    let mut cur = build_doc(groups);
    let mut frames = vec![cur.clone()];
    for frame in ops {
        for op in frame {
            apply_op(&mut cur, *op);
        }
        frames.push(cur.clone());
    }
    FrameSequence::with_max_updates(frames, 24, usize::MAX).unwrap()
}

/// Brute-force differential: every attribute of every persistent node
/// compared across adjacent frames.
pub fn naive_diff(seq: &FrameSequence) -> Vec<UpdateSet> {
    let frames = seq.frames();
    (1..frames.len())
        .map(|t| {
            let (a, b) = (&frames[t - 1], &frames[t]);
            let mut updates = Vec::new();
            for id in a.ids() {
                let (na, nb) = (a.node(id).unwrap(), b.node(id).unwrap());
                let keys: BTreeSet<&String> = na.attributes.keys().chain(nb.attributes.keys()).collect();
                for k in keys {
                    match (na.attributes.get(k), nb.attributes.get(k)) {
                        (x, y) if x == y => {}
                        (_, Some(v)) => updates.push(AttrUpdate {
                            id,
                            attr: k.clone(),
                            value: AttrValue::Set(v.clone()),
                        }),
                        (_, None) => updates.push(AttrUpdate {
                            id,
                            attr: k.clone(),
                            value: AttrValue::Remove,
                        }),
                    }
                }
            }
            updates.sort_by(|x, y| (x.id, &x.attr).cmp(&(y.id, &y.attr)));
            UpdateSet { t, updates }
        })
        .collect()
}
