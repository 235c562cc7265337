use rayon::prelude::*;

use super::{is_diffable, AttrUpdate, AttrValue, CodecError, UpdateSequence, UpdateSet};
use crate::svg::{is_dynamic_tag, FrameSequence, SvgNode};

/// Per-frame attribute differentials of a canonical sequence.
///
/// Only persistent-id nodes may change, and only in diffable attributes;
/// anything else is reported rather than silently dropped, so
/// `apply(extract(f)) == f` always holds on success.
pub fn extract(seq: &FrameSequence) -> Result<UpdateSequence, CodecError> {
    let frames = seq.frames();
    let deltas = (1..frames.len())
        .into_par_iter()
        .map(|t| {
            let mut updates = Vec::new();
            let mut path = Vec::new();
            diff_node(frames[t - 1].root(), frames[t].root(), t, &mut path, &mut updates)?;
            Ok(UpdateSet::new(t, updates))
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    Ok(UpdateSequence {
        initial: seq.initial().clone(),
        deltas,
        fps: seq.fps(),
    })
}

fn show_path(path: &[usize]) -> String {
    let mut s = String::from("/svg");
    for i in path {
        s.push('/');
        s.push_str(&i.to_string());
    }
    s
}

fn diff_node(
    prev: &SvgNode,
    cur: &SvgNode,
    frame: usize,
    path: &mut Vec<usize>,
    out: &mut Vec<AttrUpdate>,
) -> Result<(), CodecError> {
    match cur.id {
        Some(id) => {
            let mut p = prev.attributes.iter().peekable();
            let mut c = cur.attributes.iter().peekable();
            loop {
                let (name, value) = match (p.peek(), c.peek()) {
                    (None, None) => break,
                    (Some((pk, pv)), Some((ck, cv))) if pk == ck => {
                        let change = (pv != cv).then(|| AttrValue::Set((*cv).clone()));
                        let name = (*ck).clone();
                        p.next();
                        c.next();
                        match change {
                            Some(v) => (name, v),
                            None => continue,
                        }
                    }
                    (Some((pk, _)), Some((ck, _))) if pk < ck => {
                        let name = (*pk).clone();
                        p.next();
                        (name, AttrValue::Remove)
                    }
                    (Some((pk, _)), None) => {
                        let name = (*pk).clone();
                        p.next();
                        (name, AttrValue::Remove)
                    }
                    (_, Some((ck, cv))) => {
                        let update = ((*ck).clone(), AttrValue::Set((*cv).clone()));
                        c.next();
                        update
                    }
                };
                if !is_diffable(&name) {
                    return Err(CodecError::UndiffableChange { frame, id, attr: name });
                }
                out.push(AttrUpdate { id, attr: name, value });
            }
        }
        None => {
            if is_dynamic_tag(&cur.tag) {
                return Err(CodecError::NonCanonicalInput {
                    frame,
                    tag: cur.tag.clone(),
                    path: show_path(path),
                });
            }
            if prev.attributes != cur.attributes || prev.text != cur.text {
                return Err(CodecError::StaticNodeChanged {
                    frame,
                    path: show_path(path),
                });
            }
        }
    }
    for (i, (a, b)) in prev.children.iter().zip(&cur.children).enumerate() {
        path.push(i);
        diff_node(a, b, frame, path, out)?;
        path.pop();
    }
    Ok(())
}

/// Reconstructs frames `0..=T` by replaying each update set on the
/// previous frame.
pub fn apply(u: &UpdateSequence) -> Result<FrameSequence, CodecError> {
    let mut current = u.initial.clone();
    let mut frames = Vec::with_capacity(u.deltas.len() + 1);
    frames.push(current.clone());
    for (i, delta) in u.deltas.iter().enumerate() {
        let expected = i + 1;
        if delta.t != expected {
            return Err(CodecError::NegativeFrameGap {
                expected,
                found: delta.t,
            });
        }
        for up in &delta.updates {
            if !is_diffable(&up.attr) {
                return Err(CodecError::UndiffableAttr {
                    frame: delta.t,
                    attr: up.attr.clone(),
                });
            }
            if !current.set_attribute(up.id, &up.attr, up.value.as_set()) {
                return Err(CodecError::UnknownId {
                    frame: delta.t,
                    id: up.id,
                });
            }
        }
        frames.push(current.clone());
    }
    Ok(FrameSequence::with_max_updates(frames, u.fps, usize::MAX)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::{parse_svg, NodeId, SvgDocument};

    fn doc(s: &str) -> SvgDocument {
        parse_svg(s).unwrap()
    }

    fn frame(ty: &str) -> SvgDocument {
        doc(&format!(
            r#"<svg width="500" height="500"><g id="2" transform="matrix(1, 0, 0, 1, 0, {ty})"><path id="3" d="M0,0 l1,1"/></g></svg>"#
        ))
    }

    #[test]
    fn identical_frames_give_empty_deltas() {
        let seq = FrameSequence::new(vec![frame("-9"); 4], 24).unwrap();
        let u = extract(&seq).unwrap();
        assert_eq!(u.deltas.len(), 3);
        assert!(u.deltas.iter().all(UpdateSet::is_empty));
        assert_eq!(u.deltas.iter().map(|d| d.t).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn single_transform_change() {
        let seq = FrameSequence::new(vec![frame("-9"), frame("-8.92")], 24).unwrap();
        let u = extract(&seq).unwrap();
        assert_eq!(
            u.deltas[0].updates,
            vec![AttrUpdate::set(2, "transform", "matrix(1, 0, 0, 1, 0, -8.92)")]
        );
        assert_eq!(apply(&u).unwrap(), seq);
    }

    #[test]
    fn additions_and_removals() {
        let a = doc(r#"<svg><path id="0" d="M0,0" fill="red"/></svg>"#);
        let b = doc(r#"<svg><path id="0" d="M0,0" opacity="0.5"/></svg>"#);
        let seq = FrameSequence::new(vec![a, b], 24).unwrap();
        let u = extract(&seq).unwrap();
        assert_eq!(
            u.deltas[0].updates,
            vec![AttrUpdate::remove(0, "fill"), AttrUpdate::set(0, "opacity", "0.5")]
        );
        assert_eq!(apply(&u).unwrap(), seq);
    }

    #[test]
    fn undiffable_and_static_changes_are_reported() {
        let a = doc(r#"<svg><rect id="0" x="1"/></svg>"#);
        let b = doc(r#"<svg><rect id="0" x="2"/></svg>"#);
        let seq = FrameSequence::new(vec![a, b], 24).unwrap();
        assert!(matches!(extract(&seq), Err(CodecError::UndiffableChange { frame: 1, .. })));

        let a = doc(r#"<svg><title>a</title></svg>"#);
        let b = doc(r#"<svg><title>b</title></svg>"#);
        let seq = FrameSequence::new(vec![a, b], 24).unwrap();
        assert!(matches!(extract(&seq), Err(CodecError::StaticNodeChanged { .. })));
    }

    #[test]
    fn missing_ids_are_non_canonical() {
        let a = doc(r#"<svg><path d="M0,0"/></svg>"#);
        let seq = FrameSequence::new(vec![a.clone(), a], 24).unwrap();
        assert!(matches!(extract(&seq), Err(CodecError::NonCanonicalInput { .. })));
    }

    #[test]
    fn apply_with_empty_deltas() {
        let u = UpdateSequence {
            initial: frame("0"),
            deltas: (1..=3).map(|t| UpdateSet::new(t, vec![])).collect(),
            fps: 24,
        };
        let seq = apply(&u).unwrap();
        assert_eq!(seq.frames().len(), 4);
        assert!(seq.frames().iter().all(|f| *f == frame("0")));
    }

    #[test]
    fn apply_errors() {
        let mut u = UpdateSequence {
            initial: frame("0"),
            deltas: vec![UpdateSet::new(1, vec![AttrUpdate::set(99, "fill", "red")])],
            fps: 24,
        };
        assert_eq!(
            apply(&u),
            Err(CodecError::UnknownId {
                frame: 1,
                id: NodeId(99)
            })
        );
        u.deltas = vec![UpdateSet::new(1, vec![AttrUpdate::set(2, "x", "1")])];
        assert!(matches!(apply(&u), Err(CodecError::UndiffableAttr { .. })));
        u.deltas = vec![UpdateSet::new(2, vec![])];
        assert_eq!(
            apply(&u),
            Err(CodecError::NegativeFrameGap { expected: 1, found: 2 })
        );
    }
}
