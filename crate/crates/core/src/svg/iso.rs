use std::fmt;

use super::{SvgDocument, SvgNode};

/// First point where two trees stop being isomorphic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    /// Child-index path from the root.
    pub path: Vec<usize>,
    pub reason: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/svg")?;
        for i in &self.path {
            write!(f, "/{i}")?;
        }
        write!(f, ": {}", self.reason)
    }
}

/// Tag trees, child counts and persistent ids must match node for node;
/// attribute values are free to differ.
pub fn isomorphism_check(a: &SvgDocument, b: &SvgDocument) -> Result<(), Divergence> {
    let mut path = Vec::new();
    compare(a.root(), b.root(), &mut path)
}

fn compare(a: &SvgNode, b: &SvgNode, path: &mut Vec<usize>) -> Result<(), Divergence> {
    let diverge = |path: &Vec<usize>, reason: String| Divergence {
        path: path.clone(),
        reason,
    };
    if a.tag != b.tag {
        return Err(diverge(path, format!("tag <{}> vs <{}>", a.tag, b.tag)));
    }
    if a.id != b.id {
        let show = |id: Option<super::NodeId>| id.map_or_else(|| "none".to_owned(), |i| i.to_string());
        return Err(diverge(path, format!("id {} vs {}", show(a.id), show(b.id))));
    }
    for (i, (ca, cb)) in a.children.iter().zip(&b.children).enumerate() {
        path.push(i);
        compare(ca, cb, path)?;
        path.pop();
    }
    if a.children.len() != b.children.len() {
        let at = a.children.len().min(b.children.len());
        return Err(diverge(
            path,
            format!(
                "child count {} vs {} (first unmatched child index {at})",
                a.children.len(),
                b.children.len()
            ),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::parse_svg;

    fn doc(s: &str) -> SvgDocument {
        parse_svg(s).unwrap()
    }

    #[test]
    fn reflexive() {
        let a = doc(r#"<svg><g id="0"><path id="1" d="M0 0"/></g></svg>"#);
        assert!(isomorphism_check(&a, &a).is_ok());
    }

    #[test]
    fn attribute_changes_are_allowed() {
        let a = doc(r#"<svg><path id="1" d="M0 0"/></svg>"#);
        let b = doc(r#"<svg><path id="1" d="M5 5" fill="red"/></svg>"#);
        assert!(isomorphism_check(&a, &b).is_ok());
    }

    #[test]
    fn extra_child_reports_index() {
        let a = doc(r#"<svg><g id="0"><path id="1"/></g></svg>"#);
        let b = doc(r#"<svg><g id="0"><path id="1"/><path id="2"/></g></svg>"#);
        let d = isomorphism_check(&a, &b).unwrap_err();
        assert_eq!(d.path, vec![0]);
        assert!(d.reason.contains("child index 1"), "{}", d.reason);
        assert_eq!(d.to_string(), "/svg/0: child count 1 vs 2 (first unmatched child index 1)");
    }

    #[test]
    fn id_and_tag_mismatch() {
        let a = doc(r#"<svg><path id="1"/></svg>"#);
        let b = doc(r#"<svg><path id="2"/></svg>"#);
        assert_eq!(isomorphism_check(&a, &b).unwrap_err().path, vec![0]);
        let c = doc(r#"<svg><rect id="1"/></svg>"#);
        assert!(isomorphism_check(&a, &c).unwrap_err().reason.starts_with("tag"));
    }
}
