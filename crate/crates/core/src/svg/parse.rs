use super::{is_dynamic_tag, NodeId, SvgDocument, SvgError, SvgNode};

const XLINK_NS: &str = "http://www.w3.org/1999/xlink";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

/// Parses SVG text into a document. Entity references are resolved and
/// comments and processing instructions are dropped. Numeric `id`s on
/// dynamic-tag elements become persistent ids; every other `id` stays an
/// ordinary attribute.
pub fn parse_svg(text: &str) -> Result<SvgDocument, SvgError> {
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let xml = roxmltree::Document::parse_with_options(text, options).map_err(|e| {
        let pos = e.pos();
        SvgError::XmlSyntax {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = xml.root_element();
    if root.tag_name().name() != "svg" {
        return Err(SvgError::NonSvgRoot(root.tag_name().name().to_owned()));
    }
    let mut node = convert(root);
    for ns in root.namespaces() {
        match ns.name() {
            Some("xml") => {}
            Some(prefix) => {
                node.attributes.insert(format!("xmlns:{prefix}"), ns.uri().to_owned());
            }
            None => {
                node.attributes.insert("xmlns".to_owned(), ns.uri().to_owned());
            }
        }
    }
    SvgDocument::from_root(node)
}

fn convert(el: roxmltree::Node<'_, '_>) -> SvgNode {
    let tag = el.tag_name().name().to_owned();
    let dynamic = is_dynamic_tag(&tag);
    let mut node = SvgNode::new(tag);
    for attr in el.attributes() {
        let name = match attr.namespace() {
            Some(XLINK_NS) => format!("xlink:{}", attr.name()),
            Some(XML_NS) => format!("xml:{}", attr.name()),
            _ => attr.name().to_owned(),
        };
        if name == "id" && dynamic {
            if let Some(id) = NodeId::parse(attr.value()) {
                node.id = Some(id);
                continue;
            }
        }
        node.attributes.insert(name, attr.value().to_owned());
    }
    let mut text = String::new();
    for child in el.children() {
        if child.is_element() {
            node.children.push(convert(child));
        } else if child.is_text() {
            text.push_str(child.text().unwrap_or_default());
        }
    }
    let trimmed = text.trim();
    if !trimmed.is_empty() {
        node.text = Some(trimmed.to_owned());
    }
    node
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::serialize_svg;

    #[test]
    fn minimal_document() {
        let doc = parse_svg(r#"<svg width="10" height="10"><path d="M0 0 L1 1"/></svg>"#).unwrap();
        assert_eq!(doc.root().children.len(), 1);
        assert_eq!(doc.root().children[0].tag, "path");
        assert_eq!(doc.root().children[0].get("d"), Some("M0 0 L1 1"));
    }

    #[test]
    fn duplicate_numeric_ids() {
        let err = parse_svg(r#"<svg><path id="3"/><rect id="3"/></svg>"#).unwrap_err();
        assert_eq!(err, SvgError::DuplicateId("3".into()));
    }

    #[test]
    fn non_svg_root() {
        assert_eq!(parse_svg("<html/>").unwrap_err(), SvgError::NonSvgRoot("html".into()));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_svg("<svg>\n  <path d=\"M0 0\">\n</svg>").unwrap_err() {
            SvgError::XmlSyntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entities_resolved_and_comments_dropped() {
        let doc = parse_svg(
            r#"<svg xmlns="http://www.w3.org/2000/svg"><!-- note --><title>a &amp; b</title><path id="05" fill="&#x23;fff"/></svg>"#,
        )
        .unwrap();
        let root = doc.root();
        assert_eq!(root.get("xmlns"), Some("http://www.w3.org/2000/svg"));
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[0].text.as_deref(), Some("a & b"));
        assert_eq!(root.children[1].id, Some(NodeId(5)));
        assert_eq!(root.children[1].get("fill"), Some("#fff"));
    }

    #[test]
    fn non_numeric_and_static_ids_stay_attributes() {
        let doc = parse_svg(r#"<svg><filter id="f1"/><path id="body"/><title id="7"/></svg>"#).unwrap();
        let root = doc.root();
        assert_eq!(root.children[0].get("id"), Some("f1"));
        assert_eq!(root.children[1].id, None);
        assert_eq!(root.children[1].get("id"), Some("body"));
        assert_eq!(root.children[2].id, None);
        assert_eq!(root.children[2].get("id"), Some("7"));
    }

    #[test]
    fn reparse_of_serialized_tree_is_equal() {
        let src = r##"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="20" height="20">
            <g id="0" transform="translate(1 2)"><path id="1" d="M0 0 L1 1" fill="a&quot;b"/></g>
            <use xlink:href="#x"/><desc>x &lt; y</desc></svg>"##;
        let a = parse_svg(src).unwrap();
        let b = parse_svg(&serialize_svg(&a)).unwrap();
        assert_eq!(a, b);
    }
}
