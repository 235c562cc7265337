use super::{SvgDocument, SvgNode};

/// Deterministic XML output: two-space indentation, persistent id first,
/// remaining attributes in lexicographic order, LF line endings.
pub fn serialize_svg(doc: &SvgDocument) -> String {
    let mut out = String::with_capacity(4096);
    write_node(doc.root(), 0, &mut out);
    out
}

fn write_node(node: &SvgNode, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push('<');
    out.push_str(&node.tag);
    if let Some(id) = node.id {
        out.push_str(" id=\"");
        out.push_str(&id.to_string());
        out.push('"');
    }
    for (name, value) in &node.attributes {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        escape_attr(value, out);
        out.push('"');
    }
    match (&node.text, node.children.is_empty()) {
        (None, true) => out.push_str("/>\n"),
        (Some(text), true) => {
            out.push('>');
            escape_text(text, out);
            out.push_str("</");
            out.push_str(&node.tag);
            out.push_str(">\n");
        }
        (text, false) => {
            out.push('>');
            if let Some(text) = text {
                escape_text(text, out);
            }
            out.push('\n');
            for child in &node.children {
                write_node(child, depth + 1, out);
            }
            for _ in 0..depth {
                out.push_str("  ");
            }
            out.push_str("</");
            out.push_str(&node.tag);
            out.push_str(">\n");
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}
