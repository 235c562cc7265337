use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{emit_stream, extract, CodecError};
use crate::svg::{serialize_svg, FrameSequence};

/// Deterministic tokenizer used for all token accounting. In priority
/// order a token is: a control tag `<|…|>`; a number with its sign
/// (`-8.92`, `.5`); a run of ASCII letters or underscores; any other
/// single non-whitespace character (commas, colons, brackets, quotes).
/// Whitespace separates tokens and is never counted.
pub const TOKEN_PATTERN: &str = r"<\|[^|\n]*\|>|[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)|[A-Za-z_]+|\S";

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(TOKEN_PATTERN).expect("token pattern compiles"))
}

pub fn tokenize(text: &str) -> Vec<&str> {
    token_regex().find_iter(text).map(|m| m.as_str()).collect()
}

pub fn count_tokens(text: &str) -> usize {
    token_regex().find_iter(text).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    /// Tokens of every frame serialized in full.
    pub naive_tokens: usize,
    /// Tokens of the initial document plus the update stream.
    pub ssu_tokens: usize,
    pub stream_tokens: usize,
    pub ratio: f64,
    /// Share of `ssu_tokens` spent on the update stream.
    pub diff_fraction: f64,
    /// Mean over adjacent frame pairs of the share of attributes that did
    /// not change; 1 for a single frame.
    pub unchanged_attr_fraction: f64,
}

pub fn token_stats(seq: &FrameSequence) -> Result<TokenStats, CodecError> {
    let u = extract(seq)?;
    let naive_tokens: usize = seq.frames().iter().map(|f| count_tokens(&serialize_svg(f))).sum();
    let s0_tokens = count_tokens(&serialize_svg(seq.initial()));
    let stream_tokens = count_tokens(emit_stream(&u).as_str());
    let ssu_tokens = s0_tokens + stream_tokens;

    let unchanged_attr_fraction = if u.deltas.is_empty() {
        1.0
    } else {
        let total: f64 = u
            .deltas
            .iter()
            .enumerate()
            .map(|(i, delta)| {
                let frame = &seq.frames()[i + 1];
                let removals = delta
                    .updates
                    .iter()
                    .filter(|up| up.value == super::AttrValue::Remove)
                    .count();
                let mut attrs = 0;
                frame.root().walk(&mut |_, n| attrs += n.attributes.len());
                let union = attrs + removals;
                if union == 0 {
                    1.0
                } else {
                    (union - delta.updates.len()) as f64 / union as f64
                }
            })
            .sum();
        total / u.deltas.len() as f64
    };

    Ok(TokenStats {
        naive_tokens,
        ssu_tokens,
        stream_tokens,
        ratio: naive_tokens as f64 / ssu_tokens as f64,
        diff_fraction: stream_tokens as f64 / ssu_tokens as f64,
        unchanged_attr_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::parse_svg;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(
            tokenize("<|time=1|>\n  <|ID=2|> transform: matrix(1, 0, 0, 1, 0, -8.92)"),
            vec![
                "<|time=1|>", "<|ID=2|>", "transform", ":", "matrix", "(", "1", ",", "0", ",", "0", ",", "1", ",",
                "0", ",", "-8.92", ")"
            ]
        );
        assert_eq!(tokenize("M-14,20 c-5,-6"), vec!["M", "-14", ",", "20", "c", "-5", ",", "-6"]);
        assert_eq!(
            tokenize(r#"<path fill-opacity="0.5"/>"#),
            vec!["<", "path", "fill", "-", "opacity", "=", "\"", "0.5", "\"", "/", ">"]
        );
    }

    fn frame(ty: &str) -> crate::svg::SvgDocument {
        parse_svg(&format!(
            r#"<svg width="500" height="500"><g id="0" transform="matrix(1, 0, 0, 1, 0, {ty})"><path id="1" d="M0,0 l10,0 l0,10 z" fill="red"/></g></svg>"#
        ))
        .unwrap()
    }

    #[test]
    fn single_frame_ratio_is_one() {
        let seq = FrameSequence::new(vec![frame("0")], 24).unwrap();
        let s = token_stats(&seq).unwrap();
        assert_eq!(s.ratio, 1.0);
        assert_eq!(s.diff_fraction, 0.0);
        assert_eq!(s.unchanged_attr_fraction, 1.0);
    }

    #[test]
    fn identical_frames_amortize_the_header() {
        // 24 identical frames: 23 empty update frames, one token each.
        let seq = FrameSequence::new(vec![frame("0"); 24], 24).unwrap();
        let s = token_stats(&seq).unwrap();
        let f = count_tokens(&serialize_svg(&frame("0")));
        assert_eq!(s.naive_tokens, 24 * f);
        assert_eq!(s.stream_tokens, 23);
        assert_eq!(s.ratio, (24 * f) as f64 / (f + 23) as f64);
        assert!(s.ratio > 1.0 && s.ratio < 24.0);
        assert_eq!(s.diff_fraction, 23.0 / (f + 23) as f64);
        assert_eq!(s.unchanged_attr_fraction, 1.0);
    }

    #[test]
    fn moving_group_counts_its_updates() {
        let seq = FrameSequence::new(vec![frame("0"), frame("1")], 24).unwrap();
        let s = token_stats(&seq).unwrap();
        // `<|time=1|>` + `<|ID=0|> transform: matrix(1, 0, 0, 1, 0, 1)` = 1 + 17.
        assert_eq!(s.stream_tokens, 18);
        // Frame 1 has width, height, transform, d, fill: one of five changed.
        assert!((s.unchanged_attr_fraction - 0.8).abs() < 1e-12);
    }
}
