//! Paint values: `#rgb`, `#rrggbb`, `rgb(r, g, b)` (integers or
//! percentages), a fixed table of named colors, `none`, and `url(#ref)`
//! references. References parse but cannot be painted by the rasterizer.

use thiserror::Error;

/// Straight-alpha 8-bit color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const BLACK: Rgba = Rgba::opaque(0, 0, 0);
    pub const WHITE: Rgba = Rgba::opaque(255, 255, 255);
    pub const TRANSPARENT: Rgba = Rgba { r: 0, g: 0, b: 0, a: 0 };

    pub const fn opaque(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b, a: 255 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Paint {
    None,
    Color(Rgba),
    /// `url(#id)`; the text between the parentheses.
    Reference(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid color '{0}'")]
pub struct ColorError(pub String);

const NAMED: &[(&str, Rgba)] = &[
    ("black", Rgba::opaque(0, 0, 0)),
    ("silver", Rgba::opaque(192, 192, 192)),
    ("gray", Rgba::opaque(128, 128, 128)),
    ("grey", Rgba::opaque(128, 128, 128)),
    ("white", Rgba::opaque(255, 255, 255)),
    ("maroon", Rgba::opaque(128, 0, 0)),
    ("red", Rgba::opaque(255, 0, 0)),
    ("purple", Rgba::opaque(128, 0, 128)),
    ("fuchsia", Rgba::opaque(255, 0, 255)),
    ("magenta", Rgba::opaque(255, 0, 255)),
    ("green", Rgba::opaque(0, 128, 0)),
    ("lime", Rgba::opaque(0, 255, 0)),
    ("olive", Rgba::opaque(128, 128, 0)),
    ("yellow", Rgba::opaque(255, 255, 0)),
    ("navy", Rgba::opaque(0, 0, 128)),
    ("blue", Rgba::opaque(0, 0, 255)),
    ("teal", Rgba::opaque(0, 128, 128)),
    ("aqua", Rgba::opaque(0, 255, 255)),
    ("cyan", Rgba::opaque(0, 255, 255)),
    ("orange", Rgba::opaque(255, 165, 0)),
    ("transparent", Rgba::TRANSPARENT),
];

pub fn parse_paint(text: &str) -> Result<Paint, ColorError> {
    let s = text.trim();
    let err = || ColorError(text.to_owned());
    if s.eq_ignore_ascii_case("none") {
        return Ok(Paint::None);
    }
    if let Some(inner) = s.strip_prefix("url(").and_then(|r| r.strip_suffix(')')) {
        let inner = inner.trim();
        return if inner.is_empty() { Err(err()) } else { Ok(Paint::Reference(inner.to_owned())) };
    }
    parse_color(s).map(Paint::Color)
}

pub fn parse_color(text: &str) -> Result<Rgba, ColorError> {
    let s = text.trim();
    let err = || ColorError(text.to_owned());
    if let Some(hex) = s.strip_prefix('#') {
        if !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err());
        }
        let digit = |i: usize| u8::from_str_radix(&hex[i..i + 1], 16).unwrap();
        return match hex.len() {
            3 => Ok(Rgba::opaque(digit(0) * 17, digit(1) * 17, digit(2) * 17)),
            6 => {
                let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
                Ok(Rgba::opaque(byte(0), byte(2), byte(4)))
            }
            _ => Err(err()),
        };
    }
    if let Some(body) = s
        .get(..4)
        .filter(|p| p.eq_ignore_ascii_case("rgb("))
        .and_then(|_| s[4..].strip_suffix(')'))
    {
        let parts: Vec<&str> = body.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(err());
        }
        let mut c = [0u8; 3];
        for (slot, part) in c.iter_mut().zip(&parts) {
            let v = match part.strip_suffix('%') {
                Some(p) => crate::numfmt::parse_real(p).ok_or_else(err)? * 255.0 / 100.0,
                None => crate::numfmt::parse_real(part).ok_or_else(err)?,
            };
            *slot = v.round().clamp(0.0, 255.0) as u8;
        }
        return Ok(Rgba::opaque(c[0], c[1], c[2]));
    }
    NAMED
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(s))
        .map(|(_, c)| *c)
        .ok_or_else(err)
}
