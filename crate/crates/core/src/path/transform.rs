use std::fmt;

use super::{Point, TransformError};
use crate::numfmt::format_number;

/// 2×3 affine matrix in SVG `matrix(a, b, c, d, e, f)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Default for TransformMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TransformMatrix {
    pub const IDENTITY: Self = Self::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        Self { a, b, c, d, e, f }
    }

    pub const fn translate(tx: f64, ty: f64) -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0, tx, ty)
    }

    pub const fn scale(sx: f64, sy: f64) -> Self {
        Self::new(sx, 0.0, 0.0, sy, 0.0, 0.0)
    }

    pub fn rotate(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Self::new(c, s, -s, c, 0.0, 0.0)
    }

    /// `self · other`: `other` is applied to points first.
    pub fn then_after(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a + self.c * other.b,
            b: self.b * other.a + self.d * other.b,
            c: self.a * other.c + self.c * other.d,
            d: self.b * other.c + self.d * other.d,
            e: self.a * other.e + self.c * other.f + self.e,
            f: self.b * other.e + self.d * other.f + self.f,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a * p.x + self.c * p.y + self.e,
            self.b * p.x + self.d * p.y + self.f,
        )
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d, self.e, self.f]
            .iter()
            .all(|v| v.is_finite())
    }
}

impl fmt::Display for TransformMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "matrix({}, {}, {}, {}, {}, {})",
            format_number(self.a),
            format_number(self.b),
            format_number(self.c),
            format_number(self.d),
            format_number(self.e),
            format_number(self.f)
        )
    }
}

/// Parses an SVG transform list, composing left to right.
pub fn parse_transform(text: &str) -> Result<TransformMatrix, TransformError> {
    let mut rest = text.trim_start();
    let mut out = TransformMatrix::IDENTITY;
    let err = |rest: &str, message: &str| TransformError {
        offset: text.len() - rest.len(),
        message: message.to_owned(),
    };
    if rest.is_empty() {
        return Err(err(rest, "empty transform"));
    }
    while !rest.is_empty() {
        let name_len = rest
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(rest.len());
        if name_len == 0 {
            return Err(err(rest, "expected transform function name"));
        }
        let name = &rest[..name_len];
        let after = rest[name_len..].trim_start();
        let Some(body_start) = after.strip_prefix('(') else {
            return Err(err(after, "expected '('"));
        };
        let Some(close) = body_start.find(')') else {
            return Err(err(body_start, "unterminated argument list"));
        };
        let body = &body_start[..close];
        let args = parse_args(body).ok_or_else(|| err(body_start, "malformed numeric argument"))?;
        let m = match (name, args.as_slice()) {
            ("matrix", &[a, b, c, d, e, f]) => TransformMatrix::new(a, b, c, d, e, f),
            ("translate", &[tx]) => TransformMatrix::translate(tx, 0.0),
            ("translate", &[tx, ty]) => TransformMatrix::translate(tx, ty),
            ("scale", &[s]) => TransformMatrix::scale(s, s),
            ("scale", &[sx, sy]) => TransformMatrix::scale(sx, sy),
            ("rotate", &[deg]) => TransformMatrix::rotate(deg),
            ("rotate", &[deg, cx, cy]) => TransformMatrix::translate(cx, cy)
                .then_after(&TransformMatrix::rotate(deg))
                .then_after(&TransformMatrix::translate(-cx, -cy)),
            ("skewX", &[deg]) => TransformMatrix::new(1.0, 0.0, deg.to_radians().tan(), 1.0, 0.0, 0.0),
            ("skewY", &[deg]) => TransformMatrix::new(1.0, deg.to_radians().tan(), 0.0, 1.0, 0.0, 0.0),
            ("matrix" | "translate" | "scale" | "rotate" | "skewX" | "skewY", _) => {
                return Err(err(rest, &format!("wrong argument count for {name}")))
            }
            _ => return Err(err(rest, &format!("unknown transform function '{name}'"))),
        };
        if !m.is_finite() {
            return Err(err(rest, "non-finite transform"));
        }
        out = out.then_after(&m);
        rest = body_start[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
            if rest.is_empty() {
                return Err(err(rest, "trailing comma"));
            }
        }
    }
    Ok(out)
}

fn parse_args(body: &str) -> Option<Vec<f64>> {
    if body.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    for piece in body.split(',') {
        let before = out.len();
        for token in piece.split_ascii_whitespace() {
            out.push(crate::numfmt::parse_real(token)?);
        }
        if out.len() == before {
            return None;
        }
    }
    Some(out)
}
