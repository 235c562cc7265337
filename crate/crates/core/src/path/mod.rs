//! SVG path data and transform grammars plus the geometry the rasterizer
//! needs: absolute segment expansion, flattening and bounding boxes.

mod geometry;
mod parser;
mod transform;

use std::fmt;

use thiserror::Error;

use crate::numfmt::format_number;

pub use geometry::{bbox, flatten, flatten_segments, Polyline, Rect};
pub use parser::parse_path;
pub use transform::{parse_transform, TransformMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("path syntax error at byte {offset}: {message}")]
pub struct PathError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transform syntax error at byte {offset}: {message}")]
pub struct TransformError {
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Path command kinds. Elliptical arcs never appear here: the parser
/// replaces them with cubic segments of at most 90° each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verb {
    MoveTo,
    LineTo,
    HorizontalTo,
    VerticalTo,
    CurveTo,
    SmoothCurveTo,
    QuadTo,
    SmoothQuadTo,
    ClosePath,
}

impl Verb {
    pub fn arity(self) -> usize {
        match self {
            Verb::MoveTo | Verb::LineTo | Verb::SmoothQuadTo => 2,
            Verb::HorizontalTo | Verb::VerticalTo => 1,
            Verb::CurveTo => 6,
            Verb::SmoothCurveTo | Verb::QuadTo => 4,
            Verb::ClosePath => 0,
        }
    }

    fn letter(self) -> char {
        match self {
            Verb::MoveTo => 'M',
            Verb::LineTo => 'L',
            Verb::HorizontalTo => 'H',
            Verb::VerticalTo => 'V',
            Verb::CurveTo => 'C',
            Verb::SmoothCurveTo => 'S',
            Verb::QuadTo => 'Q',
            Verb::SmoothQuadTo => 'T',
            Verb::ClosePath => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathCommand {
    pub verb: Verb,
    pub relative: bool,
    params: [f64; 6],
}

impl PathCommand {
    /// Panics if `args` does not match the verb's arity.
    pub fn new(verb: Verb, relative: bool, args: &[f64]) -> Self {
        assert_eq!(args.len(), verb.arity(), "arity mismatch for {verb:?}");
        let mut params = [0.0; 6];
        params[..args.len()].copy_from_slice(args);
        Self {
            verb,
            relative,
            params,
        }
    }

    pub fn args(&self) -> &[f64] {
        &self.params[..self.verb.arity()]
    }

    fn point(&self, i: usize) -> Point {
        Point::new(self.params[2 * i], self.params[2 * i + 1])
    }

    /// Current point after this command, given the current point and
    /// subpath start before it.
    fn end_point(&self, cur: Point, start: Point) -> Point {
        let base = if self.relative { cur } else { Point::default() };
        match self.verb {
            Verb::ClosePath => start,
            Verb::HorizontalTo => {
                let x = if self.relative { cur.x + self.params[0] } else { self.params[0] };
                Point::new(x, cur.y)
            }
            Verb::VerticalTo => {
                let y = if self.relative { cur.y + self.params[0] } else { self.params[0] };
                Point::new(cur.x, y)
            }
            verb => base.add(self.point(verb.arity() / 2 - 1)),
        }
    }
}

/// Parsed `d` attribute.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathData {
    pub commands: Vec<PathCommand>,
}

/// Absolute drawing primitive with quadratics raised to cubics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    MoveTo(Point),
    LineTo(Point),
    CubicTo(Point, Point, Point),
    Close,
}

impl PathData {
    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// Rewrites every command after the initial moveto in relative form.
    /// Commands that are already relative are copied verbatim.
    pub fn to_relative(&self) -> PathData {
        let mut out = Vec::with_capacity(self.commands.len());
        let mut cur = Point::default();
        let mut start = Point::default();
        for (i, cmd) in self.commands.iter().enumerate() {
            let next = cmd.end_point(cur, start);
            if i == 0 || cmd.relative {
                out.push(*cmd);
            } else {
                let rel: Vec<f64> = match cmd.verb {
                    Verb::ClosePath => Vec::new(),
                    Verb::HorizontalTo => vec![cmd.params[0] - cur.x],
                    Verb::VerticalTo => vec![cmd.params[0] - cur.y],
                    verb => (0..verb.arity() / 2)
                        .flat_map(|k| {
                            let p = cmd.point(k).sub(cur);
                            [p.x, p.y]
                        })
                        .collect(),
                };
                out.push(PathCommand::new(cmd.verb, true, &rel));
            }
            if cmd.verb == Verb::MoveTo {
                start = next;
            }
            cur = next;
        }
        PathData { commands: out }
    }

    /// Expands the command list into absolute segments.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.commands.len());
        let mut cur = Point::default();
        let mut start = Point::default();
        // Reflection sources for S/T.
        let mut last_cubic_ctrl: Option<Point> = None;
        let mut last_quad_ctrl: Option<Point> = None;
        for cmd in &self.commands {
            let base = if cmd.relative { cur } else { Point::default() };
            let next = cmd.end_point(cur, start);
            let mut cubic_ctrl = None;
            let mut quad_ctrl = None;
            match cmd.verb {
                Verb::MoveTo => {
                    out.push(Segment::MoveTo(next));
                    start = next;
                }
                Verb::LineTo | Verb::HorizontalTo | Verb::VerticalTo => {
                    out.push(Segment::LineTo(next));
                }
                Verb::CurveTo => {
                    let c1 = base.add(cmd.point(0));
                    let c2 = base.add(cmd.point(1));
                    out.push(Segment::CubicTo(c1, c2, next));
                    cubic_ctrl = Some(c2);
                }
                Verb::SmoothCurveTo => {
                    let c1 = reflect(last_cubic_ctrl, cur);
                    let c2 = base.add(cmd.point(0));
                    out.push(Segment::CubicTo(c1, c2, next));
                    cubic_ctrl = Some(c2);
                }
                Verb::QuadTo => {
                    let q = base.add(cmd.point(0));
                    out.push(quad_to_cubic(cur, q, next));
                    quad_ctrl = Some(q);
                }
                Verb::SmoothQuadTo => {
                    let q = reflect(last_quad_ctrl, cur);
                    out.push(quad_to_cubic(cur, q, next));
                    quad_ctrl = Some(q);
                }
                Verb::ClosePath => out.push(Segment::Close),
            }
            last_cubic_ctrl = cubic_ctrl;
            last_quad_ctrl = quad_ctrl;
            cur = next;
        }
        out
    }

    /// Segments with `m` applied to every point. Affine maps carry Béziers
    /// to Béziers, so this is exact.
    pub fn transformed_segments(&self, m: &TransformMatrix) -> Vec<Segment> {
        self.segments()
            .into_iter()
            .map(|s| match s {
                Segment::MoveTo(p) => Segment::MoveTo(m.apply(p)),
                Segment::LineTo(p) => Segment::LineTo(m.apply(p)),
                Segment::CubicTo(a, b, c) => Segment::CubicTo(m.apply(a), m.apply(b), m.apply(c)),
                Segment::Close => Segment::Close,
            })
            .collect()
    }
}

fn reflect(ctrl: Option<Point>, about: Point) -> Point {
    match ctrl {
        Some(c) => Point::new(2.0 * about.x - c.x, 2.0 * about.y - c.y),
        None => about,
    }
}

fn quad_to_cubic(p0: Point, q: Point, p1: Point) -> Segment {
    let c1 = Point::new(p0.x + 2.0 / 3.0 * (q.x - p0.x), p0.y + 2.0 / 3.0 * (q.y - p0.y));
    let c2 = Point::new(p1.x + 2.0 / 3.0 * (q.x - p1.x), p1.y + 2.0 / 3.0 * (q.y - p1.y));
    Segment::CubicTo(c1, c2, p1)
}

/// Canonical serialization: one letter per command, `x,y` pairs separated
/// by single spaces (`M-14,20 c-5,-6 -5,-15 1,2`).
impl fmt::Display for PathData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, cmd) in self.commands.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let letter = cmd.verb.letter();
            if cmd.relative {
                write!(f, "{}", letter.to_ascii_lowercase())?;
            } else {
                write!(f, "{letter}")?;
            }
            let args = cmd.args();
            if args.len() == 1 {
                f.write_str(&format_number(args[0]))?;
            } else {
                for (k, pair) in args.chunks(2).enumerate() {
                    if k > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{},{}", format_number(pair[0]), format_number(pair[1]))?;
                }
            }
        }
        Ok(())
    }
}

/// Parse, relativize and re-emit a `d` value in canonical form.
pub fn canonical_path(d: &str) -> Result<String, PathError> {
    Ok(parse_path(d)?.to_relative().to_string())
}
