use super::{PathData, Point, Segment, TransformMatrix};

/// Recursion cap for Bézier subdivision; 2^16 pieces per segment.
const MAX_DEPTH: u32 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl Polyline {
    fn starting_at(p: Point) -> Self {
        Self {
            points: vec![p],
            closed: false,
        }
    }
}

/// Axis-aligned rectangle `[x0, y0, x1, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn from_point(p: Point) -> Self {
        Self {
            x0: p.x,
            y0: p.y,
            x1: p.x,
            y1: p.y,
        }
    }

    fn include(&mut self, p: Point) {
        self.x0 = self.x0.min(p.x);
        self.y0 = self.y0.min(p.y);
        self.x1 = self.x1.max(p.x);
        self.y1 = self.y1.max(p.y);
    }

    pub fn contains(&self, p: Point, slack: f64) -> bool {
        p.x >= self.x0 - slack && p.x <= self.x1 + slack && p.y >= self.y0 - slack && p.y <= self.y1 + slack
    }
}

/// Flattens `path` into polylines whose chords deviate from the true
/// curve by at most `tolerance`.
pub fn flatten(path: &PathData, tolerance: f64) -> Vec<Polyline> {
    flatten_segments(&path.segments(), tolerance)
}

pub fn flatten_segments(segments: &[Segment], tolerance: f64) -> Vec<Polyline> {
    assert!(tolerance > 0.0, "flatten tolerance must be positive");
    let mut out = Vec::new();
    let mut current: Option<Polyline> = None;
    let mut cur = Point::default();
    let mut start = Point::default();

    for seg in segments {
        match *seg {
            Segment::MoveTo(p) => {
                if let Some(done) = current.take() {
                    out.push(done);
                }
                current = Some(Polyline::starting_at(p));
                cur = p;
                start = p;
            }
            Segment::LineTo(p) => {
                current.get_or_insert_with(|| Polyline::starting_at(cur)).points.push(p);
                cur = p;
            }
            Segment::CubicTo(c1, c2, p) => {
                let line = current.get_or_insert_with(|| Polyline::starting_at(cur));
                subdivide(cur, c1, c2, p, tolerance, 0, &mut line.points);
                cur = p;
            }
            Segment::Close => {
                if let Some(mut done) = current.take() {
                    done.closed = true;
                    out.push(done);
                }
                cur = start;
            }
        }
    }
    if let Some(done) = current.take() {
        out.push(done);
    }
    out
}

fn subdivide(p0: Point, p1: Point, p2: Point, p3: Point, tol: f64, depth: u32, out: &mut Vec<Point>) {
    // Every curve point lies in the control hull, so its distance to the
    // chord is bounded by the farthest control point.
    let flat = segment_distance(p1, p0, p3).max(segment_distance(p2, p0, p3));
    if depth >= MAX_DEPTH || flat <= tol {
        out.push(p3);
        return;
    }
    let mid = |a: Point, b: Point| Point::new((a.x + b.x) * 0.5, (a.y + b.y) * 0.5);
    let p01 = mid(p0, p1);
    let p12 = mid(p1, p2);
    let p23 = mid(p2, p3);
    let p012 = mid(p01, p12);
    let p123 = mid(p12, p23);
    let m = mid(p012, p123);
    subdivide(p0, p01, p012, m, tol, depth + 1, out);
    subdivide(m, p123, p23, p3, tol, depth + 1, out);
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Tight bounding box of `path` under `m`, from segment endpoints and the
/// analytic extrema of each cubic. `None` for an empty path.
pub fn bbox(path: &PathData, m: &TransformMatrix) -> Option<Rect> {
    let mut rect: Option<Rect> = None;
    let mut include = |p: Point| match rect.as_mut() {
        Some(r) => r.include(p),
        None => rect = Some(Rect::from_point(p)),
    };
    let mut cur = Point::default();
    let mut start = Point::default();
    for seg in path.transformed_segments(m) {
        match seg {
            Segment::MoveTo(p) => {
                include(p);
                cur = p;
                start = p;
            }
            Segment::LineTo(p) => {
                include(p);
                cur = p;
            }
            Segment::CubicTo(c1, c2, p) => {
                include(p);
                for t in cubic_extrema(cur.x, c1.x, c2.x, p.x)
                    .into_iter()
                    .chain(cubic_extrema(cur.y, c1.y, c2.y, p.y))
                    .flatten()
                {
                    include(eval_cubic(cur, c1, c2, p, t));
                }
                cur = p;
            }
            Segment::Close => cur = start,
        }
    }
    rect
}

/// Parameters in (0, 1) where the 1-D cubic's derivative vanishes.
fn cubic_extrema(p0: f64, p1: f64, p2: f64, p3: f64) -> [Option<f64>; 2] {
    let a = p3 - 3.0 * p2 + 3.0 * p1 - p0;
    let b = 2.0 * (p2 - 2.0 * p1 + p0);
    let c = p1 - p0;
    let inside = |t: f64| (t > 0.0 && t < 1.0).then_some(t);
    if a.abs() < 1e-12 {
        if b.abs() < 1e-12 {
            return [None, None];
        }
        return [inside(-c / b), None];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let sq = disc.sqrt();
    [inside((-b + sq) / (2.0 * a)), inside((-b - sq) / (2.0 * a))]
}

pub(crate) fn eval_cubic(p0: Point, p1: Point, p2: Point, p3: Point, t: f64) -> Point {
    let mt = 1.0 - t;
    let a = mt * mt * mt;
    let b = 3.0 * mt * mt * t;
    let c = 3.0 * mt * t * t;
    let d = t * t * t;
    Point::new(
        a * p0.x + b * p1.x + c * p2.x + d * p3.x,
        a * p0.y + b * p1.y + c * p2.y + d * p3.y,
    )
}
