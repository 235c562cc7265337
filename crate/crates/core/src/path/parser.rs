use std::f64::consts::{FRAC_PI_2, PI};

use super::{PathCommand, PathData, PathError, Point, Verb};

/// Parses SVG path data. Implicit command repetition is expanded into
/// explicit commands and arcs are replaced by cubic approximations.
pub fn parse_path(d: &str) -> Result<PathData, PathError> {
    let mut lexer = Lexer { src: d.as_bytes(), pos: 0 };
    let mut commands = Vec::new();
    let mut cur = Point::default();
    let mut start = Point::default();

    loop {
        lexer.skip_wsp();
        let Some(letter) = lexer.peek() else { break };
        let cmd_offset = lexer.pos;
        lexer.pos += 1;
        let relative = letter.is_ascii_lowercase();
        let upper = letter.to_ascii_uppercase();
        if commands.is_empty() && upper != b'M' {
            return Err(lexer.error_at(cmd_offset, "path must begin with a moveto"));
        }
        let verb = match upper {
            b'M' => Verb::MoveTo,
            b'L' => Verb::LineTo,
            b'H' => Verb::HorizontalTo,
            b'V' => Verb::VerticalTo,
            b'C' => Verb::CurveTo,
            b'S' => Verb::SmoothCurveTo,
            b'Q' => Verb::QuadTo,
            b'T' => Verb::SmoothQuadTo,
            b'Z' => Verb::ClosePath,
            b'A' => {
                let mut first = true;
                loop {
                    let arc = lexer.arc_args(first)?;
                    let Some(arc) = arc else { break };
                    first = false;
                    let end = if relative { cur.add(arc.end) } else { arc.end };
                    for seg in arc_to_cubics(cur, arc.rx, arc.ry, arc.x_axis_rotation, arc.large_arc, arc.sweep, end)
                    {
                        commands.push(match seg {
                            ArcPiece::Line(p) => {
                                let p = if relative { p.sub(cur) } else { p };
                                let c = PathCommand::new(Verb::LineTo, relative, &[p.x, p.y]);
                                cur = c.end_point(cur, start);
                                c
                            }
                            ArcPiece::Cubic(c1, c2, p) => {
                                let base = if relative { cur } else { Point::default() };
                                let (c1, c2, p) = (c1.sub(base), c2.sub(base), p.sub(base));
                                let c = PathCommand::new(
                                    Verb::CurveTo,
                                    relative,
                                    &[c1.x, c1.y, c2.x, c2.y, p.x, p.y],
                                );
                                cur = c.end_point(cur, start);
                                c
                            }
                        });
                    }
                    cur = end;
                }
                continue;
            }
            _ => {
                return Err(lexer.error_at(
                    cmd_offset,
                    &format!("unexpected character '{}'", char::from(letter)),
                ))
            }
        };

        if verb == Verb::ClosePath {
            let cmd = PathCommand::new(verb, relative, &[]);
            cur = cmd.end_point(cur, start);
            commands.push(cmd);
            continue;
        }

        let mut current_verb = verb;
        let mut first = true;
        loop {
            let mut args = [0.0; 6];
            let arity = current_verb.arity();
            if !first {
                lexer.skip_comma_wsp();
                if !lexer.at_number_start() {
                    break;
                }
            }
            for (k, slot) in args.iter_mut().take(arity).enumerate() {
                if k > 0 || !first {
                    lexer.skip_comma_wsp();
                } else {
                    lexer.skip_wsp();
                }
                *slot = lexer.number()?;
            }
            let cmd = PathCommand::new(current_verb, relative, &args[..arity]);
            let next = cmd.end_point(cur, start);
            if current_verb == Verb::MoveTo {
                start = next;
                // Extra coordinate pairs after a moveto are implicit linetos.
                current_verb = Verb::LineTo;
            }
            cur = next;
            commands.push(cmd);
            first = false;
        }
    }
    Ok(PathData { commands })
}

struct ArcArgs {
    rx: f64,
    ry: f64,
    x_axis_rotation: f64,
    large_arc: bool,
    sweep: bool,
    end: Point,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Lexer<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn error_at(&self, offset: usize, message: &str) -> PathError {
        PathError {
            offset,
            message: message.to_owned(),
        }
    }

    fn skip_wsp(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')) {
            self.pos += 1;
        }
    }

    fn skip_comma_wsp(&mut self) {
        self.skip_wsp();
        if self.peek() == Some(b',') {
            self.pos += 1;
            self.skip_wsp();
        }
    }

    fn at_number_start(&self) -> bool {
        matches!(self.peek(), Some(b'0'..=b'9' | b'-' | b'+' | b'.'))
    }

    fn number(&mut self) -> Result<f64, PathError> {
        let begin = self.pos;
        let s = self.src;
        let mut i = self.pos;
        if matches!(s.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let int_start = i;
        while matches!(s.get(i), Some(b'0'..=b'9')) {
            i += 1;
        }
        let mut digits = i - int_start;
        if s.get(i) == Some(&b'.') {
            i += 1;
            let frac_start = i;
            while matches!(s.get(i), Some(b'0'..=b'9')) {
                i += 1;
            }
            digits += i - frac_start;
        }
        if digits == 0 {
            return Err(self.error_at(begin, "expected number"));
        }
        if matches!(s.get(i), Some(b'e' | b'E')) {
            let mut j = i + 1;
            if matches!(s.get(j), Some(b'+' | b'-')) {
                j += 1;
            }
            let exp_start = j;
            while matches!(s.get(j), Some(b'0'..=b'9')) {
                j += 1;
            }
            if j > exp_start {
                i = j;
            }
        }
        // The slice is ASCII by construction.
        let text = std::str::from_utf8(&s[begin..i]).expect("ascii number");
        let value: f64 = text
            .parse()
            .map_err(|_| self.error_at(begin, "malformed number"))?;
        if !value.is_finite() {
            return Err(self.error_at(begin, "non-finite number"));
        }
        self.pos = i;
        Ok(value)
    }

    fn flag(&mut self) -> Result<bool, PathError> {
        match self.peek() {
            Some(b'0') => {
                self.pos += 1;
                Ok(false)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(true)
            }
            _ => Err(self.error_at(self.pos, "expected arc flag")),
        }
    }

    /// Reads one arc argument group; `None` when the repetition ends.
    fn arc_args(&mut self, first: bool) -> Result<Option<ArcArgs>, PathError> {
        if first {
            self.skip_wsp();
        } else {
            self.skip_comma_wsp();
            if !self.at_number_start() {
                return Ok(None);
            }
        }
        let rx = self.number()?;
        self.skip_comma_wsp();
        let ry = self.number()?;
        self.skip_comma_wsp();
        let x_axis_rotation = self.number()?;
        self.skip_comma_wsp();
        let large_arc = self.flag()?;
        self.skip_comma_wsp();
        let sweep = self.flag()?;
        self.skip_comma_wsp();
        let x = self.number()?;
        self.skip_comma_wsp();
        let y = self.number()?;
        Ok(Some(ArcArgs {
            rx,
            ry,
            x_axis_rotation,
            large_arc,
            sweep,
            end: Point::new(x, y),
        }))
    }
}

enum ArcPiece {
    Line(Point),
    Cubic(Point, Point, Point),
}

/// Endpoint-parameterized arc to cubics, each spanning at most 90°.
fn arc_to_cubics(
    p0: Point,
    rx: f64,
    ry: f64,
    x_axis_rotation: f64,
    large_arc: bool,
    sweep: bool,
    p1: Point,
) -> Vec<ArcPiece> {
    if p0 == p1 {
        return Vec::new();
    }
    let (mut rx, mut ry) = (rx.abs(), ry.abs());
    if rx == 0.0 || ry == 0.0 {
        return vec![ArcPiece::Line(p1)];
    }
    let (sin_phi, cos_phi) = x_axis_rotation.to_radians().sin_cos();
    let dx2 = (p0.x - p1.x) / 2.0;
    let dy2 = (p0.y - p1.y) / 2.0;
    let x1p = cos_phi * dx2 + sin_phi * dy2;
    let y1p = -sin_phi * dx2 + cos_phi * dy2;

    let lambda = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry);
    if lambda > 1.0 {
        let s = lambda.sqrt();
        rx *= s;
        ry *= s;
    }
    let num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p;
    let den = rx * rx * y1p * y1p + ry * ry * x1p * x1p;
    let mut coef = (num / den).max(0.0).sqrt();
    if large_arc == sweep {
        coef = -coef;
    }
    let cxp = coef * rx * y1p / ry;
    let cyp = -coef * ry * x1p / rx;
    let cx = cos_phi * cxp - sin_phi * cyp + (p0.x + p1.x) / 2.0;
    let cy = sin_phi * cxp + cos_phi * cyp + (p0.y + p1.y) / 2.0;

    let angle = |ux: f64, uy: f64, vx: f64, vy: f64| (ux * vy - uy * vx).atan2(ux * vx + uy * vy);
    let theta1 = angle(1.0, 0.0, (x1p - cxp) / rx, (y1p - cyp) / ry);
    let mut dtheta = angle(
        (x1p - cxp) / rx,
        (y1p - cyp) / ry,
        (-x1p - cxp) / rx,
        (-y1p - cyp) / ry,
    );
    if !sweep && dtheta > 0.0 {
        dtheta -= 2.0 * PI;
    } else if sweep && dtheta < 0.0 {
        dtheta += 2.0 * PI;
    }

    let n = ((dtheta.abs() / FRAC_PI_2) - 1e-9).ceil().max(1.0) as usize;
    let delta = dtheta / n as f64;
    let t = 4.0 / 3.0 * (delta / 4.0).tan();
    let map = |x: f64, y: f64| {
        Point::new(
            cx + rx * cos_phi * x - ry * sin_phi * y,
            cy + rx * sin_phi * x + ry * cos_phi * y,
        )
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a1 = theta1 + i as f64 * delta;
        let a2 = a1 + delta;
        let (s1, c1) = a1.sin_cos();
        let (s2, c2) = a2.sin_cos();
        let ctrl1 = map(c1 - t * s1, s1 + t * c1);
        let ctrl2 = map(c2 + t * s2, s2 - t * c2);
        let end = if i + 1 == n { p1 } else { map(c2, s2) };
        out.push(ArcPiece::Cubic(ctrl1, ctrl2, end));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_moveto() {
        let p = parse_path("M0 0").unwrap();
        assert_eq!(p.commands, vec![PathCommand::new(Verb::MoveTo, false, &[0.0, 0.0])]);
    }

    #[test]
    fn figure_value_parses_with_cubic_arity() {
        let p = parse_path("M-14,20 c-5,-6 -5,-15 -1,-22").unwrap();
        assert_eq!(p.commands.len(), 2);
        assert_eq!(p.commands[1].verb, Verb::CurveTo);
        assert!(p.commands[1].relative);
        assert_eq!(p.commands[1].args(), &[-5.0, -6.0, -5.0, -15.0, -1.0, -22.0]);
    }

    #[test]
    fn truncated_quad_reports_offset() {
        let err = parse_path("M0 0 Q1").unwrap_err();
        assert_eq!(err.offset, 7);
    }

    #[test]
    fn implicit_repeats_expand() {
        let p = parse_path("M0 0 10 10 20 0 l1 1 2 2").unwrap();
        let verbs: Vec<_> = p.commands.iter().map(|c| (c.verb, c.relative)).collect();
        assert_eq!(
            verbs,
            vec![
                (Verb::MoveTo, false),
                (Verb::LineTo, false),
                (Verb::LineTo, false),
                (Verb::LineTo, true),
                (Verb::LineTo, true),
            ]
        );
    }

    #[test]
    fn compact_number_forms() {
        let p = parse_path("M.5-.5L1e1,2.5.5").unwrap_err();
        // "2.5.5" is "2.5" then ".5", leaving an L with a dangling coordinate.
        assert!(p.message.contains("number"));
        let p = parse_path("M.5-.5L1e1,2.5").unwrap();
        assert_eq!(p.commands[0].args(), &[0.5, -0.5]);
        assert_eq!(p.commands[1].args(), &[10.0, 2.5]);
    }

    #[test]
    fn must_start_with_moveto() {
        assert_eq!(parse_path("L1 1").unwrap_err().offset, 0);
        assert!(parse_path("").unwrap().is_empty());
        assert!(parse_path("M0 0 X").is_err());
    }

    #[test]
    fn arcs_become_quarter_cubics() {
        let p = parse_path("M0 0 A10 10 0 0 1 20 0").unwrap();
        // Half circle: two quarter segments.
        assert_eq!(p.commands.len(), 3);
        assert!(p.commands[1..].iter().all(|c| c.verb == Verb::CurveTo));
        let last = p.commands[2].args();
        assert_eq!((last[4], last[5]), (20.0, 0.0));
        let rel = parse_path("M0 0 a10 10 0 0 1 20 0").unwrap();
        let segs_abs = p.segments();
        let segs_rel = rel.segments();
        for (a, b) in segs_abs.iter().zip(&segs_rel) {
            if let (super::super::Segment::CubicTo(_, _, e1), super::super::Segment::CubicTo(_, _, e2)) = (a, b) {
                assert!(e1.distance(*e2) < 1e-9);
            }
        }
    }
}
