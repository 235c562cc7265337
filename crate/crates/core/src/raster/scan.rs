//! Scanline polygon filling into a premultiplied float layer.

use crate::path::Polyline;

/// Samples per pixel along each axis.
pub const SUBSAMPLES: usize = 4;
const SAMPLES_PER_PIXEL: f32 = (SUBSAMPLES * SUBSAMPLES) as f32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FillRule {
    #[default]
    NonZero,
    EvenOdd,
}

impl FillRule {
    fn inside(self, winding: i32) -> bool {
        match self {
            FillRule::NonZero => winding != 0,
            FillRule::EvenOdd => winding % 2 != 0,
        }
    }
}

/// Premultiplied RGBA in `[0, 1]`.
pub type Pixel = [f32; 4];

#[derive(Clone, Debug)]
pub struct Layer {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Pixel>,
}

impl Layer {
    pub fn new(width: usize, height: usize, fill: Pixel) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    /// Source-over of `other` scaled by `opacity`.
    pub fn composite(&mut self, other: &Layer, opacity: f32) {
        for (d, s) in self.data.iter_mut().zip(&other.data) {
            if s[3] > 0.0 {
                over(d, [s[0] * opacity, s[1] * opacity, s[2] * opacity, s[3] * opacity]);
            }
        }
    }
}

fn over(dst: &mut Pixel, src: Pixel) {
    let k = 1.0 - src[3];
    for c in 0..4 {
        dst[c] = src[c] + dst[c] * k;
    }
}

struct Edge {
    x0: f64,
    y0: f64,
    y1: f64,
    slope: f64,
    dir: i32,
}

fn edges(polys: &[Polyline]) -> Vec<Edge> {
    let mut out = Vec::new();
    for poly in polys {
        let n = poly.points.len();
        if n < 2 {
            continue;
        }
        // Filling closes every subpath.
        for i in 0..n {
            let a = poly.points[i];
            let b = poly.points[(i + 1) % n];
            if a.y == b.y || !(a.x.is_finite() && a.y.is_finite() && b.x.is_finite() && b.y.is_finite()) {
                continue;
            }
            let (top, bottom, dir) = if a.y < b.y { (a, b, 1) } else { (b, a, -1) };
            out.push(Edge {
                x0: top.x,
                y0: top.y,
                y1: bottom.y,
                slope: (bottom.x - top.x) / (bottom.y - top.y),
                dir,
            });
        }
    }
    out.sort_by(|a, b| a.y0.total_cmp(&b.y0));
    out
}

/// Fills the region of `polys` under `rule` with premultiplied `color`.
/// A sample at `(x + (i + ½)/4, y + (j + ½)/4)` is covered when it lies
/// inside; pixel coverage is the covered fraction of its 16 samples.
pub fn fill(layer: &mut Layer, polys: &[Polyline], rule: FillRule, color: Pixel) {
    let edges = edges(polys);
    if edges.is_empty() || color[3] <= 0.0 {
        return;
    }
    let ymin = edges.iter().map(|e| e.y0).fold(f64::INFINITY, f64::min);
    let ymax = edges.iter().map(|e| e.y1).fold(f64::NEG_INFINITY, f64::max);
    let row_start = ymin.floor().max(0.0) as usize;
    let row_end = (ymax.ceil().max(0.0) as usize).min(layer.height);
    let sub_width = (layer.width * SUBSAMPLES) as i64;

    let mut coverage = vec![0u8; layer.width];
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut next_edge = 0;

    for row in row_start..row_end {
        let mut touched: Option<(usize, usize)> = None;
        for j in 0..SUBSAMPLES {
            let ys = row as f64 + (j as f64 + 0.5) / SUBSAMPLES as f64;
            while next_edge < edges.len() && edges[next_edge].y0 <= ys {
                active.push(next_edge);
                next_edge += 1;
            }
            active.retain(|&i| edges[i].y1 > ys);
            crossings.clear();
            for &i in &active {
                let e = &edges[i];
                if e.y0 <= ys {
                    crossings.push((e.x0 + (ys - e.y0) * e.slope, e.dir));
                }
            }
            crossings.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            let mut winding = 0;
            for k in 0..crossings.len().saturating_sub(1) {
                winding += crossings[k].1;
                if !rule.inside(winding) {
                    continue;
                }
                let start = first_sample_at_or_after(crossings[k].0).clamp(0, sub_width);
                let end = first_sample_at_or_after(crossings[k + 1].0).clamp(0, sub_width);
                if start >= end {
                    continue;
                }
                let (start, end) = (start as usize, end as usize);
                for s in start..end {
                    coverage[s / SUBSAMPLES] += 1;
                }
                let (lo, hi) = (start / SUBSAMPLES, (end - 1) / SUBSAMPLES);
                touched = Some(touched.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
            }
        }
        if let Some((lo, hi)) = touched {
            let base = row * layer.width;
            for (x, cell) in coverage.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let c = std::mem::take(cell);
                if c == 0 {
                    continue;
                }
                let a = c as f32 / SAMPLES_PER_PIXEL;
                over(
                    &mut layer.data[base + x],
                    [color[0] * a, color[1] * a, color[2] * a, color[3] * a],
                );
            }
        }
    }
}

/// Index of the first subsample whose center `(i + ½)/4` is `≥ x`.
fn first_sample_at_or_after(x: f64) -> i64 {
    let v = (x * SUBSAMPLES as f64 - 0.5).ceil();
    v.clamp(i64::MIN as f64 / 2.0, i64::MAX as f64 / 2.0) as i64
}
