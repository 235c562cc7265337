//! Seeded synthetic animations in canonical form: groups of filled shapes
//! with rigid drift, path morphs, opacity fades and hold frames.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::numfmt::format_number;
use crate::path::TransformMatrix;
use crate::svg::{write_frames_dir, FrameSequence, SvgDocument, SvgError, SvgNode, DEFAULT_MAX_UPDATES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorpusConfig {
    /// Update frames per item; items have one more document.
    pub updates: usize,
    pub fps: u32,
    pub groups: usize,
    /// Inclusive range of shapes per group.
    pub shapes_per_group: (usize, usize),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            updates: DEFAULT_MAX_UPDATES,
            fps: 24,
            groups: 5,
            shapes_per_group: (5, 8),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusItem {
    pub name: String,
    pub sequence: FrameSequence,
    pub description: String,
}

const PALETTE: &[(&str, &str)] = &[
    ("#e63946", "red"),
    ("#f4a261", "orange"),
    ("#e9c46a", "yellow"),
    ("#2a9d8f", "teal"),
    ("#264653", "navy"),
    ("#8ab17d", "green"),
    ("#6d597a", "purple"),
    ("#457b9d", "blue"),
];

const BACKGROUNDS: &[&str] = &["#f1faee", "#fdf6e3", "#eef2f7", "#fff8f0"];

/// Generates `count` items; item `i` depends only on `(seed, i)`.
pub fn gen_corpus(seed: u64, count: usize, cfg: &CorpusConfig) -> Vec<CorpusItem> {
    (0..count)
        .into_par_iter()
        .map(|i| gen_item(seed, i, cfg))
        .collect()
}

pub fn item_name(index: usize) -> String {
    format!("item_{index:04}")
}

/// Writes each item to `dir/<name>/` as a frames directory.
pub fn write_corpus(dir: &Path, items: &[CorpusItem]) -> Result<Vec<PathBuf>, SvgError> {
    std::fs::create_dir_all(dir).map_err(|e| SvgError::io(dir, e))?;
    items
        .par_iter()
        .map(|item| {
            let out = dir.join(&item.name);
            write_frames_dir(&out, &item.sequence, Some(&item.description))?;
            Ok(out)
        })
        .collect()
}

enum Kind {
    Blob { points: Vec<(f64, f64)>, morph: Option<Morph> },
    Circle { cx: f64, cy: f64, r: f64 },
    Rect { x: f64, y: f64, w: f64, h: f64, rx: f64 },
}

struct Morph {
    window: (usize, usize),
    amplitude: f64,
    speed: f64,
    phases: Vec<f64>,
}

struct Fade {
    window: (usize, usize),
    from: f64,
    to: f64,
}

struct Shape {
    kind: Kind,
    fill: &'static str,
    fade: Option<Fade>,
}

struct Group {
    origin: (f64, f64),
    velocity: (f64, f64),
    spin: f64,
    scale: f64,
    window: (usize, usize),
    shapes: Vec<Shape>,
}

fn window(rng: &mut ChaCha8Rng, updates: usize, min_len: usize, max_len: usize) -> (usize, usize) {
    let max_len = max_len.min(updates).max(1);
    let min_len = min_len.min(max_len);
    let len = rng.random_range(min_len..=max_len);
    let start = rng.random_range(1..=updates + 1 - len);
    (start, start + len)
}

fn gen_item(seed: u64, index: usize, cfg: &CorpusConfig) -> CorpusItem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let t_max = cfg.updates.max(1);

    let mut groups: Vec<Group> = (0..cfg.groups)
        .map(|_| {
            let n = rng.random_range(cfg.shapes_per_group.0..=cfg.shapes_per_group.1);
            let shapes = (0..n)
                .map(|_| {
                    let fill = PALETTE[rng.random_range(0..PALETTE.len())].0;
                    let kind = match rng.random_range(0..10) {
                        0..=4 => {
                            let k = rng.random_range(4..=6);
                            let (cx, cy) = (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
                            let r = rng.random_range(10.0..28.0);
                            let offset = rng.random_range(0.0..TAU);
                            let points = (0..k)
                                .map(|j| {
                                    let a = offset + TAU * j as f64 / k as f64;
                                    let rr = r * rng.random_range(0.75..1.25);
                                    (cx + rr * a.cos(), cy + rr * a.sin())
                                })
                                .collect();
                            Kind::Blob { points, morph: None }
                        }
                        5..=7 => Kind::Circle {
                            cx: rng.random_range(-45.0..45.0),
                            cy: rng.random_range(-45.0..45.0),
                            r: rng.random_range(4.0..18.0),
                        },
                        _ => Kind::Rect {
                            x: rng.random_range(-50.0..30.0),
                            y: rng.random_range(-50.0..30.0),
                            w: rng.random_range(8.0..30.0),
                            h: rng.random_range(8.0..30.0),
                            rx: if rng.random_bool(0.5) { rng.random_range(1.0..4.0) } else { 0.0 },
                        },
                    };
                    Shape { kind, fill, fade: None }
                })
                .collect();
            let speed = rng.random_range(1.5..5.0);
            let heading = rng.random_range(0.0..TAU);
            Group {
                origin: (rng.random_range(90.0..410.0), rng.random_range(90.0..410.0)),
                velocity: (speed * heading.cos(), speed * heading.sin()),
                spin: rng.random_range(-3.0..3.0),
                scale: rng.random_range(0.8..1.3),
                window: window(&mut rng, t_max, t_max / 2, t_max * 5 / 6),
                shapes,
            }
        })
        .collect();

    // Every item morphs at least one path; if no blob was drawn, the
    // first shape becomes one.
    let mut blobs: Vec<(usize, usize)> = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        for (s, shape) in group.shapes.iter().enumerate() {
            if matches!(shape.kind, Kind::Blob { .. }) {
                blobs.push((g, s));
            }
        }
    }
    if blobs.is_empty() {
        groups[0].shapes[0].kind = Kind::Blob {
            points: vec![(-15.0, 0.0), (0.0, -15.0), (15.0, 0.0), (0.0, 15.0)],
            morph: None,
        };
        blobs.push((0, 0));
    }
    let morphers = rng.random_range(1..=3.min(blobs.len()));
    for _ in 0..morphers {
        let (g, s) = blobs.swap_remove(rng.random_range(0..blobs.len()));
        let w = window(&mut rng, t_max, t_max / 2, t_max * 3 / 4);
        if let Kind::Blob { points, morph } = &mut groups[g].shapes[s].kind {
            *morph = Some(Morph {
                window: w,
                amplitude: rng.random_range(0.08..0.2),
                speed: rng.random_range(0.3..0.8),
                phases: (0..points.len()).map(|_| rng.random_range(0.0..TAU)).collect(),
            });
        }
    }

    let faders = rng.random_range(1..=3);
    for _ in 0..faders {
        let g = rng.random_range(0..groups.len());
        let s = rng.random_range(0..groups[g].shapes.len());
        let w = window(&mut rng, t_max, 3, 6);
        let (from, to) = if rng.random_bool(0.5) { (0.2, 1.0) } else { (1.0, 0.3) };
        groups[g].shapes[s].fade = Some(Fade { window: w, from, to });
    }

    // Frames where nothing moves at all.
    let holds: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=cfg.updates.max(1))).collect();
    let background = BACKGROUNDS[rng.random_range(0..BACKGROUNDS.len())];

    let mut frames = Vec::with_capacity(cfg.updates + 1);
    let mut clock = 0usize;
    for t in 0..=cfg.updates {
        if t == 0 || !holds.contains(&t) {
            clock = t;
        }
        frames.push(render_frame(&groups, background, clock));
    }
    let sequence = FrameSequence::with_max_updates(frames, cfg.fps, usize::MAX).expect("generated frames are isomorphic");
    CorpusItem {
        name: item_name(index),
        sequence,
        description: describe(&groups),
    }
}

fn progress(w: (usize, usize), t: usize) -> f64 {
    let (a, b) = w;
    if t <= a {
        0.0
    } else if t >= b {
        1.0
    } else {
        (t - a) as f64 / (b - a) as f64
    }
}

fn render_frame(groups: &[Group], background: &str, t: usize) -> SvgDocument {
    let mut next_id = 0u32;
    let mut id = || {
        next_id += 1;
        next_id - 1
    };
    let mut root = SvgNode::new("svg").attr("width", "500").attr("height", "500");
    root = root.child(
        SvgNode::new("rect")
            .with_id(id())
            .attr("width", "500")
            .attr("height", "500")
            .attr("fill", background),
    );
    for group in groups {
        let p = progress(group.window, t) * (group.window.1 - group.window.0) as f64;
        let m = TransformMatrix::translate(group.origin.0 + group.velocity.0 * p, group.origin.1 + group.velocity.1 * p)
            .then_after(&TransformMatrix::rotate(group.spin * p))
            .then_after(&TransformMatrix::scale(group.scale, group.scale));
        let mut g = SvgNode::new("g").with_id(id()).attr("transform", m.to_string());
        for shape in &group.shapes {
            let mut node = match &shape.kind {
                Kind::Blob { points, morph } => {
                    let pts: Vec<(f64, f64)> = match morph {
                        Some(mo) => {
                            let steps = progress(mo.window, t) * (mo.window.1 - mo.window.0) as f64;
                            let (cx, cy) = centroid(points);
                            points
                                .iter()
                                .zip(&mo.phases)
                                .map(|(&(x, y), ph)| {
                                    let k = 1.0 + mo.amplitude * (ph + mo.speed * steps).sin() - mo.amplitude * ph.sin();
                                    (cx + (x - cx) * k, cy + (y - cy) * k)
                                })
                                .collect()
                        }
                        None => points.clone(),
                    };
                    SvgNode::new("path").attr("d", blob_path(&pts))
                }
                Kind::Circle { cx, cy, r } => SvgNode::new("circle")
                    .attr("cx", format_number(*cx))
                    .attr("cy", format_number(*cy))
                    .attr("r", format_number(*r)),
                Kind::Rect { x, y, w, h, rx } => {
                    let mut n = SvgNode::new("rect")
                        .attr("x", format_number(*x))
                        .attr("y", format_number(*y))
                        .attr("width", format_number(*w))
                        .attr("height", format_number(*h));
                    if *rx > 0.0 {
                        n = n.attr("rx", format_number(*rx));
                    }
                    n
                }
            };
            node.id = Some(crate::svg::NodeId(id()));
            node = node.attr("fill", shape.fill);
            if let Some(f) = &shape.fade {
                let o = f.from + (f.to - f.from) * progress(f.window, t);
                // Fully opaque is expressed by dropping the attribute.
                if format_number(o) != "1" {
                    node = node.attr("opacity", format_number(o));
                }
            }
            g = g.child(node);
        }
        root = root.child(g);
    }
    SvgDocument::from_root(root).expect("generated ids are unique")
}

fn centroid(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    (sx / n, sy / n)
}

/// Closed smooth curve through `points` (Catmull-Rom tangents), written
/// in canonical relative form.
fn blob_path(points: &[(f64, f64)]) -> String {
    let r = |(x, y): (f64, f64)| (crate::numfmt::round_canonical(x), crate::numfmt::round_canonical(y));
    let n = points.len();
    let pts: Vec<(f64, f64)> = points.iter().copied().map(r).collect();
    let mut out = format!("M{},{}", format_number(pts[0].0), format_number(pts[0].1));
    for i in 0..n {
        let p0 = pts[(i + n - 1) % n];
        let p1 = pts[i];
        let p2 = pts[(i + 1) % n];
        let p3 = pts[(i + 2) % n];
        let c1 = r((p1.0 + (p2.0 - p0.0) / 6.0, p1.1 + (p2.1 - p0.1) / 6.0));
        let c2 = r((p2.0 - (p3.0 - p1.0) / 6.0, p2.1 - (p3.1 - p1.1) / 6.0));
        let rel = |q: (f64, f64)| format!("{},{}", format_number(q.0 - p1.0), format_number(q.1 - p1.1));
        out.push_str(&format!(" c{} {} {}", rel(c1), rel(c2), rel(p2)));
    }
    out.push_str(" z");
    out
}

fn describe(groups: &[Group]) -> String {
    let shapes: usize = groups.iter().map(|g| g.shapes.len()).sum();
    let morphs = groups
        .iter()
        .flat_map(|g| &g.shapes)
        .filter(|s| matches!(s.kind, Kind::Blob { morph: Some(_), .. }))
        .count();
    let fades = groups.iter().flat_map(|g| &g.shapes).filter(|s| s.fade.is_some()).count();
    let mut colors: Vec<&str> = groups
        .iter()
        .flat_map(|g| &g.shapes)
        .filter_map(|s| PALETTE.iter().find(|(hex, _)| *hex == s.fill).map(|(_, name)| *name))
        .collect();
    colors.sort_unstable();
    colors.dedup();
    format!(
        "{} groups of {} {} shapes drift and turn while {} blob{} morph and {} shape{} fade",
        groups.len(),
        shapes,
        colors.join(" "),
        morphs,
        if morphs == 1 { "" } else { "s" },
        fades,
        if fades == 1 { "" } else { "s" },
    )
}
