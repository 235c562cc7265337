//! Deterministic rasterizer for the filled-shape subset of SVG, and image
//! metrics over rendered frames.
//!
//! Supported: `path`, `rect` (with rounded corners), `circle`, `ellipse`,
//! `polygon`, `polyline`, nested `g` with transforms, `fill`,
//! `fill-opacity`, `fill-rule`, `opacity` (groups render through an
//! offscreen layer) and `display="none"`. Strokes, paint servers,
//! clipping, masking, text and images are rejected with
//! [`RasterError::UnsupportedFeature`]. `filter` references are ignored
//! and reported in [`Rendered::ignored`].

mod scan;
mod ssim;

use rayon::prelude::*;
use thiserror::Error;

use crate::color::{parse_paint, Paint, Rgba};
use crate::numfmt::parse_real;
use crate::path::{flatten_segments, parse_path, parse_transform, Point, Segment, TransformMatrix};
use crate::ssu::{apply, CodecError, UpdateSequence};
use crate::svg::{SvgDocument, SvgNode};

pub use scan::{FillRule, SUBSAMPLES};
pub use ssim::{identity_score, ssim, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};

/// Maximum chord deviation when flattening curves, in device pixels.
pub const FLATTEN_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("{node}: unsupported feature '{feature}'")]
    UnsupportedFeature { node: String, feature: String },
    #[error("{node}: invalid {attr}: {message}")]
    InvalidAttribute { node: String, attr: String, message: String },
    #[error("image sizes differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("images of {0:?} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")]
    ImageTooSmall((u32, u32)),
    #[error("frame counts differ: original {original}, candidate {candidate}")]
    FrameCountMismatch { original: usize, candidate: usize },
    #[error("render size must be non-zero")]
    EmptySize,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("png: {0}")]
    Png(String),
}

/// Row-major 8-bit RGBA with straight (non-premultiplied) alpha.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32, fill: Rgba) -> Self {
        let px = [fill.r, fill.g, fill.b, fill.a];
        Self {
            width,
            height,
            pixels: px.repeat(width as usize * height as usize),
        }
    }

    pub fn size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].try_into().unwrap()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        use image::ImageEncoder;
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(&self.pixels, self.width, self.height, image::ExtendedColorType::Rgba8)
            .map_err(|e| RasterError::Png(e.to_string()))?;
        Ok(out)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| RasterError::Png(e.to_string()))?
            .into_rgba8();
        Ok(Self {
            width: img.width(),
            height: img.height(),
            pixels: img.into_raw(),
        })
    }

    fn from_layer(layer: &scan::Layer) -> Self {
        let mut pixels = Vec::with_capacity(layer.data.len() * 4);
        let q = |v: f32| (v * 255.0).round().clamp(0.0, 255.0) as u8;
        for p in &layer.data {
            let a = p[3];
            if a <= 0.0 {
                pixels.extend_from_slice(&[0, 0, 0, 0]);
            } else {
                pixels.extend_from_slice(&[q(p[0] / a), q(p[1] / a), q(p[2] / a), q(a)]);
            }
        }
        Self {
            width: layer.width as u32,
            height: layer.height as u32,
            pixels,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub framebuffer: Framebuffer,
    /// Node descriptions of features skipped rather than drawn.
    pub ignored: Vec<String>,
}

pub fn rasterize(doc: &SvgDocument, size: (u32, u32), background: Rgba) -> Result<Framebuffer, RasterError> {
    rasterize_report(doc, size, background).map(|r| r.framebuffer)
}

/// Renders `doc` scaled from its viewport to `size` pixels over
/// `background`.
pub fn rasterize_report(doc: &SvgDocument, size: (u32, u32), background: Rgba) -> Result<Rendered, RasterError> {
    if size.0 == 0 || size.1 == 0 {
        return Err(RasterError::EmptySize);
    }
    let root = doc.root();
    if root.get("viewBox").is_some() {
        return Err(RasterError::UnsupportedFeature {
            node: "<svg>".into(),
            feature: "viewBox (canonicalize first)".into(),
        });
    }
    let vp = doc.viewport();
    let base = TransformMatrix::scale(size.0 as f64 / vp.width, size.1 as f64 / vp.height);
    let a = background.a as f32 / 255.0;
    let bg = [
        background.r as f32 / 255.0 * a,
        background.g as f32 / 255.0 * a,
        background.b as f32 / 255.0 * a,
        a,
    ];
    let mut layer = scan::Layer::new(size.0 as usize, size.1 as usize, bg);
    let mut ctx = Renderer { ignored: Vec::new() };
    let mut path = Vec::new();
    ctx.children(root, &base, &Style::default(), &mut layer, &mut path)?;
    Ok(Rendered {
        framebuffer: Framebuffer::from_layer(&layer),
        ignored: ctx.ignored,
    })
}

/// Renders every frame in parallel over `background`.
pub fn render_frames(
    frames: &[SvgDocument],
    size: (u32, u32),
    background: Rgba,
) -> Result<Vec<Framebuffer>, RasterError> {
    frames.par_iter().map(|f| rasterize(f, size, background)).collect()
}

/// Reconstructs every frame of `u` and renders it over white.
pub fn render_sequence(u: &UpdateSequence, size: (u32, u32)) -> Result<Vec<Framebuffer>, RasterError> {
    let seq = apply(u)?;
    render_frames(seq.frames(), size, Rgba::WHITE)
}

/// Inherited presentation state.
#[derive(Clone, Debug)]
struct Style {
    fill: Paint,
    fill_opacity: f64,
    fill_rule: FillRule,
    stroke: Paint,
    stroke_width: f64,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            fill: Paint::Color(Rgba::BLACK),
            fill_opacity: 1.0,
            fill_rule: FillRule::NonZero,
            stroke: Paint::None,
            stroke_width: 1.0,
        }
    }
}

/// Elements that never paint directly.
const NON_RENDERING: &[&str] = &[
    "defs",
    "title",
    "desc",
    "metadata",
    "style",
    "script",
    "linearGradient",
    "radialGradient",
    "pattern",
    "clipPath",
    "mask",
    "symbol",
    "marker",
    "filter",
];

const SHAPES: &[&str] = &["path", "rect", "circle", "ellipse", "polygon", "polyline", "line"];

struct Renderer {
    ignored: Vec<String>,
}

fn describe(node: &SvgNode, path: &[usize]) -> String {
    match node.id {
        Some(id) => format!("<{} id=\"{id}\">", node.tag),
        None => {
            let p: String = path.iter().map(|i| format!("/{i}")).collect();
            format!("<{}> at /svg{p}", node.tag)
        }
    }
}

impl Renderer {
    fn children(
        &mut self,
        node: &SvgNode,
        ctm: &TransformMatrix,
        style: &Style,
        layer: &mut scan::Layer,
        path: &mut Vec<usize>,
    ) -> Result<(), RasterError> {
        for (i, child) in node.children.iter().enumerate() {
            path.push(i);
            self.node(child, ctm, style, layer, path)?;
            path.pop();
        }
        Ok(())
    }

    fn node(
        &mut self,
        node: &SvgNode,
        ctm: &TransformMatrix,
        parent_style: &Style,
        layer: &mut scan::Layer,
        path: &mut Vec<usize>,
    ) -> Result<(), RasterError> {
        let tag = node.tag.as_str();
        if NON_RENDERING.contains(&tag) || tag.starts_with("fe") || node.get("display") == Some("none") {
            return Ok(());
        }
        let unsupported = |feature: &str| RasterError::UnsupportedFeature {
            node: describe(node, path),
            feature: feature.to_owned(),
        };
        if tag != "g" && !SHAPES.contains(&tag) {
            return Err(unsupported(&format!("<{tag}> element")));
        }
        for attr in ["clip-path", "mask", "style"] {
            if node.get(attr).is_some() {
                return Err(unsupported(attr));
            }
        }
        if node.get("filter").is_some() {
            self.ignored.push(format!("{}: filter", describe(node, path)));
        }

        let style = self.style(node, parent_style, path)?;
        let opacity = match node.get("opacity") {
            Some(v) => self.number(node, path, "opacity", v)?.clamp(0.0, 1.0),
            None => 1.0,
        };
        if opacity == 0.0 {
            return Ok(());
        }
        let ctm = match node.get("transform") {
            Some(t) => ctm.then_after(&parse_transform(t).map_err(|e| self.invalid(node, path, "transform", e))?),
            None => *ctm,
        };

        if tag == "g" {
            if opacity < 1.0 {
                let mut group = scan::Layer::new(layer.width, layer.height, [0.0; 4]);
                self.children(node, &ctm, &style, &mut group, path)?;
                layer.composite(&group, opacity as f32);
            } else {
                self.children(node, &ctm, &style, layer, path)?;
            }
            return Ok(());
        }

        if !matches!(style.stroke, Paint::None) && style.stroke_width > 0.0 {
            return Err(unsupported("stroke"));
        }
        let color = match &style.fill {
            Paint::None => return Ok(()),
            Paint::Reference(r) => return Err(unsupported(&format!("fill url({r})"))),
            Paint::Color(c) => *c,
        };
        let segments = self.geometry(node, path)?;
        if segments.is_empty() {
            return Ok(());
        }
        let device: Vec<Segment> = segments
            .into_iter()
            .map(|s| match s {
                Segment::MoveTo(p) => Segment::MoveTo(ctm.apply(p)),
                Segment::LineTo(p) => Segment::LineTo(ctm.apply(p)),
                Segment::CubicTo(a, b, c) => Segment::CubicTo(ctm.apply(a), ctm.apply(b), ctm.apply(c)),
                Segment::Close => Segment::Close,
            })
            .collect();
        let polys = flatten_segments(&device, FLATTEN_TOLERANCE);
        let a = (color.a as f64 / 255.0 * style.fill_opacity * opacity) as f32;
        let premul = [
            color.r as f32 / 255.0 * a,
            color.g as f32 / 255.0 * a,
            color.b as f32 / 255.0 * a,
            a,
        ];
        scan::fill(layer, &polys, style.fill_rule, premul);
        Ok(())
    }

    fn invalid(&self, node: &SvgNode, path: &[usize], attr: &str, message: impl ToString) -> RasterError {
        RasterError::InvalidAttribute {
            node: describe(node, path),
            attr: attr.to_owned(),
            message: message.to_string(),
        }
    }

    fn number(&self, node: &SvgNode, path: &[usize], attr: &str, value: &str) -> Result<f64, RasterError> {
        let v = value.trim();
        parse_real(v.strip_suffix("px").unwrap_or(v))
            .ok_or_else(|| self.invalid(node, path, attr, format!("'{value}' is not a number")))
    }

    fn length(&self, node: &SvgNode, path: &[usize], attr: &str) -> Result<f64, RasterError> {
        node.get(attr).map_or(Ok(0.0), |v| self.number(node, path, attr, v))
    }

    fn style(&self, node: &SvgNode, parent: &Style, path: &[usize]) -> Result<Style, RasterError> {
        let mut s = parent.clone();
        let paint = |attr: &str, v: &str| parse_paint(v).map_err(|e| self.invalid(node, path, attr, e));
        if let Some(v) = node.get("fill") {
            s.fill = paint("fill", v)?;
        }
        if let Some(v) = node.get("stroke") {
            s.stroke = paint("stroke", v)?;
        }
        if let Some(v) = node.get("fill-opacity") {
            s.fill_opacity = self.number(node, path, "fill-opacity", v)?.clamp(0.0, 1.0);
        }
        if let Some(v) = node.get("stroke-width") {
            s.stroke_width = self.number(node, path, "stroke-width", v)?;
        }
        if let Some(v) = node.get("fill-rule") {
            s.fill_rule = match v.trim() {
                "nonzero" => FillRule::NonZero,
                "evenodd" => FillRule::EvenOdd,
                other => return Err(self.invalid(node, path, "fill-rule", format!("unknown rule '{other}'"))),
            };
        }
        Ok(s)
    }

    /// User-space outline of a shape element.
    fn geometry(&self, node: &SvgNode, path: &[usize]) -> Result<Vec<Segment>, RasterError> {
        let len = |attr: &str| self.length(node, path, attr);
        Ok(match node.tag.as_str() {
            "path" => match node.get("d") {
                Some(d) => parse_path(d).map_err(|e| self.invalid(node, path, "d", e))?.segments(),
                None => Vec::new(),
            },
            "rect" => {
                let (x, y, w, h) = (len("x")?, len("y")?, len("width")?, len("height")?);
                if w <= 0.0 || h <= 0.0 {
                    return Ok(Vec::new());
                }
                let rx = node.get("rx").map(|v| self.number(node, path, "rx", v)).transpose()?;
                let ry = node.get("ry").map(|v| self.number(node, path, "ry", v)).transpose()?;
                let (rx, ry) = match (rx, ry) {
                    (None, None) => (0.0, 0.0),
                    (Some(r), None) | (None, Some(r)) => (r, r),
                    (Some(a), Some(b)) => (a, b),
                };
                rect_outline(x, y, w, h, rx.clamp(0.0, w / 2.0), ry.clamp(0.0, h / 2.0))
            }
            "circle" => {
                let r = len("r")?;
                if r <= 0.0 {
                    return Ok(Vec::new());
                }
                ellipse_outline(len("cx")?, len("cy")?, r, r)
            }
            "ellipse" => {
                let (rx, ry) = (len("rx")?, len("ry")?);
                if rx <= 0.0 || ry <= 0.0 {
                    return Ok(Vec::new());
                }
                ellipse_outline(len("cx")?, len("cy")?, rx, ry)
            }
            "polygon" | "polyline" => {
                let nums = match node.get("points") {
                    Some(p) => crate::numfmt::parse_list(p)
                        .ok_or_else(|| self.invalid(node, path, "points", "malformed point list"))?,
                    None => Vec::new(),
                };
                let mut out: Vec<Segment> = nums
                    .chunks_exact(2)
                    .enumerate()
                    .map(|(i, c)| {
                        let p = Point::new(c[0], c[1]);
                        if i == 0 {
                            Segment::MoveTo(p)
                        } else {
                            Segment::LineTo(p)
                        }
                    })
                    .collect();
                if !out.is_empty() {
                    out.push(Segment::Close);
                }
                out
            }
            // A line encloses no area; only a stroke would show it.
            _ => Vec::new(),
        })
    }
}

/// Cubic approximation constant for a quarter ellipse.
const KAPPA: f64 = 0.552_284_749_830_793_4;

fn ellipse_outline(cx: f64, cy: f64, rx: f64, ry: f64) -> Vec<Segment> {
    let (kx, ky) = (rx * KAPPA, ry * KAPPA);
    let p = Point::new;
    vec![
        Segment::MoveTo(p(cx + rx, cy)),
        Segment::CubicTo(p(cx + rx, cy + ky), p(cx + kx, cy + ry), p(cx, cy + ry)),
        Segment::CubicTo(p(cx - kx, cy + ry), p(cx - rx, cy + ky), p(cx - rx, cy)),
        Segment::CubicTo(p(cx - rx, cy - ky), p(cx - kx, cy - ry), p(cx, cy - ry)),
        Segment::CubicTo(p(cx + kx, cy - ry), p(cx + rx, cy - ky), p(cx + rx, cy)),
        Segment::Close,
    ]
}

fn rect_outline(x: f64, y: f64, w: f64, h: f64, rx: f64, ry: f64) -> Vec<Segment> {
    let p = Point::new;
    if rx == 0.0 || ry == 0.0 {
        return vec![
            Segment::MoveTo(p(x, y)),
            Segment::LineTo(p(x + w, y)),
            Segment::LineTo(p(x + w, y + h)),
            Segment::LineTo(p(x, y + h)),
            Segment::Close,
        ];
    }
    let (kx, ky) = (rx * KAPPA, ry * KAPPA);
    let (x1, y1) = (x + w, y + h);
    vec![
        Segment::MoveTo(p(x + rx, y)),
        Segment::LineTo(p(x1 - rx, y)),
        Segment::CubicTo(p(x1 - rx + kx, y), p(x1, y + ry - ky), p(x1, y + ry)),
        Segment::LineTo(p(x1, y1 - ry)),
        Segment::CubicTo(p(x1, y1 - ry + ky), p(x1 - rx + kx, y1), p(x1 - rx, y1)),
        Segment::LineTo(p(x + rx, y1)),
        Segment::CubicTo(p(x + rx - kx, y1), p(x, y1 - ry + ky), p(x, y1 - ry)),
        Segment::LineTo(p(x, y + ry)),
        Segment::CubicTo(p(x, y + ry - ky), p(x + rx - kx, y), p(x + rx, y)),
        Segment::Close,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::parse_svg;

    fn render(svg: &str) -> Framebuffer {
        let doc = parse_svg(svg).unwrap();
        rasterize(&doc, doc.viewport().pixel_size(), Rgba::WHITE).unwrap()
    }

    fn render_err(svg: &str) -> RasterError {
        let doc = parse_svg(svg).unwrap();
        rasterize(&doc, doc.viewport().pixel_size(), Rgba::WHITE).unwrap_err()
    }

    #[test]
    fn full_viewport_black_rect() {
        let fb = render(r#"<svg width="500" height="500"><rect width="500" height="500" fill="black"/></svg>"#);
        assert_eq!(fb.pixels.len(), 500 * 500 * 4);
        assert!(fb.pixels.chunks(4).all(|p| p == [0, 0, 0, 255]));
    }

    #[test]
    fn empty_document_is_background() {
        let fb = render(r#"<svg width="3" height="2"/>"#);
        assert_eq!(fb, Framebuffer::new(3, 2, Rgba::WHITE));
    }

    #[test]
    fn scaling_to_output_size() {
        let doc = parse_svg(r#"<svg width="10" height="10"><rect width="5" height="5"/></svg>"#).unwrap();
        let fb = rasterize(&doc, (20, 20), Rgba::WHITE).unwrap();
        assert_eq!(fb.pixel(9, 9), [0, 0, 0, 255]);
        assert_eq!(fb.pixel(10, 10), [255, 255, 255, 255]);
    }

    #[test]
    fn group_transform_and_inherited_fill() {
        let fb = render(
            r#"<svg width="10" height="10"><g fill="red" transform="translate(5 5)"><rect width="2" height="2"/></g></svg>"#,
        );
        assert_eq!(fb.pixel(5, 5), [255, 0, 0, 255]);
        assert_eq!(fb.pixel(4, 4), [255, 255, 255, 255]);
    }

    #[test]
    fn group_opacity_is_applied_once_to_the_composite() {
        // Two overlapping black squares in a half-opaque group: the overlap
        // is no darker than either square alone.
        let fb = render(
            r#"<svg width="10" height="10"><g opacity="0.5"><rect width="6" height="6"/><rect x="3" y="3" width="6" height="6"/></g></svg>"#,
        );
        assert_eq!(fb.pixel(1, 1), fb.pixel(4, 4));
        assert_eq!(fb.pixel(1, 1), [128, 128, 128, 255]);
    }

    #[test]
    fn transparent_background_gives_straight_alpha() {
        let doc = parse_svg(r##"<svg width="2" height="2"><rect width="2" height="2" fill="#ff0000" fill-opacity="0.5"/></svg>"##)
            .unwrap();
        let fb = rasterize(&doc, (2, 2), Rgba::TRANSPARENT).unwrap();
        assert_eq!(fb.pixel(0, 0), [255, 0, 0, 128]);
    }

    #[test]
    fn unsupported_features_name_the_node() {
        let e = render_err(r#"<svg width="10" height="10"><path id="4" d="M0,0 L5,5" stroke="red"/></svg>"#);
        assert_eq!(
            e,
            RasterError::UnsupportedFeature {
                node: "<path id=\"4\">".into(),
                feature: "stroke".into()
            }
        );
        let e = render_err(r#"<svg width="10" height="10"><rect width="5" height="5" fill="url(#g)"/></svg>"#);
        assert!(matches!(e, RasterError::UnsupportedFeature { .. }));
        let e = render_err(r#"<svg width="10" height="10"><text>hi</text></svg>"#);
        assert!(matches!(e, RasterError::UnsupportedFeature { .. }));
    }

    #[test]
    fn filters_are_ignored_and_reported() {
        let doc = parse_svg(
            r#"<svg width="10" height="10"><defs><filter id="f"><feMorphology radius="1"/></filter></defs><rect id="1" width="5" height="5" filter="url(#f)"/></svg>"#,
        )
        .unwrap();
        let r = rasterize_report(&doc, (10, 10), Rgba::WHITE).unwrap();
        assert_eq!(r.ignored, vec!["<rect id=\"1\">: filter".to_owned()]);
        assert_eq!(r.framebuffer.pixel(0, 0), [0, 0, 0, 255]);
    }

    #[test]
    fn circle_area_close_to_pi_r_squared() {
        let fb = render(r#"<svg width="100" height="100"><circle cx="50" cy="50" r="30"/></svg>"#);
        let covered: f64 = fb.pixels.chunks(4).map(|p| 1.0 - p[0] as f64 / 255.0).sum();
        let area = std::f64::consts::PI * 900.0;
        assert!((covered - area).abs() / area < 0.005, "{covered} vs {area}");
    }

    #[test]
    fn png_round_trip() {
        let fb = render(r#"<svg width="7" height="5"><rect x="1" y="1" width="3" height="2" fill="blue"/></svg>"#);
        let png = fb.encode_png().unwrap();
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
        assert_eq!(Framebuffer::decode_png(&png).unwrap(), fb);
    }
}
