use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{isomorphism_check, parse_svg, serialize_svg, SvgDocument, SvgError, Viewport};
use crate::fsutil::write_atomic;

/// Default cap on the number of update frames T (frame 0 excluded).
pub const DEFAULT_MAX_UPDATES: usize = 24;

/// Frames `0..=T` of one animation. All frames share the viewport and are
/// pairwise isomorphic.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<SvgDocument>,
    fps: u32,
    viewport: Viewport,
}

impl FrameSequence {
    pub fn new(frames: Vec<SvgDocument>, fps: u32) -> Result<Self, SvgError> {
        Self::with_max_updates(frames, fps, DEFAULT_MAX_UPDATES)
    }

    pub fn with_max_updates(frames: Vec<SvgDocument>, fps: u32, max_updates: usize) -> Result<Self, SvgError> {
        let Some(first) = frames.first() else {
            return Err(SvgError::EmptySequence);
        };
        if fps == 0 {
            return Err(SvgError::InvalidFps);
        }
        if frames.len() - 1 > max_updates {
            return Err(SvgError::TooManyFrames {
                updates: frames.len() - 1,
                max: max_updates,
            });
        }
        let viewport = first.viewport();
        for (t, pair) in frames.windows(2).enumerate() {
            let frame = t + 1;
            if pair[1].viewport() != viewport {
                return Err(SvgError::ViewportMismatch {
                    frame,
                    found: pair[1].viewport(),
                    expected: viewport,
                });
            }
            isomorphism_check(&pair[0], &pair[1])
                .map_err(|divergence| SvgError::NotIsomorphic { frame, divergence })?;
        }
        Ok(Self { frames, fps, viewport })
    }

    pub fn frames(&self) -> &[SvgDocument] {
        &self.frames
    }

    pub fn initial(&self) -> &SvgDocument {
        &self.frames[0]
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn viewport(&self) -> Viewport {
        self.viewport
    }

    /// T, the number of frames after the initial state.
    pub fn update_count(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn into_frames(self) -> Vec<SvgDocument> {
        self.frames
    }
}

/// `meta.json` of a frames directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub fps: u32,
    #[serde(with = "viewport_pair")]
    pub viewport: Viewport,
    pub frames: Vec<String>,
    /// Free-text description of the motion, used by the stub scorer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl FrameMeta {
    pub fn frame_file_name(t: usize) -> String {
        format!("f{t:04}.svg")
    }
}

mod viewport_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::svg::Viewport;

    fn number(v: f64) -> serde_json::Value {
        if v.fract() == 0.0 && v.abs() < 1e15 {
            serde_json::Value::from(v as i64)
        } else {
            serde_json::Value::from(v)
        }
    }

    pub fn serialize<S: Serializer>(v: &Viewport, s: S) -> Result<S::Ok, S::Error> {
        [number(v.width), number(v.height)].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Viewport, D::Error> {
        let [w, h] = <[f64; 2]>::deserialize(d)?;
        Ok(Viewport::new(w, h))
    }
}

/// Reads a frames directory (`meta.json` plus the listed SVG files).
/// Frames are parsed but not canonicalized.
pub fn read_frames_dir(dir: &Path) -> Result<(FrameSequence, FrameMeta), SvgError> {
    let meta_path = dir.join("meta.json");
    let raw = fs::read_to_string(&meta_path).map_err(|e| SvgError::io(&meta_path, e))?;
    let meta: FrameMeta =
        serde_json::from_str(&raw).map_err(|e| SvgError::Manifest(format!("{}: {e}", meta_path.display())))?;
    let mut frames = Vec::with_capacity(meta.frames.len());
    for name in &meta.frames {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| SvgError::io(&path, e))?;
        frames.push(parse_svg(&text)?);
    }
    let seq = FrameSequence::with_max_updates(frames, meta.fps, usize::MAX)?;
    Ok((seq, meta))
}

/// Writes `seq` as `f0000.svg…` plus `meta.json`; each file atomically.
pub fn write_frames_dir(dir: &Path, seq: &FrameSequence, description: Option<&str>) -> Result<FrameMeta, SvgError> {
    fs::create_dir_all(dir).map_err(|e| SvgError::io(dir, e))?;
    let mut names = Vec::with_capacity(seq.frames().len());
    for (t, frame) in seq.frames().iter().enumerate() {
        let name = FrameMeta::frame_file_name(t);
        let path = dir.join(&name);
        write_atomic(&path, serialize_svg(frame).as_bytes()).map_err(|e| SvgError::io(&path, e))?;
        names.push(name);
    }
    let meta = FrameMeta {
        fps: seq.fps(),
        viewport: seq.viewport(),
        frames: names,
        description: description.map(str::to_owned),
    };
    let path = dir.join("meta.json");
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes()).map_err(|e| SvgError::io(&path, e))?;
    Ok(meta)
}
