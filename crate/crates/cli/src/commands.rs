use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use ssu_core::api::*;
use ssu_core::corpus::{self, write_corpus, CorpusConfig};
use ssu_core::fsutil::write_atomic;
use ssu_core::ssu::{TokenStream, DEFAULT_FPS};
use ssu_core::svg::{parse_svg, FrameMeta, Viewport, DEFAULT_MAX_UPDATES};

use crate::backend::Backend;
use crate::config::RunConfig;
use crate::exit::{input_error, INVALID, SUCCESS};

pub const MANIFEST_FILE: &str = "encoded.json";
pub const STREAM_FILE: &str = "anim.ssu";
pub const S0_FILE: &str = "s0.svg";
pub const STATS_FILE: &str = "stats.json";
pub const FRAMES_META: &str = "meta.json";
pub const RENDER_INDEX: &str = "index.json";

/// `encoded.json`: everything besides the stream needed to decode it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedManifest {
    pub fps: u32,
    pub frame_count: usize,
    pub viewport: [f64; 2],
    pub stream: String,
    pub s0: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input_error)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(pretty(value).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(input_error)
}

/// Reads `meta.json` and the raw text of every listed frame.
fn read_frames(dir: &Path) -> Result<(FrameMeta, Vec<String>)> {
    let meta: FrameMeta = read_json(&dir.join(FRAMES_META))?;
    let frames = meta
        .frames
        .iter()
        .map(|name| read_text(&dir.join(name)))
        .collect::<Result<_>>()?;
    Ok((meta, frames))
}

struct StreamInput {
    stream: String,
    s0: String,
    manifest: Option<EncodedManifest>,
}

fn load_stream(input: &Path, s0: Option<&Path>) -> Result<StreamInput> {
    if input.is_dir() {
        let manifest: EncodedManifest = read_json(&input.join(MANIFEST_FILE))?;
        let s0_path = s0.map_or_else(|| input.join(&manifest.s0), Path::to_path_buf);
        return Ok(StreamInput {
            stream: read_text(&input.join(&manifest.stream))?,
            s0: read_text(&s0_path)?,
            manifest: Some(manifest),
        });
    }
    let s0 = s0.ok_or_else(|| input_error(anyhow!("--s0 is required when the input is a stream file")))?;
    Ok(StreamInput {
        stream: read_text(input)?,
        s0: read_text(s0)?,
        manifest: None,
    })
}

pub fn canonicalize(cfg: &RunConfig, input: &Path, output: Option<&Path>) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let res = backend.canonicalize(&CanonicalizeRequest {
        svg: read_text(input)?,
        viewport: Some(cfg.viewport),
    })?;
    match output {
        Some(path) => write_file(path, res.svg.as_bytes())?,
        None => print!("{}", res.svg),
    }
    Ok(SUCCESS)
}

fn encode_one(backend: &Backend, cfg: &RunConfig, input: &Path, out: &Path) -> Result<serde_json::Value> {
    let (meta, frames) = read_frames(input)?;
    let res = backend.encode(&EncodeRequest {
        frames,
        fps: Some(meta.fps),
        viewport: Some(cfg.viewport),
    })?;
    create_dir(out)?;
    write_file(&out.join(STREAM_FILE), res.stream.as_str().as_bytes())?;
    write_file(&out.join(S0_FILE), res.s0.as_bytes())?;
    write_file(&out.join(STATS_FILE), pretty(&res.stats).as_bytes())?;
    let manifest = EncodedManifest {
        fps: res.fps,
        frame_count: res.frame_count,
        viewport: res.viewport,
        stream: STREAM_FILE.into(),
        s0: S0_FILE.into(),
        description: meta.description,
    };
    write_file(&out.join(MANIFEST_FILE), pretty(&manifest).as_bytes())?;
    Ok(json!({
        "input": input,
        "output": out,
        "frame_count": res.frame_count,
        "stats": res.stats,
    }))
}

pub fn encode(cfg: &RunConfig, inputs: &[PathBuf], output: &Path) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let jobs: Vec<(PathBuf, PathBuf)> = if let [single] = inputs {
        vec![(single.clone(), output.to_path_buf())]
    } else {
        let mut seen = BTreeSet::new();
        inputs
            .iter()
            .map(|i| {
                let name = i
                    .file_name()
                    .ok_or_else(|| input_error(anyhow!("{} has no directory name", i.display())))?;
                if !seen.insert(name.to_owned()) {
                    return Err(input_error(anyhow!("two inputs are named {}", name.to_string_lossy())));
                }
                Ok((i.clone(), output.join(name)))
            })
            .collect::<Result<_>>()?
    };
    let reports = jobs
        .par_iter()
        .map(|(i, o)| encode_one(&backend, cfg, i, o).with_context(|| format!("encoding {}", i.display())))
        .collect::<Result<Vec<_>>>()?;
    match reports.as_slice() {
        [one] => print_json(one)?,
        many => print_json(&many)?,
    }
    Ok(SUCCESS)
}

/// Decodes a stream input to frame texts plus the meta it should be stored with.
fn decode_frames(
    backend: &Backend,
    cfg: &RunConfig,
    input: &Path,
    s0: Option<&Path>,
) -> Result<(FrameMeta, Vec<String>)> {
    let src = load_stream(input, s0)?;
    let m = src.manifest.as_ref();
    let frame_count = cfg.frames_or(m.map(|m| m.frame_count));
    let res = backend.decode(&DecodeRequest {
        stream: TokenStream(src.stream),
        s0: src.s0.clone(),
        frame_count,
    })?;
    let viewport = match m {
        Some(m) => Viewport::new(m.viewport[0], m.viewport[1]),
        None => parse_svg(&src.s0).map_err(input_error)?.viewport(),
    };
    let meta = FrameMeta {
        fps: m.map_or(DEFAULT_FPS, |m| m.fps),
        viewport,
        frames: (0..res.frames.len()).map(FrameMeta::frame_file_name).collect(),
        description: m.and_then(|m| m.description.clone()),
    };
    Ok((meta, res.frames))
}

pub fn decode(cfg: &RunConfig, input: &Path, s0: Option<&Path>, output: &Path) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let (meta, frames) = decode_frames(&backend, cfg, input, s0)?;
    create_dir(output)?;
    meta.frames
        .par_iter()
        .zip(&frames)
        .try_for_each(|(name, text)| write_file(&output.join(name), text.as_bytes()))?;
    write_file(&output.join(FRAMES_META), pretty(&meta).as_bytes())?;
    print_json(&json!({ "output": output, "frames": frames.len() }))?;
    Ok(SUCCESS)
}

pub fn validate(cfg: &RunConfig, input: &Path, s0: Option<&Path>, strict: bool) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let src = load_stream(input, s0)?;
    let verdict = backend.validate(&ValidateRequest {
        stream: TokenStream(src.stream),
        s0: src.s0,
        frame_count: cfg.frames_or(src.manifest.map(|m| m.frame_count)),
        strict,
    })?;
    print_json(&verdict)?;
    Ok(if verdict.reward == 1 { SUCCESS } else { INVALID })
}

pub fn cot(cfg: &RunConfig, input: &Path, s0: &Path) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let report = backend.cot(&CotRequest {
        text: read_text(input)?,
        s0: read_text(s0)?,
    })?;
    print_json(&report)?;
    Ok(SUCCESS)
}

pub fn stats(cfg: &RunConfig, input: &Path) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let (_, frames) = read_frames(input)?;
    let stats = backend.stats(&StatsRequest {
        frames,
        viewport: Some(cfg.viewport),
    })?;
    print_json(&stats)?;
    Ok(SUCCESS)
}

pub fn render(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    size: Option<[f64; 2]>,
    background: Option<String>,
) -> Result<u8> {
    let backend = Backend::new(cfg, false)?;
    let frames = if input.join(MANIFEST_FILE).is_file() {
        decode_frames(&backend, cfg, input, None)?.1
    } else {
        read_frames(input)?.1
    };
    let frames = frames
        .into_par_iter()
        .enumerate()
        .map(|(i, svg)| {
            backend
                .canonicalize(&CanonicalizeRequest {
                    svg,
                    viewport: Some(cfg.viewport),
                })
                .map(|r| r.svg)
                .with_context(|| format!("frame {i}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let size = size.map(|[w, h]| [w.round() as u32, h.round() as u32]);
    if size.is_some_and(|[w, h]| w == 0 || h == 0) {
        return Err(input_error(anyhow!("render size must be at least 1x1")));
    }
    let res = backend.render(&RenderRequest {
        frames,
        size,
        background,
    })?;
    create_dir(output)?;
    let files: Vec<String> = (0..res.frames.len()).map(|t| format!("frame_{t:04}.png")).collect();
    files.par_iter().zip(&res.frames).try_for_each(|(name, b64)| {
        let png = base64::engine::general_purpose::STANDARD
            .decode(b64)
            .context("service returned invalid base64")?;
        write_file(&output.join(name), &png)
    })?;
    let index = json!({
        "frames": files
            .iter()
            .zip(&res.ignored)
            .map(|(file, ignored)| json!({ "file": file, "ignored": ignored }))
            .collect::<Vec<_>>(),
    });
    write_file(&output.join(RENDER_INDEX), pretty(&index).as_bytes())?;
    print_json(&json!({ "output": output, "frames": files.len() }))?;
    Ok(SUCCESS)
}

pub fn score(
    cfg: &RunConfig,
    input: &Path,
    s0: Option<&Path>,
    prompt: String,
    description: Option<String>,
) -> Result<u8> {
    let backend = Backend::new(cfg, true)?;
    let src = load_stream(input, s0)?;
    let manifest = src.manifest;
    let report = backend.reward(&RewardRequest {
        prompt,
        stream: TokenStream(src.stream),
        s0: src.s0,
        frame_count: cfg.frames_or(manifest.as_ref().map(|m| m.frame_count)),
        description: description.or_else(|| manifest.and_then(|m| m.description)),
        weights: cfg.weights,
    })?;
    print_json(&report)?;
    Ok(SUCCESS)
}

/// One real per non-blank line.
fn read_logprobs(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| input_error(anyhow!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Sidecar of `cand.ssu`: `cand.<ext>`, or `cand.ssu.<ext>` when that exists.
fn sidecar(candidate: &Path, ext: &str) -> PathBuf {
    let mut long = candidate.as_os_str().to_owned();
    long.push(".");
    long.push(ext);
    let long = PathBuf::from(long);
    if long.is_file() {
        long
    } else {
        candidate.with_extension(ext)
    }
}

fn read_candidates(dir: &Path) -> Result<Vec<CandidateInput>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .map_err(input_error)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "ssu"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            Ok(CandidateInput {
                stream: TokenStream(read_text(p)?),
                logprob_new: read_logprobs(&sidecar(p, "lp.new"))?,
                logprob_old: read_logprobs(&sidecar(p, "lp.old"))?,
            })
        })
        .collect()
}

pub fn grpo_sim(
    cfg: &RunConfig,
    candidates: &Path,
    s0: &Path,
    prompt: String,
    description: Option<String>,
    output: Option<&Path>,
) -> Result<u8> {
    let backend = Backend::new(cfg, true)?;
    let group = read_candidates(candidates)?;
    if group.len() != cfg.group_size {
        return Err(input_error(anyhow!(
            "expected a group of {} candidates in {}, found {}",
            cfg.group_size,
            candidates.display(),
            group.len()
        )));
    }
    let res = backend.grpo(&GrpoRequest {
        prompt,
        s0: read_text(s0)?,
        frame_count: cfg.frames_or(None),
        description,
        candidates: group,
        weights: cfg.weights,
        config: cfg.grpo,
    })?;
    let lines = res.to_json_lines();
    match output {
        Some(path) => write_file(path, lines.as_bytes())?,
        None => print!("{lines}"),
    }
    Ok(SUCCESS)
}

pub fn gen_corpus(cfg: &RunConfig, seed: u64, count: usize, output: &Path) -> Result<u8> {
    let updates = cfg.frames_or(None);
    if !(1..=DEFAULT_MAX_UPDATES).contains(&updates) {
        return Err(input_error(anyhow!(
            "corpus items need 1 to {DEFAULT_MAX_UPDATES} update frames, got {updates}"
        )));
    }
    let corpus_cfg = CorpusConfig {
        updates,
        ..CorpusConfig::default()
    };
    let items = corpus::gen_corpus(seed, count, &corpus_cfg);
    write_corpus(output, &items).with_context(|| format!("writing corpus to {}", output.display()))?;
    print_json(&json!({
        "seed": seed,
        "count": count,
        "output": output,
        "items": items.iter().map(|i| &i.name).collect::<Vec<_>>(),
    }))?;
    Ok(SUCCESS)
}

pub fn serve(cfg: &RunConfig, addr: SocketAddr) -> Result<u8> {
    if cfg.server.is_some() {
        return Err(input_error(anyhow!("serve runs locally; unset --server / SSU_SERVER")));
    }
    let Backend::Local { scorer: Some(scorer) } = Backend::new(cfg, true)? else {
        unreachable!("local backend with scorer requested");
    };
    let state = ssu_server::AppState {
        scorer: Arc::from(scorer),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        ssu_server::serve(listener, state).await?;
        Ok(SUCCESS)
    })
}
