//! Settings resolved from flags, environment, a TOML file and defaults, in
//! that order of precedence. Flags and environment variables are merged by
//! clap; the file fills whatever is still unset.

use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;
use ssu_client::{DEFAULT_RETRIES, DEFAULT_TIMEOUT, STUB_BACKEND};
use ssu_core::reward::{GrpoConfig, RewardWeights, DEFAULT_BETA_KL, DEFAULT_CLIP_EPSILON, DEFAULT_GROUP_SIZE};
use ssu_core::svg::DEFAULT_VIEWPORT;

use crate::exit::input_error;

/// Parses `WxH` (or `W,H`) into a positive pair.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (w, h) = s
        .split_once(['x', 'X', ','])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| format!("invalid dimension {v:?}"))
    };
    Ok([parse(w)?, parse(h)?])
}

/// Options shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct GlobalOpts {
    /// TOML file supplying defaults for the options below.
    #[arg(long, global = true, env = "SSU_CONFIG", value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// Run through a codec service at this URL instead of locally.
    #[arg(long, global = true, env = "SSU_SERVER", value_name = "URL")]
    pub server: Option<String>,
    /// Worker threads for parallel work.
    #[arg(long, global = true, env = "SSU_JOBS")]
    pub jobs: Option<usize>,
    /// Canonical viewport, e.g. 500x500.
    #[arg(long, global = true, env = "SSU_VIEWPORT", value_parser = parse_pair, value_name = "WxH")]
    pub viewport: Option<[f64; 2]>,
    /// Expected number of update frames T.
    #[arg(long, global = true, env = "SSU_FRAMES", value_name = "T")]
    pub frames: Option<usize>,
    #[arg(long, global = true, env = "SSU_LAMBDA_ALIGN")]
    pub lambda_align: Option<f64>,
    #[arg(long, global = true, env = "SSU_LAMBDA_FMT")]
    pub lambda_fmt: Option<f64>,
    /// Candidates per GRPO group.
    #[arg(long, global = true, env = "SSU_GROUP_SIZE")]
    pub group_size: Option<usize>,
    /// KL coefficient.
    #[arg(long, global = true, env = "SSU_BETA_KL")]
    pub beta_kl: Option<f64>,
    #[arg(long, global = true, env = "SSU_CLIP_EPSILON")]
    pub clip_epsilon: Option<f64>,
    /// Scorer backend: `stub` or the base URL of a `POST /score` service.
    #[arg(long, global = true, env = "SCORER_URL", value_name = "BACKEND")]
    pub scorer: Option<String>,
    #[arg(long, global = true, env = "SSU_SCORER_TIMEOUT_MS", value_name = "MS")]
    pub scorer_timeout_ms: Option<u64>,
    #[arg(long, global = true, env = "SSU_SCORER_RETRIES")]
    pub scorer_retries: Option<u32>,
}

/// Contents of the `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub server: Option<String>,
    pub jobs: Option<usize>,
    pub viewport: Option<[f64; 2]>,
    pub frames: Option<usize>,
    pub lambda_align: Option<f64>,
    pub lambda_fmt: Option<f64>,
    pub group_size: Option<usize>,
    pub beta_kl: Option<f64>,
    pub clip_epsilon: Option<f64>,
    pub scorer: Option<String>,
    pub scorer_timeout_ms: Option<u64>,
    pub scorer_retries: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub server: Option<String>,
    pub jobs: Option<usize>,
    pub viewport: [f64; 2],
    /// Unset means "take T from the input manifest, else the default".
    pub frames: Option<usize>,
    pub weights: RewardWeights,
    pub group_size: usize,
    pub grpo: GrpoConfig,
    pub scorer: String,
    pub scorer_timeout: Duration,
    pub scorer_retries: u32,
}

pub const DEFAULT_FRAMES: usize = ssu_core::svg::DEFAULT_MAX_UPDATES;

impl RunConfig {
    pub fn resolve(opts: &GlobalOpts) -> Result<Self> {
        let file = match &opts.config {
            Some(p) => FileConfig::load(p).map_err(input_error)?,
            None => FileConfig::default(),
        };
        let cfg = Self {
            server: opts.server.clone().or(file.server).filter(|s| !s.trim().is_empty()),
            jobs: opts.jobs.or(file.jobs),
            viewport: opts
                .viewport
                .or(file.viewport)
                .unwrap_or([DEFAULT_VIEWPORT.width, DEFAULT_VIEWPORT.height]),
            frames: opts.frames.or(file.frames),
            weights: RewardWeights {
                lambda_align: opts.lambda_align.or(file.lambda_align).unwrap_or(1.0),
                lambda_fmt: opts.lambda_fmt.or(file.lambda_fmt).unwrap_or(1.0),
            },
            group_size: opts.group_size.or(file.group_size).unwrap_or(DEFAULT_GROUP_SIZE),
            grpo: GrpoConfig {
                clip_epsilon: opts.clip_epsilon.or(file.clip_epsilon).unwrap_or(DEFAULT_CLIP_EPSILON),
                beta_kl: opts.beta_kl.or(file.beta_kl).unwrap_or(DEFAULT_BETA_KL),
            },
            scorer: opts
                .scorer
                .clone()
                .or(file.scorer)
                .unwrap_or_else(|| STUB_BACKEND.to_owned()),
            scorer_timeout: opts
                .scorer_timeout_ms
                .or(file.scorer_timeout_ms)
                .map_or(DEFAULT_TIMEOUT, Duration::from_millis),
            scorer_retries: opts.scorer_retries.or(file.scorer_retries).unwrap_or(DEFAULT_RETRIES),
        };
        cfg.check().map_err(input_error)?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let [w, h] = self.viewport;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            bail!("invalid viewport {w}x{h}");
        }
        if self.jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        if self.group_size == 0 {
            bail!("group size must be at least 1");
        }
        Ok(())
    }

    /// T for inputs that may carry their own count.
    pub fn frames_or(&self, manifest: Option<usize>) -> usize {
        self.frames.or(manifest).unwrap_or(DEFAULT_FRAMES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::resolve(&GlobalOpts::default()).unwrap();
        assert_eq!(cfg.viewport, [500.0, 500.0]);
        assert_eq!(cfg.frames_or(None), 24);
        assert_eq!(cfg.frames_or(Some(3)), 3);
        assert_eq!(cfg.weights, RewardWeights::default());
        assert_eq!(cfg.group_size, 8);
        assert_eq!(cfg.grpo.beta_kl, 0.01);
        assert_eq!(cfg.grpo.clip_epsilon, 0.2);
        assert_eq!(cfg.scorer, "stub");
        assert_eq!(cfg.server, None);
    }

    #[test]
    fn flags_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ssu.toml");
        std::fs::write(&path, "frames = 4\ngroup_size = 2\nbeta_kl = 0.5\nviewport = [100, 50]\n").unwrap();
        let opts = GlobalOpts {
            config: Some(path),
            group_size: Some(3),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&opts).unwrap();
        assert_eq!(cfg.frames, Some(4));
        assert_eq!(cfg.frames_or(Some(9)), 4);
        assert_eq!(cfg.group_size, 3);
        assert_eq!(cfg.grpo.beta_kl, 0.5);
        assert_eq!(cfg.viewport, [100.0, 50.0]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ssu.toml");
        std::fs::write(&path, "frame = 4\n").unwrap();
        let opts = GlobalOpts {
            config: Some(path),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&opts).is_err());
        let opts = GlobalOpts {
            jobs: Some(0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&opts).is_err());
    }

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("500x400"), Ok([500.0, 400.0]));
        assert_eq!(parse_pair("20,10.5"), Ok([20.0, 10.5]));
        assert!(parse_pair("500").is_err());
        assert!(parse_pair("0x5").is_err());
    }
}
