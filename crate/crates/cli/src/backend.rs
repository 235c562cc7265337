//! Runs pipeline requests in process or against a codec service. Both
//! paths go through the same request types, so their outputs agree.

use anyhow::Result;
use ssu_client::{scorer_for, ServiceClient};
use ssu_core::api::{self, *};
use ssu_core::reward::{RewardReport, SemanticScorer};
use ssu_core::ssu::TokenStats;
use ssu_core::validate::{CotReport, ValidityVerdict};

use crate::config::RunConfig;
use crate::exit::{from_api, from_client, input_error};

pub enum Backend {
    Local { scorer: Option<Box<dyn SemanticScorer>> },
    Remote(ServiceClient),
}

macro_rules! stateless {
    ($($name:ident: $local:path, $req:ty => $res:ty;)*) => {
        $(
            pub fn $name(&self, req: &$req) -> Result<$res> {
                match self {
                    Backend::Local { .. } => $local(req).map_err(from_api),
                    Backend::Remote(c) => c.$name(req).map_err(from_client),
                }
            }
        )*
    };
}

macro_rules! scored {
    ($($name:ident: $local:path, $req:ty => $res:ty;)*) => {
        $(
            pub fn $name(&self, req: &$req) -> Result<$res> {
                match self {
                    Backend::Local { scorer } => {
                        let scorer = scorer.as_deref().expect("backend built with a scorer");
                        $local(req, scorer).map_err(from_api)
                    }
                    Backend::Remote(c) => c.$name(req).map_err(from_client),
                }
            }
        )*
    };
}

impl Backend {
    /// `with_scorer` builds the local scorer; remote runs use the
    /// service's own scorer.
    pub fn new(cfg: &RunConfig, with_scorer: bool) -> Result<Self> {
        if let Some(url) = &cfg.server {
            tracing::debug!(%url, "using remote service");
            let timeout = cfg.scorer_timeout.max(std::time::Duration::from_secs(30));
            return Ok(Backend::Remote(ServiceClient::new(url, timeout).map_err(from_client)?));
        }
        let scorer = if with_scorer {
            Some(scorer_for(&cfg.scorer, cfg.scorer_timeout, cfg.scorer_retries).map_err(input_error)?)
        } else {
            None
        };
        Ok(Backend::Local { scorer })
    }

    stateless! {
        canonicalize: api::canonicalize_svg, CanonicalizeRequest => CanonicalizeResponse;
        encode: api::encode, EncodeRequest => EncodeResponse;
        decode: api::decode, DecodeRequest => DecodeResponse;
        validate: api::validate, ValidateRequest => ValidityVerdict;
        cot: api::cot, CotRequest => CotReport;
        stats: api::stats, StatsRequest => TokenStats;
        render: api::render, RenderRequest => RenderResponse;
    }

    scored! {
        reward: api::reward, RewardRequest => RewardReport;
        grpo: api::grpo, GrpoRequest => GrpoResponse;
    }
}
