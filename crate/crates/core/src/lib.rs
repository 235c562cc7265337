//! Structure-preserving codec and evaluation harness for SVG animations.
//!
//! An animation is an initial document plus, for every later frame, the
//! sparse set of attribute values that changed on persistently identified
//! nodes. This crate parses and canonicalizes SVG, extracts and applies
//! those updates, serializes them as a compact token stream, validates
//! untrusted streams, rasterizes frames for image metrics, and evaluates
//! the hybrid reward and group-relative policy objective used to train
//! stream generators.

pub mod fsutil;
pub mod numfmt;
pub mod path;
pub mod svg;
pub mod ssu;
pub mod color;
pub mod raster;
pub mod reward;
pub mod validate;
pub mod corpus;
pub mod api;
