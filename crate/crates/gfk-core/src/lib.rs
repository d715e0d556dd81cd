//! Gaze-fusion kit for lung-CT screening studies.
//!
//! The crate turns recorded eye-tracker sessions over chest CT volumes into
//! per-voxel attention maps, scores radiologist and CADe detections against
//! ground truth, and combines the two sources conditioned on where the reader
//! actually looked. A deterministic session simulator provides synthetic
//! studies with known ground truth for end-to-end validation.
//!
//! Module map:
//! - [`volume`]: CT volumes, MetaImage I/O, lung-mask estimation, left/right split.
//! - [`gaze`]: session log parsing and screen-to-voxel gaze mapping.
//! - [`attention`]: zoom-dependent Gaussian splatting into attention volumes.
//! - [`model`]: ground-truth nodules, marks, CADe candidates and their files.
//! - [`evaluation`]: detection matching, sensitivity/FP-per-scan, annotator union.
//! - [`analytics`]: search-strategy curves, reading/attention times, agreement tables.
//! - [`fusion`]: candidate post-processing and gaze-conditioned combination.
//! - [`stats`]: adapted McNemar and one-way ANOVA with in-repo tail functions.
//! - [`simulate`]: synthetic phantom + reading-session generator.
//! - [`plot`]: minimal SVG plotting for report output.

pub mod analytics;
pub mod attention;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod gaze;
pub mod model;
pub mod plot;
pub mod simulate;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
