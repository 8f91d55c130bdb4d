//! File formats, model scoring, datasets, batch evaluation and the command
//! line front end built on [`guidecam_core`].
//!
//! ```no_run
//! use std::path::Path;
//!
//! use guidecam::bundle::load_bundle;
//! use guidecam_core::{guided_cam, postprocess, PostprocessConfig};
//!
//! fn main() -> Result<(), guidecam::Error> {
//!     let bundle = load_bundle(Path::new("data/cat.bundle"))?;
//!     let raw = guided_cam(bundle.features(), bundle.gradients())?;
//!     let (h, w) = bundle.image_dims();
//!     let map = postprocess(&raw, &PostprocessConfig::new(h, w))?;
//!     println!("peak at {:?}", map.grid().argmax());
//!     Ok(())
//! }
//! ```

pub mod bundle;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod npy;
pub mod render;
pub mod report;

pub use error::{Error, Result};
