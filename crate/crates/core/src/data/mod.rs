//! Feature sets, the AVF1 file format, stratified splitting and synthetic
//! feature generation.

mod features;
mod format;
pub mod rng;
mod split;
mod synth;

pub use features::{FeatureSet, UNLABELED};
pub use format::{
    encode_features, parse_features, read_csv, read_features, write_features, AVF1_MAGIC,
    AVF1_VERSION,
};
pub use split::split;
pub use synth::{synth_id, synth_ood, OodKind, SynthSpec};
