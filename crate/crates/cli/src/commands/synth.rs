use std::path::Path;

use olsr_core::data::{encode_features, synth_id, synth_ood, OodKind};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::write_atomic;

/// `kind = None` writes the labeled ID set; OoD sets reuse the ID geometry
/// through the shared cluster seed and are unlabeled.
pub fn run(cfg: &RunConfig, kind: Option<OodKind>, out: &Path) -> CliResult<()> {
    let set = match kind {
        None => synth_id(&cfg.synth)?,
        Some(_) => synth_ood(&cfg.synth, &cfg.synth)?,
    };
    write_atomic(out, &encode_features(&set))?;
    log::info!(
        "wrote {} samples (H={}) to {}",
        set.len(),
        set.dim(),
        out.display()
    );
    Ok(())
}
