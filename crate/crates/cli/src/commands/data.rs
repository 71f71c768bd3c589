use crate::error::{CliError, CliResult};
use crate::manifest::{write_text, Manifest};
use splinenet::data::{load_csv_long, records_to_jsonl, synth_shapes, to_jsonl, SynthConfig};
use std::path::Path;

/// Writes the synthetic shapes dataset as JSONL plus a manifest sidecar.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> CliResult<usize> {
    let ds = synth_shapes(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    write_text(out, &to_jsonl(&ds)?)?;
    Manifest::new("synth", cfg).write_sidecar(out)?;
    Ok(ds.len())
}

/// Converts a long-format CSV (`series_id,time,channel,value[,label]`) to JSONL.
pub fn cmd_import_csv(input: &Path, out: &Path) -> CliResult<usize> {
    let records = load_csv_long(input).map_err(|source| CliError::Input {
        path: input.display().to_string(),
        source,
    })?;
    write_text(out, &records_to_jsonl(&records)?)?;
    Manifest::new("import-csv", &serde_json::json!({}))
        .input("csv", input.display().to_string())
        .write_sidecar(out)?;
    Ok(records.len())
}
