use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use serde::Serialize;
use splinenet::data::read_records;
use splinenet::{fit, FitKind};
use std::io::Read;

#[derive(Debug, Clone, Serialize)]
pub struct ImputeConfig {
    pub fit: FitKind,
    /// Shared query times; `None` uses each sample's own time stamps.
    pub times: Option<Vec<f64>>,
}

/// Fits every record and evaluates all channels at the query times.
/// Returns CSV with columns `series_id,time,channel,value` after a manifest
/// comment line. Records without an id are named by their line number.
pub fn impute<R: Read>(input: R, source: &str, cfg: &ImputeConfig) -> CliResult<String> {
    let records = read_records(input).map_err(|e| input_err(source, e))?;
    let manifest = Manifest::new("impute", cfg).input("data", source);
    let mut out = manifest.csv_comment();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series_id", "time", "channel", "value"]).expect("in-memory write");
    for (line, rec) in &records {
        let ts = rec.to_series(*line).map_err(|e| input_err(source, e))?;
        let s = fit(&ts, cfg.fit).map_err(|e| input_err(source, e))?;
        let id = rec.id.clone().unwrap_or_else(|| line.to_string());
        let times = cfg.times.as_deref().unwrap_or(ts.times());
        for &t in times {
            for (c, v) in s.eval(t).into_iter().enumerate() {
                w.write_record([id.as_str(), &t.to_string(), &c.to_string(), &v.to_string()])
                    .expect("in-memory write");
            }
        }
    }
    let body = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("csv is utf-8"));
    Ok(out)
}

fn input_err(source: &str, e: splinenet::Error) -> CliError {
    CliError::Input {
        path: source.into(),
        source: e,
    }
}
