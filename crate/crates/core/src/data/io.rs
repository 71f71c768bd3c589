use super::Dataset;
use crate::error::{Error, Result};
use crate::spline::TimeSeries;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// One JSONL line: `{"label": 1, "times": [...], "values": [[x or null, ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default)]
    pub label: usize,
    pub times: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Omitted when it equals the default (the last time, or 1 for a
    /// single record at time 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn default_horizon(times: &[f64]) -> f64 {
    match times.last() {
        Some(&t) if t > 0.0 => t,
        _ => 1.0,
    }
}

impl Record {
    pub fn from_series(ts: &TimeSeries, label: usize, id: Option<String>) -> Self {
        let horizon = (ts.horizon() != default_horizon(ts.times())).then_some(ts.horizon());
        Record {
            id,
            label,
            times: ts.times().to_vec(),
            values: ts.rows(),
            horizon,
        }
    }

    /// Validates the record; `line` is used in error messages.
    pub fn to_series(&self, line: usize) -> Result<TimeSeries> {
        if self.times.len() != self.values.len() {
            return Err(Error::Parse {
                line,
                msg: format!("{} times but {} value rows", self.times.len(), self.values.len()),
            });
        }
        if self.times.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty record".into(),
            });
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneTimes { line });
        }
        if self.times[0] < 0.0 {
            return Err(Error::Parse {
                line,
                msg: "times must be non-negative".into(),
            });
        }
        let horizon = self.horizon.unwrap_or_else(|| default_horizon(&self.times));
        TimeSeries::new(self.times.clone(), self.values.clone(), horizon).map_err(|e| match e {
            Error::InvalidSeries(msg) if msg.contains("strictly increasing") => Error::NonMonotoneTimes { line },
            other => Error::Parse {
                line,
                msg: other.to_string(),
            },
        })
    }
}

/// Parses JSONL records, skipping blank lines. Line numbers are 1-based.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<(usize, Record)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        out.push((line_no, rec));
    }
    Ok(out)
}

pub fn parse_jsonl<R: Read>(reader: R) -> Result<Dataset> {
    let records = read_records(reader)?;
    let samples = records
        .iter()
        .map(|(line, r)| r.to_series(*line).map(|ts| (ts, r.label)))
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no records".into(),
        });
    }
    Dataset::new(samples, None)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_jsonl(f)
}

pub fn records_to_jsonl(records: &[Record]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn to_jsonl(ds: &Dataset) -> Result<String> {
    let records: Vec<Record> = ds
        .samples()
        .iter()
        .map(|(ts, y)| Record::from_series(ts, *y, None))
        .collect();
    records_to_jsonl(&records)
}

pub fn save_jsonl(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_jsonl(ds)?)?;
    Ok(())
}

fn parse_missing(s: &str) -> Option<&str> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "" | "null" | "na" | "nan" => None,
        _ => Some(t),
    }
}

/// Long-format CSV with header `series_id,time,channel,value[,label]`.
/// Channels given as integers are used as indices; otherwise names are
/// numbered in order of first appearance. Empty, `NA`, `NaN` and `null`
/// values are missing.
pub fn parse_csv_long<R: Read>(reader: R) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_id), Some(c_time), Some(c_chan), Some(c_val)) =
        (col("series_id"), col("time"), col("channel"), col("value"))
    else {
        return Err(Error::Parse {
            line: 1,
            msg: "header must contain series_id,time,channel,value".into(),
        });
    };
    let c_label = col("label");

    struct Row {
        line: usize,
        time: f64,
        channel: String,
        value: Option<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, (Vec<Row>, Option<(usize, usize)>)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |msg: String| Error::Parse { line, msg };
        let time: f64 = field(c_time)
            .parse()
            .map_err(|_| bad(format!("bad time `{}`", field(c_time))))?;
        if !time.is_finite() {
            return Err(bad("non-finite time".into()));
        }
        let value = match parse_missing(field(c_val)) {
            None => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("bad value `{v}`")))?,
            ),
        };
        let id = field(c_id).to_string();
        let entry = series.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (Vec::new(), None)
        });
        if let Some(cl) = c_label {
            let label: usize = field(cl)
                .parse()
                .map_err(|_| bad(format!("bad label `{}`", field(cl))))?;
            match entry.1 {
                Some((prev, _)) if prev != label => {
                    return Err(bad(format!("series `{id}` has labels {prev} and {label}")))
                }
                _ => entry.1 = Some((label, line)),
            }
        }
        entry.0.push(Row {
            line,
            time,
            channel: field(c_chan).to_string(),
            value,
        });
    }
    if order.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }

    let names: Vec<&str> = {
        let mut seen: Vec<&str> = Vec::new();
        for id in &order {
            for r in &series[id].0 {
                if !seen.contains(&r.channel.as_str()) {
                    seen.push(&r.channel);
                }
            }
        }
        seen
    };
    let numeric: Option<Vec<usize>> = names.iter().map(|n| n.parse().ok()).collect();
    let (channels, index_of): (usize, Box<dyn Fn(&str) -> usize>) = match numeric {
        Some(ix) => (ix.iter().max().unwrap() + 1, Box::new(|n: &str| n.parse().unwrap())),
        None => {
            let owned: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            (owned.len(), Box::new(move |n: &str| owned.iter().position(|o| o == n).unwrap()))
        }
    };

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let (mut rows, label) = series.remove(&id).expect("series present");
        rows.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<Option<f64>>> = Vec::new();
        for r in rows {
            if times.last() != Some(&r.time) {
                times.push(r.time);
                values.push(vec![None; channels]);
            }
            let c = index_of(&r.channel);
            let slot = &mut values.last_mut().unwrap()[c];
            if slot.is_some() {
                return Err(Error::Parse {
                    line: r.line,
                    msg: format!("duplicate entry for series `{id}` time {} channel {}", r.time, r.channel),
                });
            }
            *slot = r.value;
        }
        let rec = Record {
            id: Some(id),
            label: label.map(|l| l.0).unwrap_or(0),
            times,
            values,
            horizon: None,
        };
        rec.to_series(label.map(|l| l.1).unwrap_or(0))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_csv_long(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_csv_long(f)
}
