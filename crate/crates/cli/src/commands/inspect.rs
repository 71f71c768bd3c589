use super::train::load_checkpoint;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_text, Manifest};
use crate::pipeline::{fit_subset, subset_indices, DataSource, Subset};
use serde::Serialize;
use splinenet::data::apply_normalization;
use splinenet::layers::{integrated_distance, kernel_apply, KernelBank, KernelMode};
use splinenet::model::thread_pool;
use splinenet::Spline;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

/// Points per kernel channel in the CSV and SVG output, on `i / 255`.
pub const GRID_POINTS: usize = 256;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Default)]
pub struct InspectOptions {
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub subset: Subset,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelScore {
    pub block: usize,
    pub kernel: usize,
    pub class: usize,
    pub mean_distance: f64,
    /// 1-based position of this kernel among the block's kernels for the class.
    pub kernel_rank: usize,
    /// 1-based position of this class among the classes for the kernel.
    pub class_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InspectReport {
    pub manifest: Manifest,
    pub svg_files: Vec<String>,
    pub csv_file: String,
    pub ranking_file: String,
    pub scores: Vec<KernelScore>,
}

impl fmt::Display for InspectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wrote {} kernel plots, {} and {}", self.svg_files.len(), self.csv_file, self.ranking_file)?;
        let mut keys: Vec<(usize, usize)> = self.scores.iter().map(|s| (s.block, s.class)).collect();
        keys.dedup();
        for (b, c) in keys {
            let mut row: Vec<&KernelScore> = self.scores.iter().filter(|s| s.block == b && s.class == c).collect();
            row.sort_by_key(|s| s.kernel_rank);
            let list: Vec<String> = row.iter().map(|s| format!("k{} {:.4}", s.kernel, s.mean_distance)).collect();
            writeln!(f, "block {b} class {c}: {}", list.join(", "))?;
        }
        Ok(())
    }
}

fn grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / (GRID_POINTS - 1) as f64).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A line plot of every channel of `kernel` over the unit span.
pub fn kernel_svg(kernel: &Spline, title: &str, manifest: &Manifest) -> String {
    let (w, h, m) = (480.0, 260.0, 40.0);
    let ts = grid();
    let curves: Vec<Vec<f64>> = (0..kernel.channels())
        .map(|c| ts.iter().map(|&t| kernel.eval_channel(c, t)).collect())
        .collect();
    let (mut lo, mut hi) = curves
        .iter()
        .flatten()
        .fold((0.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let x = |t: f64| m + t * (w - 2.0 * m);
    let y = |v: f64| h - m - (v - lo) / (hi - lo) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, "<metadata>{}</metadata>", escape(&manifest.compact()));
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<line class="zero" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="12">{}</text>"#, m - 12.0, escape(title));
    let _ = writeln!(s, r#"<text x="4" y="{:.2}" font-size="10">{hi:.3}</text>"#, m + 4.0);
    let _ = writeln!(s, r#"<text x="4" y="{:.2}" font-size="10">{lo:.3}</text>"#, h - m);
    let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="10">0</text>"#, h - m + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">1</text>"#, w - m - 4.0, h - m + 14.0);
    for (c, curve) in curves.iter().enumerate() {
        let pts: Vec<String> = ts.iter().zip(curve).map(|(&t, &v)| format!("{:.2},{:.2}", x(t), y(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="channel" data-channel="{c}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[c % COLORS.len()],
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Dense-grid evaluations of every kernel: `block,kernel,channel,t,value`.
pub fn kernel_csv(banks: &[KernelBank], manifest: &Manifest) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["block", "kernel", "channel", "t", "value"]).expect("in-memory write");
    let ts = grid();
    for (b, bank) in banks.iter().enumerate() {
        for k in 0..bank.count {
            let kern = bank.kernel(k);
            for c in 0..bank.channels {
                for &t in &ts {
                    let v = kern.eval_channel(c, t);
                    w.write_record([b.to_string(), k.to_string(), c.to_string(), t.to_string(), v.to_string()])
                        .expect("in-memory write");
                }
            }
        }
    }
    manifest.csv_comment() + &String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Mean integrated distance `[block][kernel][class]`; `None` for classes
/// without samples.
pub fn mean_distances(
    model: &splinenet::model::SplineNet,
    banks: &[KernelBank],
    data: &[(Spline, usize)],
    classes: usize,
) -> CliResult<Vec<Vec<Vec<Option<f64>>>>> {
    let mut sums: Vec<Vec<Vec<f64>>> = banks.iter().map(|b| vec![vec![0.0; classes]; b.count]).collect();
    let mut counts = vec![0usize; classes];
    for chunk in data.chunks(64) {
        let splines: Vec<Spline> = chunk.iter().map(|e| e.0.clone()).collect();
        let inputs = model.kernel_layer_inputs(splines)?;
        for (b, (bank, layer_inputs)) in banks.iter().zip(&inputs).enumerate() {
            for (x, (_, y)) in layer_inputs.iter().zip(chunk) {
                let dist = integrated_distance(&kernel_apply(x, bank)?);
                for (k, d) in dist.into_iter().enumerate() {
                    sums[b][k][*y] += d;
                }
            }
        }
        for (_, y) in chunk {
            counts[*y] += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|per_kernel| {
            per_kernel
                .into_iter()
                .map(|per_class| {
                    per_class
                        .into_iter()
                        .zip(&counts)
                        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
                        .collect()
                })
                .collect()
        })
        .collect())
}

fn rank_of(values: &[f64], i: usize) -> usize {
    1 + values
        .iter()
        .enumerate()
        .filter(|&(j, v)| v.total_cmp(&values[i]).is_lt() || (*v == values[i] && j < i))
        .count()
}

pub fn scores(means: &[Vec<Vec<Option<f64>>>]) -> Vec<KernelScore> {
    let mut out = Vec::new();
    for (b, per_kernel) in means.iter().enumerate() {
        let classes = per_kernel.first().map_or(0, Vec::len);
        for class in 0..classes {
            let col: Vec<f64> = per_kernel.iter().map(|k| k[class].unwrap_or(f64::NAN)).collect();
            if col.iter().any(|v| v.is_nan()) {
                continue;
            }
            for (k, per_class) in per_kernel.iter().enumerate() {
                let present: Vec<f64> = per_class.iter().flatten().copied().collect();
                let pos = per_class[..class].iter().flatten().count();
                out.push(KernelScore {
                    block: b,
                    kernel: k,
                    class,
                    mean_distance: col[k],
                    kernel_rank: rank_of(&col, k),
                    class_rank: rank_of(&present, pos),
                });
            }
        }
    }
    out
}

fn ranking_csv(scores: &[KernelScore], manifest: &Manifest) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in scores {
        w.serialize(s).expect("in-memory write");
    }
    manifest.csv_comment() + &String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn distance_banks(banks: Vec<KernelBank>) -> CliResult<Vec<KernelBank>> {
    if banks.is_empty() || banks.iter().any(|b| b.mode != KernelMode::Distance) {
        return Err(CliError::NoDistanceKernels);
    }
    Ok(banks)
}

/// Writes `block{b}_kernel{k}.svg`, `kernels.csv` and `ranking.csv` into
/// the output directory.
pub fn cmd_inspect_kernels(checkpoint: &Path, opts: &InspectOptions) -> CliResult<InspectReport> {
    let (model, tm) = load_checkpoint(checkpoint)?;
    let banks = distance_banks(model.kernel_banks())?;
    let mut cfg = tm.config()?;
    if let Some(t) = opts.threads {
        cfg.threads = t;
    }
    let cfg = cfg.finish()?;
    let source = opts.data.as_deref().map_or_else(|| tm.source(), |p| DataSource::Jsonl(p.to_path_buf()));
    let manifest = Manifest::new("inspect-kernels", &cfg)
        .input("checkpoint", checkpoint.display().to_string())
        .input("data", source.describe())
        .input("subset", format!("{:?}", opts.subset).to_lowercase());

    let dir = &opts.out_dir;
    let mut svg_files = Vec::new();
    for (b, bank) in banks.iter().enumerate() {
        for k in 0..bank.count {
            let path = dir.join(format!("block{b}_kernel{k}.svg"));
            write_text(&path, &kernel_svg(&bank.kernel(k), &format!("block {b} kernel {k}"), &manifest))?;
            svg_files.push(path.display().to_string());
        }
    }
    let csv_path = dir.join("kernels.csv");
    write_text(&csv_path, &kernel_csv(&banks, &manifest))?;

    let ds = source.load(&cfg)?;
    let idx = subset_indices(&ds, &cfg, opts.subset)?;
    let normed = apply_normalization(&ds, tm.run.normalization.clone())?;
    let pool = thread_pool(cfg.threads)?;
    let means = pool.install(|| {
        let data = fit_subset(&normed, &idx, &cfg)?;
        mean_distances(&model, &banks, &data, ds.classes())
    })?;
    let scores = scores(&means);
    let ranking_path = dir.join("ranking.csv");
    write_text(&ranking_path, &ranking_csv(&scores, &manifest))?;
    Ok(InspectReport {
        manifest,
        svg_files,
        csv_file: csv_path.display().to_string(),
        ranking_file: ranking_path.display().to_string(),
        scores,
    })
}
