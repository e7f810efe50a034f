//! Result artifacts: loss CSVs, an SVG loss plot and a `meta.txt` summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::runner::{run_seed, ExperimentResult, LossTrace};
use crate::error::{Error, Result};

/// 17 significant digits; parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `epoch,run_1,…,run_R,mean`, one row per epoch (epochs numbered from 1).
pub fn csv_string(trace: &LossTrace) -> String {
    let mut out = String::from("epoch");
    for r in 1..=trace.runs.len() {
        let _ = write!(out, ",run_{r}");
    }
    out.push_str(",mean\n");
    for e in 0..trace.epochs() {
        let _ = write!(out, "{}", e + 1);
        for run in &trace.runs {
            let _ = write!(out, ",{}", format_float(run[e]));
        }
        let _ = writeln!(out, ",{}", format_float(trace.mean[e]));
    }
    out
}

pub fn write_csv(trace: &LossTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, csv_string(trace)).map_err(|e| Error::io(path, e))
}

/// All traces in one long-format table: `optimizer,epoch,run_1,…,run_R,mean`.
pub fn combined_csv_string(traces: &[LossTrace]) -> String {
    let runs = traces.iter().map(|t| t.runs.len()).max().unwrap_or(0);
    let mut out = String::from("optimizer,epoch");
    for r in 1..=runs {
        let _ = write!(out, ",run_{r}");
    }
    out.push_str(",mean\n");
    for t in traces {
        for line in csv_string(t).lines().skip(1) {
            let _ = writeln!(out, "{},{line}", t.optimizer);
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders each trace's mean series as a polyline on a log-scale loss axis.
pub fn svg_string(traces: &[(String, &LossTrace)]) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::Precondition("nothing to plot".into()));
    }
    let (width, height) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 180.0, 30.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let epochs = traces.iter().map(|(_, t)| t.epochs()).max().unwrap_or(1).max(1);
    let positive: Vec<f64> = traces
        .iter()
        .flat_map(|(_, t)| t.mean.iter().copied())
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    let floor = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    let ceil = positive.iter().copied().fold(floor, f64::max);
    let (mut lo, mut hi) = (floor.log10().floor(), ceil.log10().ceil());
    if hi - lo < 1.0 {
        lo -= 0.5;
        hi += 0.5;
    }

    let x_of = |epoch: usize| {
        if epochs == 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * (epoch - 1) as f64 / (epochs - 1) as f64
        }
    };
    let y_of = |v: f64| {
        let v = if v.is_finite() && v > 0.0 { v } else { floor };
        top + plot_h * (hi - v.log10()) / (hi - lo)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    // decade grid
    let mut decade = lo.ceil() as i32;
    while f64::from(decade) <= hi {
        let y = y_of(10f64.powi(decade));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"#,
            left - 6.0,
            y + 4.0
        );
        decade += 1;
    }
    for (e, label) in [(1, "1".to_string()), (epochs, epochs.to_string())] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            x_of(e),
            top + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Epochs</text>"#,
        left + plot_w / 2.0,
        height - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">Loss</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (k, (name, trace)) in traces.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = trace
            .mean
            .iter()
            .enumerate()
            .map(|(e, v)| format!("{:.2},{:.2}", x_of(e + 1), y_of(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 10.0 + 20.0 * k as f64;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            escape_xml(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_svg_plot(traces: &[(String, &LossTrace)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = svg_string(traces)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

pub fn meta_string(cfg: &ExperimentConfig, result: &ExperimentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment = {}", cfg.name);
    let _ = writeln!(s, "library_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "epochs = {}", cfg.epochs);
    let _ = writeln!(s, "runs = {}", cfg.runs);
    let _ = writeln!(s, "base_seed = {}", cfg.base_seed);
    let seeds: Vec<String> = (0..cfg.runs).map(|r| run_seed(cfg.base_seed, r).to_string()).collect();
    let _ = writeln!(s, "run_seeds = {}", seeds.join(","));
    if let Some(first) = result.traces.first() {
        let m = &first.meta;
        let _ = writeln!(s, "n = {}", m.n);
        let _ = writeln!(s, "L = {}", m.residual_len);
        let _ = writeln!(s, "B = {}", m.batches);
        let _ = writeln!(s, "gamma = {}", m.gamma);
        let _ = writeln!(s, "train_samples = {}", m.train_samples);
        let _ = writeln!(s, "dropped_per_epoch = {}", m.dropped_per_epoch);
    }
    for t in &result.traces {
        let h = &t.meta.hyper;
        let p = &t.optimizer;
        let _ = writeln!(s, "{p}.alpha = {}", h.alpha);
        let _ = writeln!(s, "{p}.delta = {}", h.delta);
        let _ = writeln!(s, "{p}.d_init = {}", h.d_init);
        let _ = writeln!(s, "{p}.lr = {}", h.lr);
        let _ = writeln!(s, "{p}.smw_mode = {:?}", h.smw_mode);
        let _ = writeln!(s, "{p}.steps = {:?}", t.meta.steps);
        let _ = writeln!(s, "{p}.final_mean_loss = {}", format_float(t.final_mean()));
        let _ = writeln!(s, "{p}.wall_time_s = {:.3}", t.meta.wall_time.as_secs_f64());
    }
    s
}

/// Writes `loss.csv`, one `loss_<optimizer>.csv` per trace, `plot.svg` and
/// `meta.txt` into `<out_dir>/<name>/`. Returns that directory.
pub fn write_artifacts(cfg: &ExperimentConfig, result: &ExperimentResult, out_dir: &Path) -> Result<PathBuf> {
    let dir = out_dir.join(&cfg.name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let combined = dir.join("loss.csv");
    fs::write(&combined, combined_csv_string(&result.traces)).map_err(|e| Error::io(&combined, e))?;
    for t in &result.traces {
        write_csv(t, dir.join(format!("loss_{}.csv", t.optimizer)))?;
    }
    let named: Vec<(String, &LossTrace)> = result.traces.iter().map(|t| (t.optimizer.clone(), t)).collect();
    render_svg_plot(&named, dir.join("plot.svg"))?;
    let meta = dir.join("meta.txt");
    fs::write(&meta, meta_string(cfg, result)).map_err(|e| Error::io(&meta, e))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::runner::TraceMeta;
    use crate::optim::HyperParams;
    use std::time::Duration;

    fn trace(runs: Vec<Vec<f64>>) -> LossTrace {
        let meta = TraceMeta {
            n: 3,
            residual_len: 2,
            batches: 1,
            gamma: 1.0,
            train_samples: 2,
            dropped_per_epoch: 0,
            hyper: HyperParams::default(),
            steps: vec![0; runs.len()],
            wall_time: Duration::ZERO,
        };
        LossTrace::from_runs("nlls1", runs, meta).unwrap()
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let t = trace(vec![vec![0.1, 1.0 / 3.0]]);
        let csv = csv_string(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "epoch,run_1,mean");
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v.to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn csv_mean_column() {
        let t = trace(vec![vec![1.0, 2.0], vec![3.0, 5.0], vec![2.0, 2.0]]);
        for line in csv_string(&t).lines().skip(1) {
            let vals: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            let (runs, mean) = vals.split_at(3);
            assert!((runs.iter().sum::<f64>() / 3.0 - mean[0]).abs() <= 1e-15 * mean[0]);
        }
    }

    #[test]
    fn combined_has_optimizer_column() {
        let t = trace(vec![vec![1.0, 2.0]]);
        let csv = combined_csv_string(std::slice::from_ref(&t));
        assert!(csv.starts_with("optimizer,epoch,run_1,mean\n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("nlls1,1,"));
    }

    #[test]
    fn svg_flat_line_and_errors() {
        let t = trace(vec![vec![1.0; 5]]);
        let svg = svg_string(&[("flat".to_string(), &t)]).unwrap();
        assert!(svg.starts_with("<svg"));
        let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = points.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
        assert!(svg_string(&[]).is_err());
    }
}
