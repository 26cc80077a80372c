use std::path::{Path, PathBuf};

use crate::grpo::TrainingLog;
use crate::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Line chart of one series against iteration. A single point is drawn as a
/// marker with no line. Output depends only on the inputs.
pub fn render_svg(title: &str, xs: &[f64], ys: &[f64]) -> String {
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n\
         <line class=\"axis\" x1=\"{MARGIN}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line class=\"axis\" x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{b}\" stroke=\"black\"/>\n",
        W / 2.0,
        b = H - MARGIN,
        r = W - MARGIN,
    );
    for (v, y) in [(y0, H - MARGIN), (y1, MARGIN)] {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">{v:.4}</text>\n",
            MARGIN - 4.0,
            y + 3.0
        ));
    }
    for (v, x) in [(x0, MARGIN), (x1, W - MARGIN)] {
        out.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">{v}</text>\n",
            H - MARGIN + 14.0
        ));
    }
    if xs.len() == 1 {
        out.push_str(&format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n", px(xs[0]), py(ys[0])));
    } else if !xs.is_empty() {
        let points: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Finite plotting range; flat or empty series get a unit-wide window.
fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Writes `training_log.csv` plus `<metric>.csv` and `<metric>.svg` for
/// each tracked series. Returns the written paths in order.
pub fn emit_curves(log: &TrainingLog, dir: &Path) -> Result<Vec<PathBuf>> {
    if log.records.is_empty() {
        return Err(Error::InvalidArgument("cannot plot an empty training log".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    write("training_log.csv".into(), log.to_csv())?;
    let xs: Vec<f64> = log.records.iter().map(|r| r.iteration as f64).collect();
    for (name, ys) in log.series() {
        let mut csv = format!("iteration,{name}\n");
        for (r, y) in log.records.iter().zip(&ys) {
            csv.push_str(&format!("{},{y:.6}\n", r.iteration));
        }
        write(format!("{name}.csv"), csv)?;
        write(format!("{name}.svg"), render_svg(name, &xs, &ys))?;
    }
    Ok(written)
}
