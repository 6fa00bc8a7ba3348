//! Human-readable run summaries and plot-ready histogram files.

use rro::{Error, Result};
use std::path::Path;

/// Print the summary table and write `hist_*.csv` histogram files (bin
/// edges and counts, 50 bins) for every wealth sample file in the run dir.
pub fn report(dir: &Path) -> Result<String> {
    let summary_path = dir.join("summary.csv");
    let text = std::fs::read_to_string(&summary_path).map_err(|e| Error::Parse {
        what: format!("run directory {}", dir.display()),
        why: format!("cannot read summary.csv: {e}"),
    })?;
    let mut out = String::new();
    out.push_str(&format!("run: {}\n", dir.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').collect();
    out.push_str(&format!(
        "{:<24} {:>10} {:>9} {:>11} {:>11} {:>11} {:>6} {:>7} {:>10}\n",
        "distribution", "epsilon", "p_weight", "cvar_alpha", "ute_beta", "mean", "p", "iters", "converged"
    ));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            continue;
        }
        let fmt3 = |s: &str| {
            s.parse::<f64>()
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|_| s.to_string())
        };
        out.push_str(&format!(
            "{:<24} {:>10} {:>9} {:>11} {:>11} {:>11} {:>6} {:>7} {:>10}\n",
            f[0],
            f[1],
            f[2],
            fmt3(f[3]),
            fmt3(f[4]),
            fmt3(f[5]),
            f[6],
            f[7],
            f[8]
        ));
    }

    for name in ["wealth_policy", "wealth_worstcase"] {
        let path = dir.join(format!("{name}.csv"));
        if !path.exists() {
            continue;
        }
        let values = read_samples(&path)?;
        write_histogram(&dir.join(format!("hist_{name}.csv")), &values)?;
        out.push_str(&format!(
            "wrote hist_{name}.csv ({} samples)\n",
            values.len()
        ));
    }
    Ok(out)
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse().map_err(|_| Error::Parse {
                what: path.display().to_string(),
                why: format!("bad sample `{l}`"),
            })
        })
        .collect()
}

fn write_histogram(path: &Path, values: &[f64]) -> Result<()> {
    use std::io::Write;
    let bins = 50usize;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "bin_lo,bin_hi,count")?;
    for (k, c) in counts.iter().enumerate() {
        let blo = lo + k as f64 * width;
        writeln!(f, "{},{},{}", blo, blo + width, c)?;
    }
    Ok(())
}
