//! CSV and JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{CurvePoint, DimScanRow, SweepGrid};
use crate::dynamics::StepDiagnostics;
use crate::error::Result;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

pub fn trajectory_csv(steps: &[StepDiagnostics]) -> Result<Vec<u8>> {
    csv_bytes(&StepDiagnostics::CSV_COLUMNS, |w| {
        for s in steps {
            let v = s.csv_values();
            let mut row = vec![s.k.to_string()];
            row.extend(v[1..].iter().map(|x| fmt_f64(*x)));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

pub const SWEEP_COLUMNS: [&str; 6] = ["eps_a", "eps", "final_loss", "eps_hat", "color", "status"];

pub fn sweep_csv(g: &SweepGrid) -> Result<Vec<u8>> {
    csv_bytes(&SWEEP_COLUMNS, |w| {
        for c in &g.cells {
            w.write_record([
                fmt_f64(c.eps_a),
                fmt_f64(c.eps),
                fmt_f64(c.final_loss_bngd),
                fmt_f64(c.eps_hat_final),
                c.color.name().to_string(),
                c.status.clone(),
            ])?;
        }
        Ok(())
    })
}

pub fn curve_csv(points: &[CurvePoint]) -> Result<Vec<u8>> {
    csv_bytes(&["eps", "eps_hat"], |w| {
        for p in points {
            w.write_record([fmt_f64(p.eps), fmt_f64(p.eps_hat)])?;
        }
        Ok(())
    })
}

pub const DIM_SCAN_COLUMNS: [&str; 10] = [
    "d",
    "n_runs",
    "omega_band",
    "band_empty",
    "omega_measured",
    "omega_pred",
    "beta_bar",
    "lower_bound_generic",
    "lower_bound_arithmetic",
    "geometric_half_change",
];

pub fn dim_scan_csv(rows: &[DimScanRow]) -> Result<Vec<u8>> {
    csv_bytes(&DIM_SCAN_COLUMNS, |w| {
        for r in rows {
            w.write_record([
                r.d.to_string(),
                r.n_runs.to_string(),
                fmt_f64(r.omega_band),
                r.band_empty.to_string(),
                fmt_f64(r.omega_measured),
                fmt_f64(r.omega_pred),
                fmt_f64(r.estimate.beta_bar),
                fmt_f64(r.estimate.lower_bound_generic),
                r.estimate.lower_bound_arithmetic.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.estimate.geometric_half_change),
            ])?;
        }
        Ok(())
    })
}

/// Long form: one row per `(d, ε)`.
pub fn dim_scan_curves_csv(rows: &[DimScanRow]) -> Result<Vec<u8>> {
    csv_bytes(&["d", "eps", "eps_hat"], |w| {
        for r in rows {
            for p in &r.curve {
                w.write_record([r.d.to_string(), fmt_f64(p.eps), fmt_f64(p.eps_hat)])?;
            }
        }
        Ok(())
    })
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
