use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{ledger, EnergyLedger};
use crate::error::{Error, Result};
use crate::evolve::SnapshotStream;
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::spectral::Dst;

/// Columns of the per-run ledger CSV, in file order.
pub const LEDGER_HEADER: &str = "t,M,E,E1,E2,calE1,calE2,pot6,L10,tail_mass";

/// Manifest written next to the run artifacts: the config echo plus a
/// SHA-256 per emitted file, so reruns can be compared byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub snapshot_count: usize,
    pub step_count: u64,
    pub checksums: BTreeMap<String, String>,
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Renders the ledger CSV (17 significant digits per value).
pub fn ledger_csv(rows: &[(EnergyLedger, f64, f64)]) -> String {
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for (l, l10, tail) in rows {
        let cols = [
            l.time, l.mass, l.energy, l.e1, l.e2, l.cal_e1, l.cal_e2, l.pot6, *l10, *tail,
        ];
        let line: Vec<String> = cols.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn snapshot_csv(field: &RadialField) -> String {
    let mut out = String::from("r,re_w,im_w\n");
    for (w, &r) in field.w().iter().zip(field.grid().r()) {
        out.push_str(&fmt17(r));
        out.push(',');
        out.push_str(&fmt17(w.re));
        out.push(',');
        out.push_str(&fmt17(w.im));
        out.push('\n');
    }
    out
}

/// Writes a complete run directory: `manifest.json`, `ledger.csv`, and one
/// `snapshots/snap_NNNNNN.csv` per snapshot. Returns the manifest.
pub fn write_run_dir(
    dir: &Path,
    config: &RunConfig,
    stream: &SnapshotStream,
    dst: &Dst,
) -> Result<Manifest> {
    fs::create_dir_all(dir.join("snapshots"))?;
    let mut checksums = BTreeMap::new();

    let rows: Vec<(EnergyLedger, f64, f64)> = stream
        .snapshots()
        .iter()
        .zip(stream.tail_trace())
        .map(|(s, &tail)| (ledger(dst, s), s.lp_norm(10.0), tail))
        .collect();
    let ledger_text = ledger_csv(&rows);
    fs::write(dir.join("ledger.csv"), &ledger_text)?;
    checksums.insert("ledger.csv".into(), sha256_hex(ledger_text.as_bytes()));

    for (i, snap) in stream.snapshots().iter().enumerate() {
        let name = format!("snapshots/snap_{i:06}.csv");
        let text = snapshot_csv(snap);
        fs::write(dir.join(&name), &text)?;
        checksums.insert(name, sha256_hex(text.as_bytes()));
    }

    let manifest = Manifest {
        config: config.clone(),
        snapshot_count: stream.len(),
        step_count: stream.step_count(),
        checksums,
    };
    let manifest_text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), manifest_text)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Integrity(format!("missing manifest {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Recomputes every checksum in the manifest; any mismatch or missing file
/// is an integrity error.
pub fn verify_integrity(dir: &Path) -> Result<Manifest> {
    let manifest = read_manifest(dir)?;
    for (name, expected) in &manifest.checksums {
        let bytes = fs::read(dir.join(name))
            .map_err(|e| Error::Integrity(format!("missing artifact {name}: {e}")))?;
        let got = sha256_hex(&bytes);
        if &got != expected {
            return Err(Error::Integrity(format!(
                "checksum mismatch for {name}: {got} != {expected}"
            )));
        }
    }
    Ok(manifest)
}

/// Parsed ledger row.
#[derive(Debug, Clone, Copy)]
pub struct LedgerRow {
    pub ledger: EnergyLedger,
    pub l10: f64,
    pub tail_mass: f64,
}

pub fn read_ledger(dir: &Path) -> Result<Vec<LedgerRow>> {
    let text = fs::read_to_string(dir.join("ledger.csv"))
        .map_err(|e| Error::Integrity(format!("missing ledger.csv: {e}")))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == LEDGER_HEADER => {}
        other => {
            return Err(Error::Integrity(format!(
                "bad ledger header: {other:?} (expected {LEDGER_HEADER})"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Integrity(format!("ledger row {i}: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 10 {
            return Err(Error::Integrity(format!(
                "ledger row {i}: expected 10 columns, got {}",
                vals.len()
            )));
        }
        rows.push(LedgerRow {
            ledger: EnergyLedger {
                time: vals[0],
                mass: vals[1],
                energy: vals[2],
                e1: vals[3],
                e2: vals[4],
                cal_e1: vals[5],
                cal_e2: vals[6],
                pot6: vals[7],
            },
            l10: vals[8],
            tail_mass: vals[9],
        });
    }
    Ok(rows)
}

/// Loads one snapshot file back into a field on the given grid.
pub fn read_snapshot(path: &Path, grid: &Arc<RadialGrid>, time: f64) -> Result<RadialField> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Integrity(format!("missing snapshot {}: {e}", path.display())))?;
    let mut w = Vec::with_capacity(grid.n());
    for (i, line) in text.lines().skip(1).enumerate() {
        let mut parts = line.split(',');
        let _r = parts.next();
        let re: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Integrity(format!("snapshot row {i}: bad re_w")))?;
        let im: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Integrity(format!("snapshot row {i}: bad im_w")))?;
        w.push(Complex64::new(re, im));
    }
    RadialField::from_samples(grid.clone(), w, time)
}

/// Lists snapshot paths of a run directory in index order.
pub fn snapshot_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let snap_dir = dir.join("snapshots");
    let mut paths: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .map_err(|e| Error::Integrity(format!("missing snapshots dir: {e}")))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Reassembles a stream from a run directory (grid from the manifest config,
/// times from the ledger).
pub fn read_stream(dir: &Path) -> Result<(Manifest, SnapshotStream)> {
    let manifest = read_manifest(dir)?;
    let rows = read_ledger(dir)?;
    let grid = RadialGrid::new(manifest.config.r_max, manifest.config.n)?;
    let paths = snapshot_paths(dir)?;
    if paths.len() != rows.len() {
        return Err(Error::Integrity(format!(
            "{} snapshots vs {} ledger rows",
            paths.len(),
            rows.len()
        )));
    }
    let mut fields = Vec::with_capacity(paths.len());
    for (path, row) in paths.iter().zip(&rows) {
        fields.push(read_snapshot(path, &grid, row.ledger.time)?);
    }
    let stream =
        SnapshotStream::synthetic(fields, manifest.config.dt, manifest.config.snapshot_stride);
    Ok((manifest, stream))
}
