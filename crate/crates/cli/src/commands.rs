use std::fs;
use std::path::{Path, PathBuf};

use rnls_core::{
    cauchy_trace, classify, decay_horizon, detect_bubble, evolve, galilean_apply, ledger_series,
    local_mass, morawetz, partition_intervals, pullback, spacetime_norm, trace_times,
    verify_concentration, verify_integrity, write_run_dir, BubbleReport, Detection, Dst, Error,
    Galilean, GalileanMethod, MultiplierBank, PropagatorPlan, RadialGrid, Result, RunConfig,
    C_DET_DEFAULT,
};
use serde::Serialize;

fn out_root() -> PathBuf {
    std::env::var_os("RNLS_OUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_dir_for(config_path: &Path, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            out_root().join(stem)
        }
    }
}

pub fn simulate(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(config_path)?;
    let cfg = RunConfig::from_json(&text)?;
    let dir = run_dir_for(config_path, out);
    let stream = evolve(&cfg)?;
    let dst = Dst::new(stream.first().grid());
    let manifest = write_run_dir(&dir, &cfg, &stream, &dst)?;
    println!(
        "wrote {} ({} snapshots, {} steps)",
        dir.display(),
        manifest.snapshot_count,
        manifest.step_count
    );
    Ok(())
}

struct Checks {
    failed: usize,
}

impl Checks {
    fn new() -> Self {
        Self { failed: 0 }
    }

    fn report(&mut self, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "pass" } else { "FAIL" };
        println!("{verdict}  {name}: {detail}");
        if !pass {
            self.failed += 1;
        }
    }
}

pub fn verify(run: &Path, suite: &str) -> Result<()> {
    let manifest = verify_integrity(run)?;
    let rows = rnls_core::read_ledger(run)?;
    if rows.is_empty() {
        return Err(Error::Integrity("empty ledger".into()));
    }
    let mut checks = Checks::new();
    let e1_0 = rows[0].ledger.e1.max(f64::MIN_POSITIVE);

    if matches!(suite, "conservation" | "all") {
        let m0 = rows[0].ledger.mass;
        let mass_drift = rows
            .iter()
            .map(|r| (r.ledger.mass - m0).abs() / m0)
            .fold(0.0_f64, f64::max);
        checks.report(
            "mass drift",
            mass_drift <= 1e-12,
            format!("{mass_drift:.3e} (<= 1e-12 relative)"),
        );
        let e0 = rows[0].ledger.energy;
        let e_drift = rows
            .iter()
            .map(|r| (r.ledger.energy - e0).abs())
            .fold(0.0_f64, f64::max)
            / e1_0;
        checks.report(
            "energy drift",
            e_drift <= 1e-5,
            format!("{e_drift:.3e} of E1(0) (<= 1e-5)"),
        );
    }

    if matches!(suite, "decay" | "all") {
        let ledgers: Vec<_> = rows.iter().map(|r| r.ledger).collect();
        let margins = rnls_core::decay_margin(&ledgers)?;
        let worst_margin = margins
            .iter()
            .map(|&(_, m)| m)
            .fold(f64::INFINITY, f64::min);
        checks.report(
            "decay margin",
            worst_margin >= -1e-6 * e1_0,
            format!("min {worst_margin:.3e} (>= {:.3e})", -1e-6 * e1_0),
        );
        if ledgers.len() >= 3 {
            let rep = rnls_core::energy_identity_residual(&ledgers)?;
            checks.report(
                "calE monotonicity",
                rep.cal_e1_worst_increase <= 1e-8 * e1_0
                    && rep.cal_e2_worst_increase <= 1e-8 * e1_0,
                format!(
                    "worst step changes {:.3e}, {:.3e} (<= {:.3e})",
                    rep.cal_e1_worst_increase,
                    rep.cal_e2_worst_increase,
                    1e-8 * e1_0
                ),
            );
            checks.report(
                "pseudo-energy identity",
                rep.max_abs_residual <= 1e-3,
                format!("residual {:.3e} (<= 1e-3)", rep.max_abs_residual),
            );
            checks.report(
                "H-norm bound",
                rep.h_bound_excess <= 1e-6,
                format!("excess {:.3e} (<= 1e-6)", rep.h_bound_excess),
            );
        }
    }

    if matches!(suite, "morawetz" | "galilean" | "all") {
        let (_, stream) = rnls_core::read_stream(run)?;
        let dst = Dst::new(stream.first().grid());

        if matches!(suite, "morawetz" | "all") {
            let mut hardy_worst = 0.0_f64;
            let mut lipschitz_worst = 0.0_f64;
            let radius = stream.first().grid().r_max() / 8.0;
            let snaps = stream.snapshots();
            for pair in snaps.windows(2) {
                let grad = dst.gradient_norm_sq(&pair[0]).sqrt();
                if grad == 0.0 {
                    continue;
                }
                let m0 = local_mass(&pair[0], radius)?;
                let m1 = local_mass(&pair[1], radius)?;
                hardy_worst = hardy_worst.max(m0 / (radius * grad));
                let rate = (m1 - m0).abs() / (pair[1].time() - pair[0].time());
                lipschitz_worst = lipschitz_worst.max(rate / (grad / radius));
            }
            checks.report(
                "Hardy bound",
                hardy_worst <= 1.05,
                format!("worst ratio {hardy_worst:.3} (<= 1.05)"),
            );
            checks.report(
                "local-mass Lipschitz bound",
                lipschitz_worst <= 1.05,
                format!("worst ratio {lipschitz_worst:.3} (<= 1.05)"),
            );
            let t0 = stream.first().time();
            let t1 = stream.last().time();
            if t1 > t0 && stream.len() >= 2 {
                let rep = morawetz(&dst, &stream, (t0, t1), 1.0)?;
                checks.report(
                    "Morawetz ratio",
                    rep.ratio.is_finite(),
                    format!("lhs {:.4e}, empirical constant {:.4e}", rep.lhs, rep.ratio),
                );
            }
        }

        if matches!(suite, "galilean" | "all") {
            let field = stream.first();
            let mut worst = 0.0_f64;
            for t in [0.3, 0.7, 1.5] {
                for which in [Galilean::J, Galilean::H] {
                    let d = galilean_apply(&dst, field, t, which, GalileanMethod::Direct)?;
                    let f = galilean_apply(&dst, field, t, which, GalileanMethod::Factorized)?;
                    worst = worst.max(d.l2_distance(&f));
                }
            }
            checks.report(
                "Galilean factorization",
                worst <= 1e-8,
                format!("worst L2 gap {worst:.3e} (<= 1e-8)"),
            );
        }
    }

    println!(
        "verified {} (config n = {}, r_max = {})",
        run.display(),
        manifest.config.n,
        manifest.config.r_max
    );
    if checks.failed > 0 {
        Err(Error::Resolution(format!(
            "{} verification check(s) failed",
            checks.failed
        )))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct BubbleDocument {
    eta1: f64,
    eta2: f64,
    c_eta1: f64,
    c_det: f64,
    reports: Vec<BubbleEntry>,
}

#[derive(Serialize)]
struct BubbleEntry {
    interval: (f64, f64),
    l10: f64,
    outcome: String,
    report: Option<BubbleReport>,
}

pub fn bubbles(run: &Path, eta1: Option<f64>, eta2: Option<f64>) -> Result<()> {
    let (manifest, stream) = rnls_core::read_stream(run)?;
    let cfg = &manifest.config;
    let eta1 = eta1.unwrap_or(cfg.eta1);
    let eta2 = eta2.unwrap_or(cfg.eta2);
    let dst = Dst::new(stream.first().grid());
    let bank = MultiplierBank::new(stream.first().grid());
    let window = (stream.first().time(), stream.last().time());
    let partition = partition_intervals(&stream, window, eta1)?;
    let mut entries = Vec::new();
    for iv in &partition.intervals {
        let det = detect_bubble(&dst, &bank, &stream, (iv.a, iv.b), eta1, C_DET_DEFAULT)?;
        let entry = match det {
            Detection::NoBubble { sigma_max, .. } => BubbleEntry {
                interval: (iv.a, iv.b),
                l10: iv.l10,
                outcome: format!("no bubble (sigma_max {sigma_max:.3e})"),
                report: None,
            },
            Detection::Bubble(mut rep) => {
                let snap = stream
                    .snapshots()
                    .iter()
                    .min_by(|a, b| {
                        (a.time() - rep.t_j)
                            .abs()
                            .partial_cmp(&(b.time() - rep.t_j).abs())
                            .expect("finite")
                    })
                    .expect("stream nonempty");
                verify_concentration(&dst, snap, &mut rep, eta1, cfg.c_eta1, C_DET_DEFAULT)?;
                let class = classify(&dst, snap, &mut rep, eta1, eta2, cfg.c_eta1, C_DET_DEFAULT)?;
                BubbleEntry {
                    interval: (iv.a, iv.b),
                    l10: iv.l10,
                    outcome: format!("{class:?}"),
                    report: Some(rep),
                }
            }
        };
        entries.push(entry);
    }
    let doc = BubbleDocument {
        eta1,
        eta2,
        c_eta1: cfg.c_eta1,
        c_det: C_DET_DEFAULT,
        reports: entries,
    };
    let path = run.join("bubbles.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {} ({} intervals)", path.display(), doc.reports.len());
    Ok(())
}

#[derive(Serialize)]
struct ScatterDocument {
    eps: f64,
    t0_horizon: f64,
    d_series: Vec<(f64, f64)>,
    converged: bool,
    sigma_residual: f64,
    uplus_checksum: String,
}

pub fn scatter(run: &Path, eps: Option<f64>) -> Result<()> {
    let (manifest, stream) = rnls_core::read_stream(run)?;
    let cfg = &manifest.config;
    let eps = eps.unwrap_or(cfg.eps_small);
    let dst = Dst::new(stream.first().grid());
    let rows = rnls_core::read_ledger(run)?;
    let e1_0 = rows[0].ledger.e1;
    let t0 = decay_horizon(e1_0, eps);
    let t_last = stream.last().time();
    let times = trace_times(t0.min(t_last), t_last);
    let plan = PropagatorPlan::new(&dst, cfg.dt);
    let trace = cauchy_trace(&plan, &stream, &times)?;
    let residual = trace.entries.last().expect("nonempty").1;
    let u_plus = pullback(&plan, stream.last())?;
    let mut bytes = Vec::with_capacity(u_plus.w().len() * 16);
    for w in u_plus.w() {
        bytes.extend_from_slice(&w.re.to_le_bytes());
        bytes.extend_from_slice(&w.im.to_le_bytes());
    }
    let doc = ScatterDocument {
        eps,
        t0_horizon: t0,
        d_series: trace.entries.clone(),
        converged: trace.converged,
        sigma_residual: residual,
        uplus_checksum: {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            h.update(&bytes);
            format!("{:x}", h.finalize())
        },
    };
    let path = run.join("scatter.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    println!(
        "wrote {} (converged: {}, residual {:.3e})",
        path.display(),
        doc.converged,
        doc.sigma_residual
    );
    if !doc.converged {
        return Err(Error::Resolution("no scattering detected".into()));
    }
    Ok(())
}

/// Minimal `*` matching on the final path component.
fn expand_pattern(pattern: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(pattern);
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("bad pattern {pattern}")))?
        .to_string_lossy()
        .into_owned();
    if !name.contains('*') {
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let parts: Vec<&str> = name.split('*').collect();
    let mut matches: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let Some(f) = p.file_name().map(|f| f.to_string_lossy().into_owned()) else {
                return false;
            };
            let mut rest = f.as_str();
            if !rest.starts_with(parts[0]) {
                return false;
            }
            rest = &rest[parts[0].len()..];
            for part in &parts[1..parts.len() - 1] {
                match rest.find(part) {
                    Some(i) => rest = &rest[i + part.len()..],
                    None => return false,
                }
            }
            rest.ends_with(parts[parts.len() - 1])
        })
        .collect();
    matches.sort();
    Ok(matches)
}

pub fn sweep(pattern: &str, out: Option<&Path>) -> Result<()> {
    let configs = expand_pattern(pattern)?;
    if configs.is_empty() {
        return Err(Error::Config(format!("no configs match {pattern}")));
    }
    let root = out.map(Path::to_path_buf).unwrap_or_else(out_root);
    let mut rows = Vec::new();
    for config_path in &configs {
        let text = fs::read_to_string(config_path)?;
        let cfg = RunConfig::from_json(&text)?;
        let dir = run_dir_for(config_path, None);
        let dir = root.join(dir.file_name().expect("named run"));
        let stream = evolve(&cfg)?;
        let grid = RadialGrid::new(cfg.r_max, cfg.n)?;
        let dst = Dst::new(&grid);
        write_run_dir(&dir, &cfg, &stream, &dst)?;
        let series = ledger_series(&dst, &stream);
        let grad0 = (2.0 * (series[0].e1 - series[0].pot6 / 3.0)).sqrt();
        let window = (stream.first().time(), stream.last().time());
        let l10 = if stream.len() >= 2 {
            spacetime_norm(&stream, window, 10.0, 10.0)?
        } else {
            0.0
        };
        println!(
            "ran {} (grad0 {grad0:.4e}, L10 {l10:.4e})",
            config_path.display()
        );
        rows.push((
            config_path.clone(),
            grad0,
            l10,
            series[0].mass,
            series[0].e1,
        ));
    }
    // fitted exponent of L10 against ||grad u0||, when the sweep varies it
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.1 > 0.0 && r.2 > 0.0)
        .map(|r| (r.1.ln(), r.2.ln()))
        .collect();
    let exponent = if pts.len() >= 2 && (pts[0].0 - pts[pts.len() - 1].0).abs() > 1e-12 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        num / den
    } else {
        f64::NAN
    };
    let mut csv = String::from("config,grad0,L10,mass,E1_0,fit_exponent\n");
    for (path, grad0, l10, mass, e1) in &rows {
        csv.push_str(&format!(
            "{},{grad0:.16e},{l10:.16e},{mass:.16e},{e1:.16e},{exponent:.16e}\n",
            path.display()
        ));
    }
    fs::create_dir_all(&root)?;
    let agg = root.join("aggregate.csv");
    fs::write(&agg, csv)?;
    println!("wrote {} ({} rows)", agg.display(), rows.len());
    Ok(())
}
