use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ird_core::generator::resolve_mode;
use ird_core::theory::mixed_poisson_pmf;
use ird_core::{
    generate as sample_graph, predict as predict_limits, read_edge_list, run_sweep, sample_types,
    write_edge_list, EdgeListMeta, GenConfig, SweepResult,
};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

fn create_output(path: &Path, force: bool) -> Result<BufWriter<File>, CliError> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    match opts.open(path) {
        Ok(f) => Ok(BufWriter::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::exists(path)),
        Err(e) => Err(CliError {
            code: 1,
            message: format!("cannot create {}: {e}", path.display()),
        }),
    }
}

fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn generate(config: &Path, output: &Path, force: bool) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = cfg.model()?;
    let n = cfg.n()?;
    let gen = GenConfig {
        model,
        n,
        seed: cfg.seed,
        mode: cfg.mode,
    };
    let mode = resolve_mode(&gen)?;
    let sample = sample_types(&gen.model.measure, n, gen.seed)?;
    let g = sample_graph(&gen, &sample)?;
    let meta = EdgeListMeta {
        n,
        seed: Some(gen.seed),
        model: Some(gen.model.label.clone()),
        mode: Some(mode.name().to_string()),
    };
    let mut out = create_output(output, force)?;
    write_edge_list(&mut out, &g, &meta)?;
    out.flush()?;
    eprintln!("wrote {} arcs on {} vertices to {}", g.arc_count(), n, output.display());
    Ok(())
}

fn default_table_path(input: &Path) -> PathBuf {
    let mut s = input.as_os_str().to_owned();
    s.push(".degrees.csv");
    PathBuf::from(s)
}

pub fn analyze(input: &Path, degree_table: Option<PathBuf>, ks: &[usize]) -> Result<(), CliError> {
    let file = File::open(input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    let (g, meta) = read_edge_list(BufReader::new(file))?;
    let table_path = degree_table.unwrap_or_else(|| default_table_path(input));
    let table = g.joint_degree_table();
    std::fs::write(&table_path, table.to_csv())?;

    let (largest, _) = g.largest_scc();
    let mut report = json!({
        "n": g.n(),
        "arcs": g.arc_count(),
        "arcs_per_vertex": g.arcs_per_vertex(),
        "largest_scc": largest,
        "largest_scc_fraction": if g.n() == 0 { 0.0 } else { largest as f64 / g.n() as f64 },
        "degree_correlation": table.degree_correlation(),
        "degree_table": table_path.display().to_string(),
    });
    if let Some(model) = meta.model {
        report["model"] = json!(model);
    }
    if !ks.is_empty() {
        let fractions: serde_json::Map<String, serde_json::Value> = ks
            .iter()
            .map(|&k| (k.to_string(), json!(g.fraction_both_components_ge_k(k))))
            .collect();
        report["n_geq_k_over_n"] = serde_json::Value::Object(fractions);
    }
    print_json(&report)
}

pub fn predict(config: &Path, pmf: Option<&Path>, cutoff: u64) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = cfg.model()?;
    let p = predict_limits(&model, cfg.predict.m, cfg.predict.tol, cfg.predict.max_iter)?;
    let mut report = json!({
        "label": model.label,
        "resolution": p.resolution,
        "exact_approximation": p.exact_approximation,
        "blocks": p.bp.dim(),
        "spectral_radius_plus": p.spectral_radius_plus,
        "spectral_radius_minus": p.spectral_radius_minus,
        "rho_plus": p.survival.rho_plus,
        "rho_minus": p.survival.rho_minus,
        "rho_kappa": p.survival.rho_kappa,
        "iterations": p.survival.iterations,
        "residual": p.survival.residual,
        "critical": p.survival.critical,
        "mean_arcs": p.mean_arcs,
    });
    if let Some(t) = p.rank1_threshold {
        report["rank1_threshold"] = json!(t);
    }
    if let Some(path) = pmf {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "in_degree,out_degree,probability")?;
        for k in 0..=cutoff {
            for l in 0..=cutoff {
                writeln!(out, "{k},{l},{:e}", mixed_poisson_pmf(&p.bp, k, l))?;
            }
        }
        out.flush()?;
        report["pmf_table"] = json!(path.display().to_string());
    }
    print_json(&report)
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sweep(config: &Path, output: &Path, force: bool) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg
        .sweep
        .ok_or_else(|| CliError::config("config has no \"sweep\" section"))?;
    spec.validate()?;
    let canonical = serde_json::to_vec(&spec).map_err(|e| CliError::config(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(&canonical));

    let sidecar = sidecar_path(output);
    let mut out = create_output(output, force)?;
    if !force && sidecar.exists() {
        return Err(CliError::exists(&sidecar));
    }

    let (result, error): (SweepResult, Option<ird_core::Error>) = match run_sweep(&spec) {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    result.write_csv(&mut out)?;
    if let Some(e) = &error {
        writeln!(out, "# error: {e}")?;
    }
    out.flush()?;

    let rows: Vec<_> = result
        .rows
        .iter()
        .map(|r| json!({"param": r.param, "n": r.n, "seed": r.seed}))
        .collect();
    let mut meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "spec_sha256": hash,
        "spec": spec,
        "rows": rows,
    });
    if let Some(e) = &error {
        meta["error"] = json!(e.to_string());
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })?;
    std::fs::write(&sidecar, text + "\n")?;

    match error {
        Some(e) => Err(e.into()),
        None => {
            eprintln!("wrote {} rows to {}", result.rows.len(), output.display());
            Ok(())
        }
    }
}
