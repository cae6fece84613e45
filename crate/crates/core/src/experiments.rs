//! Sweeps pairing simulated statistics with limit predictions, and the
//! goodness-of-fit tools used to compare them.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::digraph::{DegreeTable, Digraph};
use crate::error::{config, Error, Result};
use crate::generator::{generate, GenConfig, GenMode};
use crate::kernel::ModelSpec;
use crate::theory::{
    approximate_bp, mean_arcs, mixed_poisson_pmf, spectral_radius, survival_ge_k,
    survival_probabilities, FinitaryBP, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::typespace::sample_types;

/// The swept parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepFamily {
    /// Directed Erdős–Rényi over a grid of `λ`.
    Er { lambdas: Vec<f64> },
    /// A fixed model with its kernel multiplied by each scale.
    KernelScale { base: ModelSpec, scales: Vec<f64> },
}

impl SweepFamily {
    fn params(&self) -> &[f64] {
        match self {
            SweepFamily::Er { lambdas } => lambdas,
            SweepFamily::KernelScale { scales, .. } => scales,
        }
    }

    fn model(&self, param: f64) -> ModelSpec {
        match self {
            SweepFamily::Er { .. } => ModelSpec::erdos_renyi(param),
            SweepFamily::KernelScale { base, .. } => ModelSpec {
                kernel: base.kernel.scaled(param),
                ..base.clone()
            },
        }
    }
}

fn default_m() -> u32 {
    6
}

fn default_reps() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Truncation levels for `N^{≥k}`.
    #[serde(default)]
    pub k: Vec<usize>,
    /// Finitary resolution for predictions.
    #[serde(default = "default_m")]
    pub m: u32,
    /// Monte Carlo replications for `ρ^{≥k}`.
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub mc_seed: u64,
    #[serde(default)]
    pub mode: GenMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.family.params().is_empty() {
            return config("sweep parameter grid is empty");
        }
        if self.family.params().iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return config("sweep parameters must be finite and nonnegative");
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return config("sweep n list must be nonempty with every n >= 1");
        }
        if self.seeds.is_empty() {
            return config("sweep seed list is empty");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return config("sweep seeds must be distinct");
        }
        if self.k.contains(&0) {
            return config("truncation levels k must be at least 1");
        }
        if self.reps == 0 {
            return config("reps must be at least 1");
        }
        if let SweepFamily::KernelScale { base, .. } = &self.family {
            base.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub param: f64,
    pub n: usize,
    pub seed: u64,
    pub arcs_per_vertex: f64,
    pub c1_over_n: f64,
    pub n_geq_k_over_n: Vec<f64>,
    pub rho_kappa: f64,
    pub rho_geq_k: Vec<f64>,
    pub mean_arcs: f64,
    pub spectral_radius: f64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub k: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["label", "param", "n", "seed", "arcs_per_vertex", "c1_over_n"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.k.iter().map(|k| format!("n_geq_{k}_over_n")));
        h.push("rho_kappa".into());
        h.extend(self.k.iter().map(|k| format!("rho_geq_{k}")));
        h.extend(["mean_arcs", "spectral_radius", "wall_time_ms"].map(String::from));
        h
    }

    pub fn csv_record(row: &SweepRow) -> Vec<String> {
        let mut r = vec![
            row.label.clone(),
            row.param.to_string(),
            row.n.to_string(),
            row.seed.to_string(),
            row.arcs_per_vertex.to_string(),
            row.c1_over_n.to_string(),
        ];
        r.extend(row.n_geq_k_over_n.iter().map(f64::to_string));
        r.push(row.rho_kappa.to_string());
        r.extend(row.rho_geq_k.iter().map(f64::to_string));
        r.push(row.mean_arcs.to_string());
        r.push(row.spectral_radius.to_string());
        r.push(format!("{:.3}", row.wall_time_ms));
        r
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header()).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(Self::csv_record(row)).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// A sweep that stopped early, with the rows completed before the failure.
#[derive(Debug)]
pub struct SweepFailure {
    pub partial: SweepResult,
    pub error: Error,
}

impl fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sweep stopped after {} rows: {}", self.partial.rows.len(), self.error)
    }
}

impl std::error::Error for SweepFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct GridPrediction {
    rho_kappa: f64,
    rho_geq_k: Vec<f64>,
    mean_arcs: f64,
    spectral_radius: f64,
}

fn predict_grid_point(spec: &SweepSpec, model: &ModelSpec) -> Result<GridPrediction> {
    let (bp, _) = approximate_bp(model, spec.m)?;
    let survival = survival_probabilities(&bp, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let rho_geq_k = spec
        .k
        .iter()
        .map(|&k| survival_ge_k(&bp, &bp.mu, k, spec.reps, spec.mc_seed).map(|(p, _)| p))
        .collect::<Result<_>>()?;
    Ok(GridPrediction {
        rho_kappa: survival.rho_kappa,
        rho_geq_k,
        mean_arcs: mean_arcs(&bp),
        spectral_radius: spectral_radius(&bp.m_plus, DEFAULT_TOL),
    })
}

/// Runs every (parameter, n, seed) combination in grid order.
pub fn run_sweep(spec: &SweepSpec) -> std::result::Result<SweepResult, SweepFailure> {
    let mut result = SweepResult {
        k: spec.k.clone(),
        rows: Vec::new(),
    };
    match sweep_into(spec, &mut result) {
        Ok(()) => Ok(result),
        Err(error) => Err(SweepFailure {
            partial: result,
            error,
        }),
    }
}

fn sweep_into(spec: &SweepSpec, result: &mut SweepResult) -> Result<()> {
    spec.validate()?;
    for &param in spec.family.params() {
        let model = spec.family.model(param);
        model.validate()?;
        let prediction = predict_grid_point(spec, &model)?;
        for &n in &spec.n {
            for &seed in &spec.seeds {
                let start = Instant::now();
                let sample = sample_types(&model.measure, n, seed)?;
                let cfg = GenConfig {
                    model: model.clone(),
                    n,
                    seed,
                    mode: spec.mode,
                };
                let g = generate(&cfg, &sample)?;
                let c1 = g.largest_scc().0;
                let n_geq_k_over_n = spec
                    .k
                    .iter()
                    .map(|&k| g.fraction_both_components_ge_k(k))
                    .collect();
                result.rows.push(SweepRow {
                    label: model.label.clone(),
                    param,
                    n,
                    seed,
                    arcs_per_vertex: g.arcs_per_vertex(),
                    c1_over_n: c1 as f64 / n as f64,
                    n_geq_k_over_n,
                    rho_kappa: prediction.rho_kappa,
                    rho_geq_k: prediction.rho_geq_k.clone(),
                    mean_arcs: prediction.mean_arcs,
                    spectral_radius: prediction.spectral_radius,
                    wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GofResult {
    pub tv_distance: f64,
    pub chi_square: f64,
    pub dof: usize,
}

/// Default per-marginal cutoff: `mean + 10·√mean`, at least 1.
pub fn default_gof_cutoff(table: &DegreeTable) -> usize {
    let mean = table.arc_count as f64 / table.n.max(1) as f64;
    ((mean + 10.0 * mean.sqrt()).ceil() as usize).max(1)
}

/// Compares the empirical joint degree law with the mixed Poisson limit on
/// `[0, cutoff]²` plus one overflow cell.
pub fn degree_gof(table: &DegreeTable, bp: &FinitaryBP, cutoff: usize) -> Result<GofResult> {
    if cutoff == 0 {
        return config("cutoff must be at least 1");
    }
    let n = table.n as f64;
    let side = cutoff + 1;
    let mut theo = Vec::with_capacity(side * side + 1);
    for k in 0..side {
        for l in 0..side {
            theo.push(mixed_poisson_pmf(bp, k as u64, l as u64));
        }
    }
    let inside: f64 = theo.iter().sum();
    theo.push((1.0 - inside).max(0.0));

    let mut observed = vec![0usize; side * side + 1];
    for (&(k, l), &c) in &table.joint {
        let cell = if k <= cutoff && l <= cutoff {
            k * side + l
        } else {
            side * side
        };
        observed[cell] += c;
    }
    if table.n == 0 {
        return Ok(GofResult {
            tv_distance: 0.0,
            chi_square: 0.0,
            dof: 0,
        });
    }
    let tv_distance = 0.5
        * observed
            .iter()
            .zip(&theo)
            .map(|(&o, &p)| (o as f64 / n - p).abs())
            .sum::<f64>();

    let mut chi_square = 0.0;
    let mut cells = 0usize;
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(&theo) {
        let e = n * p;
        if e < 5.0 {
            pooled_o += o as f64;
            pooled_e += e;
        } else {
            chi_square += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e > 0.0 {
        chi_square += (pooled_o - pooled_e).powi(2) / pooled_e;
        cells += 1;
    } else if pooled_o > 0.0 {
        chi_square = f64::INFINITY;
        cells += 1;
    }
    Ok(GofResult {
        tv_distance,
        chi_square,
        dof: cells.saturating_sub(1),
    })
}

/// `⌈n^0.6⌉`.
pub fn default_hill_order(n: usize) -> usize {
    (n as f64).powf(0.6).ceil() as usize
}

/// Hill estimate of the tail index from the `k_order` largest positive values.
///
/// Returns `+∞` when all top log-spacings vanish.
pub fn hill_tail_index(values: &[f64], k_order: usize) -> Result<f64> {
    if k_order == 0 {
        return config("Hill order must be at least 1");
    }
    let mut positive: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.len() <= k_order {
        return Err(Error::InsufficientData(format!(
            "{} positive values, need more than {k_order}",
            positive.len()
        )));
    }
    positive.sort_unstable_by(|a, b| b.total_cmp(a));
    let threshold = positive[k_order].ln();
    let sum: f64 = positive[..k_order].iter().map(|x| x.ln() - threshold).sum();
    if sum <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(k_order as f64 / sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NgeqComparison {
    pub empirical: f64,
    pub predicted: f64,
    pub se: f64,
}

/// `N^{≥k}/n` of `g` next to the Monte Carlo `ρ^{≥k}` of `bp` (roots drawn from `μ`).
pub fn compare_n_geq_k(g: &Digraph, bp: &FinitaryBP, k: usize, reps: usize, seed: u64) -> Result<NgeqComparison> {
    if k == 0 {
        return config("k must be at least 1");
    }
    let (predicted, se) = survival_ge_k(bp, &bp.mu, k, reps, seed)?;
    Ok(NgeqComparison {
        empirical: g.fraction_both_components_ge_k(k),
        predicted,
        se,
    })
}
