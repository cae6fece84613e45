//! Exact sampling of `G_n(κ(1 + φ_n))`.
//!
//! Every mode draws each ordered pair independently with its exact
//! probability. They differ only in how many uniforms they spend:
//!
//! * `Naive` evaluates all `n(n-1)` pairs, one uniform keyed by `(seed, i, j)`.
//! * `BlockFast` groups vertices by cell when the probability is constant per
//!   cell pair and skips geometrically over each block's pairs.
//! * `Rank1Fast` handles rank-1 kernels: targets are sorted by `κ₊` so that
//!   probabilities decrease along each row, then skips with the running
//!   probability as an upper bound and thins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digraph::Digraph;
use crate::error::{config, Error, Result};
use crate::kernel::{ArcProbabilities, Kernel, ModelSpec, PerturbationSpec};
use crate::matrix::SquareMatrix;
use crate::rng::{stream_key, tag, uniform_at, CounterRng};
use crate::typespace::{MeasureSpec, TypeSample};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMode {
    /// Pick the fastest exact mode supported by the model.
    #[default]
    Auto,
    Naive,
    BlockFast,
    Rank1Fast,
}

impl GenMode {
    pub fn name(self) -> &'static str {
        match self {
            GenMode::Auto => "auto",
            GenMode::Naive => "naive",
            GenMode::BlockFast => "block-fast",
            GenMode::Rank1Fast => "rank1-fast",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: GenMode,
}

/// True when arc probabilities are constant on cell pairs.
pub fn block_fast_supported(model: &ModelSpec) -> bool {
    matches!(model.measure, MeasureSpec::Discrete { .. })
        || (model.phi == PerturbationSpec::Zero
            && matches!(model.kernel, Kernel::Constant { .. } | Kernel::Finitary(_)))
}

/// True when arc probabilities are nonincreasing in `κ₊(x_j)` for each source.
pub fn rank1_fast_supported(model: &ModelSpec) -> bool {
    match model.phi {
        PerturbationSpec::Zero | PerturbationSpec::ChungLu { .. } => {
            matches!(model.kernel, Kernel::Rank1 { .. } | Kernel::Constant { .. })
        }
        PerturbationSpec::Grg { .. } | PerturbationSpec::NorrosReittu { .. } => {
            model.kernel.is_canonical_chung_lu()
        }
    }
}

pub fn choose_mode(model: &ModelSpec) -> GenMode {
    if block_fast_supported(model) {
        GenMode::BlockFast
    } else if rank1_fast_supported(model) {
        GenMode::Rank1Fast
    } else {
        GenMode::Naive
    }
}

/// Mode `generate` will actually use for `config`.
pub fn resolve_mode(config: &GenConfig) -> Result<GenMode> {
    match config.mode {
        GenMode::Auto => Ok(choose_mode(&config.model)),
        GenMode::BlockFast if !block_fast_supported(&config.model) => config_err(
            "block-fast generation needs arc probabilities constant per cell pair \
             (a discrete measure, or a constant/finitary kernel with zero perturbation)",
        ),
        GenMode::Rank1Fast if !rank1_fast_supported(&config.model) => config_err(
            "rank1-fast generation needs a rank-1 kernel with zero or chung-lu perturbation, \
             or the canonical chung-lu kernel with grg/norros-reittu perturbation",
        ),
        mode => Ok(mode),
    }
}

fn config_err<T>(msg: &str) -> Result<T> {
    config(msg)
}

pub fn generate(config: &GenConfig, sample: &TypeSample) -> Result<Digraph> {
    if config.n == 0 {
        return config_err("n must be at least 1");
    }
    if sample.n() != config.n {
        return Err(Error::Config(format!(
            "sample has {} vertices but the configuration asks for {}",
            sample.n(),
            config.n
        )));
    }
    if config.n > u32::MAX as usize {
        return Err(Error::Config(format!(
            "n = {} exceeds the u32 vertex id range",
            config.n
        )));
    }
    let mode = resolve_mode(config)?;
    let probs = ArcProbabilities::new(&config.model, sample)?;
    let arcs = match mode {
        GenMode::Naive => naive_arcs(&probs, config.seed)?,
        GenMode::BlockFast => block_arcs(&config.model, &probs, sample, config.seed)?,
        GenMode::Rank1Fast => rank1_arcs(&config.model, &probs, sample, config.seed)?,
        GenMode::Auto => unreachable!("resolved above"),
    };
    Ok(Digraph::from_sorted_unique(config.n, &arcs))
}

fn naive_arcs(probs: &ArcProbabilities<'_>, seed: u64) -> Result<Vec<(u32, u32)>> {
    let n = probs.n();
    let rows: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let key = stream_key(seed, &[tag::NAIVE, i as u64]);
            let mut row = Vec::new();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let p = probs.get(i, j)?;
                if p > 0.0 && uniform_at(key, j as u64) < p {
                    row.push((i as u32, j as u32));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// Vertex groups per cell and the per-cell-pair arc probability.
fn block_structure(
    model: &ModelSpec,
    probs: &ArcProbabilities<'_>,
    sample: &TypeSample,
) -> Result<(Vec<Vec<u32>>, SquareMatrix)> {
    let n = sample.n();
    let outside = |i: usize| {
        Error::Domain(format!(
            "type {:?} of vertex {i} lies outside the kernel partition",
            sample.point(i)
        ))
    };
    if let MeasureSpec::Discrete { atoms, .. } = &model.measure {
        let mut members = vec![Vec::new(); atoms.len()];
        for i in 0..n {
            let x = sample.point(i);
            let s = atoms.iter().position(|a| a.as_slice() == x).ok_or_else(|| outside(i))?;
            members[s].push(i as u32);
        }
        let mut p = SquareMatrix::zeros(atoms.len());
        for s in 0..atoms.len() {
            for t in 0..atoms.len() {
                if !members[s].is_empty() && !members[t].is_empty() {
                    p.set(s, t, probs.between(&atoms[s], &atoms[t])?);
                }
            }
        }
        return Ok((members, p));
    }
    let nf = n as f64;
    match &model.kernel {
        Kernel::Constant { lambda } => Ok((
            vec![(0..n as u32).collect()],
            SquareMatrix::filled(1, (lambda / nf).min(1.0)),
        )),
        Kernel::Finitary(fk) => {
            let mut members = vec![Vec::new(); fk.c.dim()];
            for i in 0..n {
                let s = fk.partition.cell_index(sample.point(i)).ok_or_else(|| outside(i))?;
                members[s].push(i as u32);
            }
            let p = SquareMatrix::from_fn(fk.c.dim(), |s, t| (fk.c.get(s, t) / nf).min(1.0));
            Ok((members, p))
        }
        _ => unreachable!("checked by resolve_mode"),
    }
}

/// Geometric skip length for success probability `p` in `(0, 1)`: number of
/// failures before the next success.
#[inline]
fn geometric_skip(rng: &mut CounterRng, log_q: f64) -> f64 {
    // 1 - U lies in (0, 1]
    ((1.0 - rng.uniform()).ln() / log_q).floor()
}

fn block_arcs(
    model: &ModelSpec,
    probs: &ArcProbabilities<'_>,
    sample: &TypeSample,
    seed: u64,
) -> Result<Vec<(u32, u32)>> {
    let (members, p) = block_structure(model, probs, sample)?;
    let cells = members.len();
    let pairs: Vec<(usize, usize)> = (0..cells)
        .flat_map(|s| (0..cells).map(move |t| (s, t)))
        .collect();
    let blocks: Vec<Vec<(u32, u32)>> = pairs
        .into_par_iter()
        .map(|(s, t)| {
            let (src, dst) = (&members[s], &members[t]);
            let same = s == t;
            let cols = if same { dst.len().saturating_sub(1) } else { dst.len() } as u64;
            let total = src.len() as u64 * cols;
            let pst = p.get(s, t);
            let mut out = Vec::new();
            if total == 0 || pst <= 0.0 {
                return out;
            }
            let pair = |idx: u64| {
                let a = (idx / cols) as usize;
                let mut b = (idx % cols) as usize;
                if same && b >= a {
                    b += 1;
                }
                (src[a], dst[b])
            };
            if pst >= 1.0 {
                out.extend((0..total).map(pair));
                return out;
            }
            let mut rng = CounterRng::new(seed, &[tag::BLOCK, s as u64, t as u64]);
            let log_q = (-pst).ln_1p();
            let mut idx = 0u64;
            loop {
                let skip = geometric_skip(&mut rng, log_q);
                if skip >= (total - idx) as f64 {
                    break;
                }
                idx += skip as u64;
                out.push(pair(idx));
                idx += 1;
                if idx >= total {
                    break;
                }
            }
            out
        })
        .collect();
    let mut arcs = blocks.concat();
    arcs.par_sort_unstable();
    Ok(arcs)
}

fn rank1_arcs(
    model: &ModelSpec,
    probs: &ArcProbabilities<'_>,
    sample: &TypeSample,
    seed: u64,
) -> Result<Vec<(u32, u32)>> {
    let n = sample.n();
    let plus_weight: Vec<f64> = match &model.kernel {
        Kernel::Rank1 { plus, .. } => sample.points().map(|y| plus.eval(y)).collect(),
        _ => vec![1.0; n],
    };
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        plus_weight[b as usize]
            .total_cmp(&plus_weight[a as usize])
            .then(a.cmp(&b))
    });
    let rows: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = sample.point(i);
            let mut rng = CounterRng::new(seed, &[tag::RANK1, i as u64]);
            let mut row = Vec::new();
            let mut pos = 0usize;
            let mut bound = probs.between(x, sample.point(order[0] as usize))?;
            while pos < n && bound > 0.0 {
                if bound < 1.0 {
                    let skip = geometric_skip(&mut rng, (-bound).ln_1p());
                    if skip >= (n - pos) as f64 {
                        break;
                    }
                    pos += skip as usize;
                }
                let j = order[pos] as usize;
                let q = probs.between(x, sample.point(j))?;
                if (q >= bound || rng.uniform() < q / bound) && j != i {
                    row.push((i as u32, j as u32));
                }
                bound = q;
                pos += 1;
            }
            row.sort_unstable();
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// `(Σ p_ij, Σ p_ij (1 - p_ij))` over ordered pairs `i ≠ j`.
pub fn expected_arc_count(model: &ModelSpec, sample: &TypeSample) -> Result<(f64, f64)> {
    let probs = ArcProbabilities::new(model, sample)?;
    let n = sample.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0, 0.0);
            for j in 0..n {
                let p = probs.get(i, j)?;
                acc.0 += p;
                acc.1 += p * (1.0 - p);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1)))
}
