//! Limit objects of the finitary multi-type Poisson branching process.
//!
//! For a finitary kernel with block matrix `C` and block weights `μ`, a type-`i`
//! individual of the forward tree `𝒯⁻` has `Poisson(c_ij μ_j)` children of type
//! `j`, and of the backward tree `𝒯⁺` has `Poisson(c_ji μ_j)`. Survival of both
//! trees from a common root gives the giant strongly connected fraction.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{config, Error, Result};
use crate::kernel::{finitary_approximation, FinitaryKernel, Kernel, ModelSpec};
use crate::matrix::SquareMatrix;
use crate::rng::{tag, CounterRng};
use crate::scc::strongly_connected;
use crate::typespace::{theoretical_cell_weights, MeasureSpec};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Width of the band around `r = 1` in which survival is flagged critical.
pub const CRITICAL_BAND: f64 = 1e-6;

/// Branching process of a finitary kernel, restricted to blocks of positive weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinitaryBP {
    /// Original block index of each retained block.
    pub blocks: Vec<usize>,
    pub mu: Vec<f64>,
    pub c: SquareMatrix,
    /// `m⁺_ij = c_ji μ_j`.
    pub m_plus: SquareMatrix,
    /// `m⁻_ij = c_ij μ_j`.
    pub m_minus: SquareMatrix,
}

impl FinitaryBP {
    pub fn new(c: &SquareMatrix, mu: &[f64]) -> Result<Self> {
        if mu.len() != c.dim() {
            return config(format!(
                "{} block weights for a {1}x{1} matrix",
                mu.len(),
                c.dim()
            ));
        }
        c.check_nonnegative("C")?;
        if let Some(w) = mu.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return config(format!("block weight {w} is not finite and nonnegative"));
        }
        let blocks: Vec<usize> = (0..mu.len()).filter(|&j| mu[j] > 0.0).collect();
        let c = c.submatrix(&blocks);
        let mu: Vec<f64> = blocks.iter().map(|&j| mu[j]).collect();
        let m_plus = SquareMatrix::from_fn(c.dim(), |i, j| c.get(j, i) * mu[j]);
        let m_minus = SquareMatrix::from_fn(c.dim(), |i, j| c.get(i, j) * mu[j]);
        Ok(Self {
            blocks,
            mu,
            c,
            m_plus,
            m_minus,
        })
    }

    /// Single-type process with mean offspring `lambda` in both directions.
    pub fn single_type(lambda: f64) -> Result<Self> {
        Self::new(&SquareMatrix::filled(1, lambda), &[1.0])
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Expected in-degree `λ₊` per block.
    pub fn lambda_plus(&self) -> Vec<f64> {
        self.m_plus.row_sums()
    }

    /// Expected out-degree `λ₋` per block.
    pub fn lambda_minus(&self) -> Vec<f64> {
        self.m_minus.row_sums()
    }
}

pub fn build_bp(fk: &FinitaryKernel, mu: &[f64]) -> Result<FinitaryBP> {
    fk.validate()?;
    FinitaryBP::new(&fk.c, mu)
}

/// Perron root of a nonnegative square matrix.
///
/// Computed per strongly connected class of the positive pattern: singleton
/// classes contribute their diagonal entry, larger classes are solved by power
/// iteration on a diagonally shifted block (aperiodic, same Perron vector) with
/// Collatz–Wielandt bounds. The result is accurate to `tol · (1 + ‖M‖∞)`.
pub fn spectral_radius(m: &SquareMatrix, tol: f64) -> f64 {
    let d = m.dim();
    if d == 0 || m.is_zero() {
        return 0.0;
    }
    let norm = m.row_sums().into_iter().fold(0.0, f64::max);
    let accuracy = tol.max(f64::EPSILON) * (1.0 + norm);
    let (offsets, targets) = m.positive_pattern();
    let comps = strongly_connected(&offsets, &targets);
    let mut members = vec![Vec::new(); comps.count];
    for v in 0..d {
        members[comps.comp[v] as usize].push(v);
    }
    members
        .iter()
        .map(|idx| {
            if idx.len() == 1 {
                m.get(idx[0], idx[0])
            } else {
                irreducible_radius(&m.submatrix(idx), accuracy)
            }
        })
        .fold(0.0, f64::max)
}

fn irreducible_radius(a: &SquareMatrix, accuracy: f64) -> f64 {
    let d = a.dim();
    let sums = a.row_sums();
    let (lo, hi) = sums
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
    if hi - lo <= accuracy {
        // constant row sums: the all-ones vector is the Perron vector
        return 0.5 * (lo + hi);
    }
    let shift = 0.5 * (lo + hi) / 2.0;
    let mut x = vec![1.0 / d as f64; d];
    let mut y = vec![0.0; d];
    let mut best = (lo, hi);
    for _ in 0..1_000_000 {
        a.mul_vec_into(&x, &mut y);
        let mut lower = f64::INFINITY;
        let mut upper = 0.0f64;
        for i in 0..d {
            let ratio = y[i] / x[i];
            lower = lower.min(ratio);
            upper = upper.max(ratio);
            y[i] += shift * x[i];
        }
        best = (best.0.max(lower), best.1.min(upper));
        if best.1 - best.0 <= accuracy {
            break;
        }
        let s: f64 = y.iter().sum();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / s;
        }
        if x.iter().any(|&v| v <= 0.0) {
            // underflow on an extremely skewed vector; bounds so far remain valid
            break;
        }
    }
    0.5 * (best.0 + best.1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalSolution {
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
    /// `Σ_j μ_j ρ⁺_j ρ⁻_j`.
    pub rho_kappa: f64,
    pub iterations: usize,
    pub residual: f64,
    pub spectral_radius: f64,
    /// `|r - 1|` is below [`CRITICAL_BAND`]; the sign of `ρ` is numerically fragile.
    pub critical: bool,
}

/// Maximal solutions of `ρ = 1 - exp(-M ρ)` for `M = M⁺` and `M = M⁻`.
pub fn survival_probabilities(bp: &FinitaryBP, tol: f64, max_iter: usize) -> Result<SurvivalSolution> {
    if !(tol > 0.0) {
        return config("tolerance must be positive");
    }
    let r = spectral_radius(&bp.m_plus, tol);
    let critical = (r - 1.0).abs() < CRITICAL_BAND;
    let d = bp.dim();
    if r <= 1.0 {
        return Ok(SurvivalSolution {
            rho_plus: vec![0.0; d],
            rho_minus: vec![0.0; d],
            rho_kappa: 0.0,
            iterations: 0,
            residual: 0.0,
            spectral_radius: r,
            critical,
        });
    }
    let plus = solve_survival(&bp.m_plus, tol, max_iter, critical)?;
    let minus = solve_survival(&bp.m_minus, tol, max_iter, critical)?;
    let rho_kappa = (0..d)
        .map(|j| bp.mu[j] * plus.rho[j] * minus.rho[j])
        .sum();
    Ok(SurvivalSolution {
        rho_plus: plus.rho,
        rho_minus: minus.rho,
        rho_kappa,
        iterations: plus.iterations + minus.iterations,
        residual: plus.residual.max(minus.residual),
        spectral_radius: r,
        critical,
    })
}

struct FixedPoint {
    rho: Vec<f64>,
    iterations: usize,
    residual: f64,
}

/// Sup-norm of `ρ - (1 - exp(-Mρ))`.
fn survival_residual(m: &SquareMatrix, rho: &[f64], scratch: &mut [f64]) -> f64 {
    m.mul_vec_into(rho, scratch);
    rho.iter()
        .zip(scratch.iter())
        .map(|(r, s)| (r + (-s).exp_m1()).abs())
        .fold(0.0, f64::max)
}

/// Iterations of plain substitution before switching to Newton steps.
const SUBSTITUTION_STEPS: usize = 200;
/// Largest system solved densely by Newton's method.
const NEWTON_MAX_DIM: usize = 512;

fn solve_survival(m: &SquareMatrix, tol: f64, max_iter: usize, critical: bool) -> Result<FixedPoint> {
    let d = m.dim();
    let mut rho = vec![1.0; d];
    let mut next = vec![0.0; d];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let step = if iterations > SUBSTITUTION_STEPS && d <= NEWTON_MAX_DIM {
            newton_step(m, &rho, &mut next)
        } else {
            substitution_step(m, &rho, &mut next)
        };
        std::mem::swap(&mut rho, &mut next);
        if step < tol {
            converged = true;
            break;
        }
    }
    let residual = survival_residual(m, &rho, &mut next);
    if !converged && !critical {
        return Err(Error::Numerical {
            message: format!("survival iteration did not converge in {max_iter} steps"),
            residual,
        });
    }
    Ok(FixedPoint {
        rho,
        iterations,
        residual,
    })
}

fn substitution_step(m: &SquareMatrix, rho: &[f64], out: &mut [f64]) -> f64 {
    m.mul_vec_into(rho, out);
    let mut change = 0.0f64;
    for (o, r) in out.iter_mut().zip(rho) {
        *o = -(-*o).exp_m1();
        change = change.max((*o - r).abs());
    }
    change
}

/// One Newton step for `F(ρ) = ρ - 1 + exp(-Mρ)`.
///
/// From any point above the maximal fixed point the step stays above it and
/// does not increase any coordinate; the result is clamped to `[0, ρ]` to keep
/// that ordering under rounding.
fn newton_step(m: &SquareMatrix, rho: &[f64], out: &mut [f64]) -> f64 {
    let d = m.dim();
    m.mul_vec_into(rho, out);
    let e: Vec<f64> = out.iter().map(|&s| (-s).exp()).collect();
    let f: Vec<f64> = (0..d).map(|i| rho[i] - 1.0 + e[i]).collect();
    // Jacobian I - diag(e) M
    let mut jac = SquareMatrix::from_fn(d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - e[i] * m.get(i, j)
    });
    let Some(step) = solve_dense(&mut jac, f.clone()) else {
        return substitution_step(m, rho, out);
    };
    let mut change = 0.0f64;
    for i in 0..d {
        let v = (rho[i] - step[i]).clamp(0.0, rho[i]);
        change = change.max((v - rho[i]).abs());
        out[i] = v;
    }
    change
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(a: &mut SquareMatrix, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let d = a.dim();
    for col in 0..d {
        let pivot = (col..d).max_by(|&p, &q| a.get(p, col).abs().total_cmp(&a.get(q, col).abs()))?;
        if a.get(pivot, col).abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..d {
                let t = a.get(col, k);
                a.set(col, k, a.get(pivot, k));
                a.set(pivot, k, t);
            }
            b.swap(col, pivot);
        }
        let p = a.get(col, col);
        for row in col + 1..d {
            let factor = a.get(row, col) / p;
            if factor != 0.0 {
                for k in col..d {
                    a.set(row, k, a.get(row, k) - factor * a.get(col, k));
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let s: f64 = (row + 1..d).map(|k| a.get(row, k) * x[k]).sum();
        x[row] = (b[row] - s) / a.get(row, row);
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Monte Carlo estimate of `ρ^{≥k}` with its standard error.
///
/// Each replication draws a root block from `root_weights` and grows `𝒯⁺` and
/// `𝒯⁻` generation by generation until the total population reaches `k` or the
/// tree dies out. Every replication uses its own counter-based streams, so the
/// estimate is independent of thread count and, for a fixed seed, exactly
/// non-increasing in `k`.
pub fn survival_ge_k(
    bp: &FinitaryBP,
    root_weights: &[f64],
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if k == 0 || reps == 0 {
        return config("k and reps must be at least 1");
    }
    if root_weights.len() != bp.dim() {
        return config(format!(
            "{} root weights for {} blocks",
            root_weights.len(),
            bp.dim()
        ));
    }
    if root_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return config("root weights must be finite and nonnegative");
    }
    let total: f64 = root_weights.iter().sum();
    if !(total > 0.0) {
        return config("root weights sum to zero");
    }
    let mut cumulative = Vec::with_capacity(root_weights.len());
    let mut acc = 0.0;
    for w in root_weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let plus = PoissonTable::new(&bp.m_plus)?;
    let minus = PoissonTable::new(&bp.m_minus)?;
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep = rep as u64;
            let u = CounterRng::new(seed, &[tag::TREE, rep, 0]).uniform();
            let root = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(cumulative.len() - 1);
            let reached = plus.reaches(root, k, &mut CounterRng::new(seed, &[tag::TREE, rep, 1]))
                && minus.reaches(root, k, &mut CounterRng::new(seed, &[tag::TREE, rep, 2]));
            reached as usize
        })
        .sum();
    let p = hits as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}

struct PoissonTable {
    dim: usize,
    means: Vec<f64>,
}

impl PoissonTable {
    fn new(m: &SquareMatrix) -> Result<Self> {
        m.check_nonnegative("mean progeny matrix")?;
        Ok(Self {
            dim: m.dim(),
            means: m.entries().to_vec(),
        })
    }

    /// Whether the tree rooted at `root` grows to at least `k` individuals.
    fn reaches(&self, root: usize, k: usize, rng: &mut CounterRng) -> bool {
        let k = k as u64;
        let mut total = 1u64;
        if total >= k {
            return true;
        }
        let mut current = vec![0u64; self.dim];
        current[root] = 1;
        let mut next = vec![0u64; self.dim];
        loop {
            next.fill(0);
            let mut born = false;
            for i in 0..self.dim {
                let count = current[i];
                if count == 0 {
                    continue;
                }
                for j in 0..self.dim {
                    let mean = count as f64 * self.means[i * self.dim + j];
                    if mean <= 0.0 {
                        continue;
                    }
                    let children = match Poisson::new(mean) {
                        Ok(dist) => dist.sample(rng) as u64,
                        Err(_) => u64::MAX / 4,
                    };
                    if children > 0 {
                        born = true;
                        next[j] += children;
                        total = total.saturating_add(children);
                        if total >= k {
                            return true;
                        }
                    }
                }
            }
            if !born {
                return false;
            }
            std::mem::swap(&mut current, &mut next);
        }
    }
}

/// `P(Poisson(λ) = k)`.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
}

/// Limiting joint law of (in-degree, out-degree): `Σ_j μ_j Pois(λ₊_j)(k) Pois(λ₋_j)(l)`.
pub fn mixed_poisson_pmf(bp: &FinitaryBP, k: u64, l: u64) -> f64 {
    let lp = bp.lambda_plus();
    let lm = bp.lambda_minus();
    (0..bp.dim())
        .map(|j| bp.mu[j] * poisson_pmf(lp[j], k) * poisson_pmf(lm[j], l))
        .sum()
}

/// `E[κ₋(X) κ₊(X)]` for a rank-1 (or constant) kernel, in closed form.
pub fn rank1_threshold(measure: &MeasureSpec, kernel: &Kernel) -> Result<f64> {
    measure.validate()?;
    kernel.validate(measure.dim())?;
    let (scale, minus, plus) = match kernel {
        Kernel::Rank1 { scale, minus, plus } => (*scale, *minus, *plus),
        Kernel::Constant { lambda } => return Ok(*lambda),
        _ => return config("the rank-1 threshold needs a rank-1 kernel"),
    };
    if scale == 0.0 || minus.scale == 0.0 || plus.scale == 0.0 {
        return Ok(0.0);
    }
    match measure {
        MeasureSpec::Discrete { atoms, weights } => Ok(atoms
            .iter()
            .zip(weights)
            .map(|(a, w)| w * scale * minus.eval(a) * plus.eval(a))
            .sum()),
        MeasureSpec::Product { coords } => {
            let factor = scale * minus.scale * plus.scale;
            let expectation = if minus.coord == plus.coord {
                coords[minus.coord].moment(minus.exponent + plus.exponent)?
            } else {
                coords[minus.coord].moment(minus.exponent)? * coords[plus.coord].moment(plus.exponent)?
            };
            Ok(factor * expectation)
        }
    }
}

/// `∬ κ dμ dμ` for the finitary kernel: `Σ_{j,l} μ_j μ_l C_jl`.
pub fn mean_arcs(bp: &FinitaryBP) -> f64 {
    let d = bp.dim();
    (0..d)
        .flat_map(|j| (0..d).map(move |l| (j, l)))
        .map(|(j, l)| bp.mu[j] * bp.mu[l] * bp.c.get(j, l))
        .sum()
}

/// Everything the limit theory predicts for a model at resolution `m`.
#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub resolution: u32,
    /// False when the finitary approximation is not a certified lower bound.
    pub exact_approximation: bool,
    pub spectral_radius_plus: f64,
    pub spectral_radius_minus: f64,
    pub survival: SurvivalSolution,
    pub mean_arcs: f64,
    pub rank1_threshold: Option<f64>,
    #[serde(skip)]
    pub bp: FinitaryBP,
}

/// Finitary approximation `κ_m` of the model, with its branching process.
pub fn approximate_bp(model: &ModelSpec, m: u32) -> Result<(FinitaryBP, bool)> {
    model.validate()?;
    let approx = finitary_approximation(&model.kernel, &model.measure, m)?;
    let mu = theoretical_cell_weights(&model.measure, &approx.kernel.partition)?;
    Ok((build_bp(&approx.kernel, &mu)?, approx.exact))
}

pub fn predict(model: &ModelSpec, m: u32, tol: f64, max_iter: usize) -> Result<Prediction> {
    let (bp, exact) = approximate_bp(model, m)?;
    let survival = survival_probabilities(&bp, tol, max_iter)?;
    let rank1 = match model.kernel {
        Kernel::Rank1 { .. } => Some(rank1_threshold(&model.measure, &model.kernel)?),
        _ => None,
    };
    Ok(Prediction {
        resolution: m,
        exact_approximation: exact,
        spectral_radius_plus: spectral_radius(&bp.m_plus, tol),
        spectral_radius_minus: spectral_radius(&bp.m_minus, tol),
        mean_arcs: mean_arcs(&bp),
        rank1_threshold: rank1,
        survival,
        bp,
    })
}
