//! Kernels `κ`, perturbations `φ_n`, arc probabilities and finitary approximation.
//!
//! Two-dimensional types follow the convention `x = (x⁺, x⁻)`: coordinate 0 is
//! the in-weight and coordinate 1 the out-weight. The built-in rank-1 models
//! use `κ₋(x) = x⁻/√θ` and `κ₊(y) = y⁺/√θ`, so an arc `i → j` is driven by the
//! out-weight of `i` and the in-weight of `j`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{config, Error, Result};
use crate::matrix::SquareMatrix;
use crate::scc::strongly_connected;
use crate::typespace::{dyadic_partition, Axis, MeasureSpec, Partition, TypeSample};

/// `scale · x[coord]^exponent`, nondecreasing on `x[coord] >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFn {
    pub coord: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub exponent: f64,
}

fn one() -> f64 {
    1.0
}

impl PowerFn {
    pub fn identity(coord: usize) -> Self {
        Self {
            coord,
            scale: 1.0,
            exponent: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            coord: 0,
            scale: value,
            exponent: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.exponent == 0.0 {
            self.scale
        } else {
            self.scale * x[self.coord].powf(self.exponent)
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.coord >= dim {
            return config(format!(
                "function reads coordinate {} of a {dim}-dimensional type",
                self.coord
            ));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return config("function scale must be finite and nonnegative");
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return config("function exponent must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Piecewise-constant kernel: `κ(x, y) = c[cell(x)][cell(y)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinitaryKernel {
    pub partition: Partition,
    pub c: SquareMatrix,
}

impl FinitaryKernel {
    pub fn new(partition: Partition, c: SquareMatrix) -> Result<Self> {
        let k = Self { partition, c };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        if self.c.dim() != self.partition.cell_count() {
            return config(format!(
                "finitary matrix is {0}x{0} but the partition has {1} cells",
                self.c.dim(),
                self.partition.cell_count()
            ));
        }
        self.c.check_nonnegative("C")
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let s = self.cell(x)?;
        let t = self.cell(y)?;
        Ok(self.c.get(s, t))
    }

    fn cell(&self, x: &[f64]) -> Result<usize> {
        self.partition
            .cell_index(x)
            .ok_or_else(|| Error::Domain(format!("point {x:?} lies outside the kernel partition")))
    }
}

/// User-supplied kernel evaluated as a black box (library use only).
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    pub f: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum Kernel {
    Constant { lambda: f64 },
    /// `κ(x, y) = scale · κ₋(x) · κ₊(y)`.
    Rank1 {
        scale: f64,
        minus: PowerFn,
        plus: PowerFn,
    },
    Finitary(FinitaryKernel),
    Custom(CustomKernel),
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Kernel::Constant { lambda: a }, Kernel::Constant { lambda: b }) => a == b,
            (
                Kernel::Rank1 {
                    scale: a,
                    minus: am,
                    plus: ap,
                },
                Kernel::Rank1 {
                    scale: b,
                    minus: bm,
                    plus: bp,
                },
            ) => a == b && am == bm && ap == bp,
            (Kernel::Finitary(a), Kernel::Finitary(b)) => a == b,
            (Kernel::Custom(a), Kernel::Custom(b)) => Arc::ptr_eq(&a.f, &b.f),
            _ => false,
        }
    }
}

impl Kernel {
    /// Canonical rank-1 kernel of the directed Chung-Lu family: `x⁻ y⁺ / θ`.
    pub fn chung_lu(theta: f64) -> Self {
        Kernel::Rank1 {
            scale: 1.0 / theta,
            minus: PowerFn::identity(1),
            plus: PowerFn::identity(0),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Kernel::Custom(CustomKernel {
            name: name.into(),
            f: Arc::new(f),
        })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Kernel::Constant { lambda } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return config("kernel constant must be finite and nonnegative");
                }
            }
            Kernel::Rank1 { scale, minus, plus } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return config("rank-1 scale must be finite and nonnegative");
                }
                minus.validate(dim)?;
                plus.validate(dim)?;
            }
            Kernel::Finitary(fk) => {
                fk.validate()?;
                if fk.partition.dim() != dim {
                    return config("finitary partition dimension differs from the type dimension");
                }
            }
            Kernel::Custom(_) => {}
        }
        Ok(())
    }

    /// `κ(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let v = match self {
            Kernel::Constant { lambda } => *lambda,
            Kernel::Rank1 { scale, minus, plus } => scale * minus.eval(x) * plus.eval(y),
            Kernel::Finitary(fk) => fk.eval(x, y)?,
            Kernel::Custom(ck) => (ck.f)(x, y),
        };
        if v.is_nan() || v < 0.0 {
            return Err(Error::Domain(format!(
                "kernel value {v} at ({x:?}, {y:?}) is not nonnegative"
            )));
        }
        Ok(v)
    }

    /// `s · κ`.
    pub fn scaled(&self, s: f64) -> Kernel {
        match self {
            Kernel::Constant { lambda } => Kernel::Constant { lambda: lambda * s },
            Kernel::Rank1 { scale, minus, plus } => Kernel::Rank1 {
                scale: scale * s,
                minus: *minus,
                plus: *plus,
            },
            Kernel::Finitary(fk) => Kernel::Finitary(FinitaryKernel {
                partition: fk.partition.clone(),
                c: SquareMatrix::from_fn(fk.c.dim(), |i, j| fk.c.get(i, j) * s),
            }),
            Kernel::Custom(ck) => {
                let f = Arc::clone(&ck.f);
                Kernel::custom(format!("{}*{s}", ck.name), move |x, y| s * f(x, y))
            }
        }
    }

    /// True for the canonical Chung-Lu shape `s · x⁻ · y⁺` (any scale).
    pub(crate) fn is_canonical_chung_lu(&self) -> bool {
        matches!(self, Kernel::Rank1 { minus, plus, .. }
            if *minus == PowerFn { scale: minus.scale, ..PowerFn::identity(1) }
            && *plus == PowerFn { scale: plus.scale, ..PowerFn::identity(0) })
    }
}

pub fn kernel_eval(kernel: &Kernel, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.eval(x, y)
}

/// Wire schema for kernels, including the named built-in models.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum KernelSchema {
    Er {
        lambda: f64,
    },
    Constant {
        lambda: f64,
    },
    Rank1 {
        #[serde(default = "one")]
        scale: f64,
        minus: PowerFn,
        plus: PowerFn,
    },
    ChungLu {
        theta: f64,
    },
    Grg {
        theta: f64,
    },
    NorrosReittu {
        theta: f64,
    },
    Finitary {
        partition: Partition,
        c: SquareMatrix,
    },
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let schema = match self {
            Kernel::Constant { lambda } => KernelSchema::Constant { lambda: *lambda },
            Kernel::Rank1 { scale, minus, plus } => KernelSchema::Rank1 {
                scale: *scale,
                minus: *minus,
                plus: *plus,
            },
            Kernel::Finitary(fk) => KernelSchema::Finitary {
                partition: fk.partition.clone(),
                c: fk.c.clone(),
            },
            Kernel::Custom(ck) => {
                return Err(serde::ser::Error::custom(format!(
                    "custom kernel '{}' cannot be serialized",
                    ck.name
                )))
            }
        };
        schema.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kernel = match KernelSchema::deserialize(d)? {
            KernelSchema::Er { lambda } | KernelSchema::Constant { lambda } => {
                Kernel::Constant { lambda }
            }
            KernelSchema::Rank1 { scale, minus, plus } => Kernel::Rank1 { scale, minus, plus },
            KernelSchema::ChungLu { theta }
            | KernelSchema::Grg { theta }
            | KernelSchema::NorrosReittu { theta } => {
                if !(theta.is_finite() && theta > 0.0) {
                    return Err(serde::de::Error::custom("theta must be positive"));
                }
                Kernel::chung_lu(theta)
            }
            KernelSchema::Finitary { partition, c } => {
                Kernel::Finitary(FinitaryKernel::new(partition, c).map_err(serde::de::Error::custom)?)
            }
        };
        Ok(kernel)
    }
}

/// `φ_n`, evaluated against the realized sample (through `l_n`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSpec {
    #[default]
    Zero,
    /// Given expected degrees: `p = min(x_i⁻ x_j⁺ / l_n, 1)`.
    ChungLu { theta: f64 },
    /// Generalized random graph: `p = x_i⁻ x_j⁺ / (l_n + x_i⁻ x_j⁺)`.
    Grg { theta: f64 },
    /// Poissonian random graph: `p = 1 - exp(-x_i⁻ x_j⁺ / l_n)`.
    NorrosReittu { theta: f64 },
}

impl PerturbationSpec {
    pub fn theta(&self) -> Option<f64> {
        match *self {
            PerturbationSpec::Zero => None,
            PerturbationSpec::ChungLu { theta }
            | PerturbationSpec::Grg { theta }
            | PerturbationSpec::NorrosReittu { theta } => Some(theta),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(theta) = self.theta() {
            if !(theta.is_finite() && theta > 0.0) {
                return config("perturbation theta must be positive");
            }
            if dim < 2 {
                return config("degree-based perturbations need types (x+, x-) of dimension >= 2");
            }
        }
        Ok(())
    }

    /// `φ_n(x, y)` given `n` and `l_n = Σ (x_i⁺ + x_i⁻)`.
    pub fn eval(&self, n: usize, l_n: f64, x: &[f64], y: &[f64]) -> f64 {
        let nf = n as f64;
        match *self {
            PerturbationSpec::Zero => 0.0,
            PerturbationSpec::ChungLu { theta } => (theta * nf - l_n) / l_n,
            PerturbationSpec::Grg { theta } => {
                let z = x[1] * y[0];
                (theta * nf - l_n - z) / (l_n + z)
            }
            PerturbationSpec::NorrosReittu { theta } => {
                let z = x[1] * y[0];
                if z == 0.0 {
                    // limit as z → 0
                    theta * nf / l_n - 1.0
                } else {
                    (nf * theta * -(-z / l_n).exp_m1() - z) / z
                }
            }
        }
    }
}

/// A complete `G_n(κ(1 + φ_n))` configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub measure: MeasureSpec,
    pub kernel: Kernel,
    #[serde(default)]
    pub phi: PerturbationSpec,
    #[serde(default)]
    pub label: String,
}

impl ModelSpec {
    pub fn new(measure: MeasureSpec, kernel: Kernel, phi: PerturbationSpec, label: &str) -> Self {
        Self {
            measure,
            kernel,
            phi,
            label: label.to_string(),
        }
    }

    /// Directed Erdős–Rényi with `p = min(λ/n, 1)` over a single-atom type space.
    pub fn erdos_renyi(lambda: f64) -> Self {
        Self::new(
            MeasureSpec::Discrete {
                atoms: vec![vec![0.0]],
                weights: vec![1.0],
            },
            Kernel::Constant { lambda },
            PerturbationSpec::Zero,
            "er",
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.measure.validate()?;
        let dim = self.measure.dim();
        self.kernel.validate(dim)?;
        self.phi.validate(dim)
    }
}

/// Arc probabilities of a model bound to one realized sample.
pub struct ArcProbabilities<'a> {
    model: &'a ModelSpec,
    sample: &'a TypeSample,
    l_n: f64,
}

impl<'a> ArcProbabilities<'a> {
    pub fn new(model: &'a ModelSpec, sample: &'a TypeSample) -> Result<Self> {
        model.validate()?;
        if sample.dim() != model.measure.dim() {
            return config("sample and model type dimensions differ");
        }
        let l_n = if model.phi.theta().is_some() {
            let l: f64 = sample.points().map(|p| p[0] + p[1]).sum();
            if !(l > 0.0) {
                return Err(Error::ModelValidity(format!("l_n = {l} must be positive")));
            }
            l
        } else {
            0.0
        };
        Ok(Self { model, sample, l_n })
    }

    pub fn n(&self) -> usize {
        self.sample.n()
    }

    pub fn l_n(&self) -> f64 {
        self.l_n
    }

    /// `p_ij`, with `p_ii = 0`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Ok(0.0);
        }
        self.between(self.sample.point(i), self.sample.point(j))
    }

    /// `min(κ(x, y)(1 + φ_n(x, y))/n, 1)` for two types, without the diagonal rule.
    #[inline]
    pub fn between(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.sample.n();
        let kappa = self.model.kernel.eval(x, y)?;
        let phi = self.model.phi.eval(n, self.l_n, x, y);
        if !(phi > -1.0) {
            return Err(Error::ModelValidity(format!(
                "φ_n = {phi} <= -1 at types ({x:?}, {y:?})"
            )));
        }
        if kappa == 0.0 {
            return Ok(0.0);
        }
        Ok((kappa * (1.0 + phi) / n as f64).min(1.0))
    }
}

pub fn arc_probability(model: &ModelSpec, sample: &TypeSample, i: usize, j: usize) -> Result<f64> {
    ArcProbabilities::new(model, sample)?.get(i, j)
}

/// `κ_m` together with whether its cell values are exact infima.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitaryApproximation {
    pub kernel: FinitaryKernel,
    /// False when cell infima were estimated from corners and centers only.
    pub exact: bool,
}

/// Regular finitary lower approximation of `kernel` at dyadic resolution `m`.
///
/// Cell values are infima of `κ` over each cell pair, so `κ_m <= κ` and
/// `κ_m <= κ_{m+1}` pointwise. Discrete measures use their atom partition and
/// are approximated without loss.
pub fn finitary_approximation(
    kernel: &Kernel,
    measure: &MeasureSpec,
    m: u32,
) -> Result<FinitaryApproximation> {
    measure.validate()?;
    kernel.validate(measure.dim())?;
    let partition = dyadic_partition(measure, m)?;

    if let MeasureSpec::Discrete { atoms, .. } = measure {
        let mut c = SquareMatrix::zeros(atoms.len());
        for (s, a) in atoms.iter().enumerate() {
            for (t, b) in atoms.iter().enumerate() {
                c.set(s, t, kernel.eval(a, b)?);
            }
        }
        return Ok(FinitaryApproximation {
            kernel: FinitaryKernel::new(partition, c)?,
            exact: true,
        });
    }
    let MeasureSpec::Product { coords: laws } = measure else {
        unreachable!()
    };
    let Partition::Grid { axes } = &partition else {
        unreachable!("product measures always get grid partitions")
    };

    let (kernel, exact) = match kernel {
        Kernel::Constant { lambda } => (
            FinitaryKernel::new(
                Partition::whole_space(measure.dim()),
                SquareMatrix::filled(1, *lambda),
            )?,
            true,
        ),
        Kernel::Finitary(fk) => (fk.clone(), true),
        Kernel::Rank1 { scale, minus, plus } => {
            let cells = partition.cell_count();
            let lower: Vec<Vec<f64>> = (0..cells)
                .map(|id| cell_lower_corner(axes, laws, id))
                .collect();
            let inf_minus: Vec<f64> = lower.iter().map(|x| minus.eval(x)).collect();
            let inf_plus: Vec<f64> = lower.iter().map(|x| plus.eval(x)).collect();
            let c = SquareMatrix::from_fn(cells, |s, t| scale * inf_minus[s] * inf_plus[t]);
            (FinitaryKernel::new(partition, c)?, true)
        }
        Kernel::Custom(ck) => {
            let cells = partition.cell_count();
            let probes: Vec<Vec<Vec<f64>>> = (0..cells)
                .map(|id| cell_probe_points(axes, laws, id))
                .collect();
            let c = SquareMatrix::from_fn(cells, |s, t| {
                let mut best = f64::INFINITY;
                for x in &probes[s] {
                    for y in &probes[t] {
                        best = best.min((ck.f)(x, y));
                    }
                }
                best.max(0.0)
            });
            (FinitaryKernel::new(partition, c)?, false)
        }
    };
    Ok(FinitaryApproximation { kernel, exact })
}

/// Per-axis bounds `[lo, hi]` of a grid cell intersected with the truncated support box.
fn cell_bounds(axes: &[Axis], laws: &[crate::typespace::Law1D], id: usize) -> Vec<(f64, f64)> {
    Partition::grid_coords(axes, id)
        .into_iter()
        .zip(axes.iter().zip(laws))
        .map(|(k, (axis, law))| match axis {
            Axis::Intervals { edges } => {
                let lo = if k == 0 {
                    edges[0].min(law.support_min()).max(law.support_min())
                } else {
                    edges[k]
                };
                (lo, edges[k + 1])
            }
            Axis::Values { values } => (values[k], values[k]),
        })
        .collect()
}

/// Lower corner of a cell; the infimum point for coordinatewise nondecreasing functions.
fn cell_lower_corner(axes: &[Axis], laws: &[crate::typespace::Law1D], id: usize) -> Vec<f64> {
    cell_bounds(axes, laws, id).into_iter().map(|(lo, _)| lo).collect()
}

fn cell_probe_points(axes: &[Axis], laws: &[crate::typespace::Law1D], id: usize) -> Vec<Vec<f64>> {
    let bounds = cell_bounds(axes, laws, id);
    let d = bounds.len();
    let mut points: Vec<Vec<f64>> = (0..1usize << d)
        .map(|mask| {
            bounds
                .iter()
                .enumerate()
                .map(|(c, &(lo, hi))| if mask >> c & 1 == 0 { lo } else { hi })
                .collect()
        })
        .collect();
    points.push(bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect());
    points
}

fn positive_cells(mu: &[f64], dim: usize) -> Result<Vec<usize>> {
    if mu.len() != dim {
        return config(format!(
            "{} cell weights for a {dim}-cell kernel",
            mu.len()
        ));
    }
    if mu.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return config("cell weights must be finite and nonnegative");
    }
    let cells: Vec<usize> = (0..dim).filter(|&t| mu[t] > 0.0).collect();
    if cells.is_empty() {
        return config("all cell weights are zero");
    }
    Ok(cells)
}

/// Block graph on positive-weight cells is strongly connected.
pub fn is_irreducible(fk: &FinitaryKernel, mu: &[f64]) -> Result<bool> {
    let cells = positive_cells(mu, fk.c.dim())?;
    let (offsets, targets) = fk.c.submatrix(&cells).positive_pattern();
    Ok(strongly_connected(&offsets, &targets).count == 1)
}

/// Restricts `fk` to its heaviest cycle class, zeroing every other row and column.
///
/// A cycle class is a strongly connected class of the block graph on
/// positive-weight cells that carries a directed cycle of positive entries.
/// Ties in μ-mass go to the class with the smallest cell index. Without any
/// cycle class the all-zero kernel is returned.
pub fn quasi_irreducible_restriction(fk: &FinitaryKernel, mu: &[f64]) -> Result<FinitaryKernel> {
    let dim = fk.c.dim();
    let keep = heaviest_cycle_class(&fk.c, mu)?.unwrap_or_default();
    let mut inside = vec![false; dim];
    for &t in &keep {
        inside[t] = true;
    }
    let c = SquareMatrix::from_fn(dim, |s, t| {
        if inside[s] && inside[t] {
            fk.c.get(s, t)
        } else {
            0.0
        }
    });
    FinitaryKernel::new(fk.partition.clone(), c)
}

/// Cells (original indices, ascending) of the heaviest cycle class.
pub(crate) fn heaviest_cycle_class(c: &SquareMatrix, mu: &[f64]) -> Result<Option<Vec<usize>>> {
    let cells = positive_cells(mu, c.dim())?;
    let sub = c.submatrix(&cells);
    let (offsets, targets) = sub.positive_pattern();
    let comps = strongly_connected(&offsets, &targets);
    let sizes = comps.sizes();

    let mut mass = vec![0.0; comps.count];
    let mut first = vec![usize::MAX; comps.count];
    let mut cyclic = vec![false; comps.count];
    for (a, &cell) in cells.iter().enumerate() {
        let id = comps.comp[a] as usize;
        mass[id] += mu[cell];
        first[id] = first[id].min(cell);
        if sizes[id] > 1 || sub.get(a, a) > 0.0 {
            cyclic[id] = true;
        }
    }
    let best = (0..comps.count).filter(|&k| cyclic[k]).max_by(|&a, &b| {
        mass[a]
            .partial_cmp(&mass[b])
            .unwrap()
            .then(first[b].cmp(&first[a]))
    });
    Ok(best.map(|k| {
        cells
            .iter()
            .enumerate()
            .filter(|&(a, _)| comps.comp[a] as usize == k)
            .map(|(_, &cell)| cell)
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typespace::{Law1D, TypeSample};

    fn one_dim_atoms(n: usize) -> Partition {
        Partition::Atoms {
            atoms: (0..n).map(|i| vec![i as f64]).collect(),
        }
    }

    fn fk(rows: Vec<Vec<f64>>) -> FinitaryKernel {
        let n = rows.len();
        FinitaryKernel::new(one_dim_atoms(n), SquareMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn kernel_eval_examples() {
        let k = Kernel::Constant { lambda: 3.0 };
        assert_eq!(k.eval(&[0.3], &[9.0]).unwrap(), 3.0);

        let k = Kernel::chung_lu(4.0);
        // x = (x+, x-) = (·, 2), y = (3, ·): (2/2)(3/2)
        assert!((k.eval(&[0.0, 2.0], &[3.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);

        let k = Kernel::Finitary(fk(vec![vec![0.0]]));
        assert_eq!(k.eval(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(matches!(k.eval(&[0.5], &[0.0]), Err(Error::Domain(_))));
    }

    fn two_d_sample(points: &[[f64; 2]]) -> TypeSample {
        let spec = MeasureSpec::Product {
            coords: vec![
                Law1D::Uniform { a: 0.0, b: 10.0 },
                Law1D::Uniform { a: 0.0, b: 10.0 },
            ],
        };
        let pts: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        TypeSample::from_points(&pts, spec, 0).unwrap()
    }

    #[test]
    fn arc_probability_examples() {
        let er = ModelSpec::erdos_renyi(3.0);
        let spec = er.measure.clone();
        let s = crate::typespace::sample_types(&spec, 100, 1).unwrap();
        assert!((arc_probability(&er, &s, 0, 1).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(arc_probability(&er, &s, 4, 4).unwrap(), 0.0);

        // x_0⁻ x_1⁺ = 4 = l_n with l_n = (0+2) + (2+0)
        let s = two_d_sample(&[[0.0, 2.0], [2.0, 0.0]]);
        let nr = ModelSpec {
            phi: PerturbationSpec::NorrosReittu { theta: 1.0 },
            ..ModelSpec::new(s.source().clone(), Kernel::chung_lu(1.0), PerturbationSpec::Zero, "nr")
        };
        let p = arc_probability(&nr, &s, 0, 1).unwrap();
        assert!((p - 0.632_120_558_828_557_7).abs() < 1e-12, "{p}");
    }

    #[test]
    fn clamp_applies_after_perturbation() {
        let s = two_d_sample(&[[1.0, 9.0], [9.0, 1.0]]);
        let cl = ModelSpec::new(
            s.source().clone(),
            Kernel::chung_lu(10.0),
            PerturbationSpec::ChungLu { theta: 10.0 },
            "cl",
        );
        // x_0⁻ x_1⁺ / l_n = 81 / 20 > 1
        assert_eq!(arc_probability(&cl, &s, 0, 1).unwrap(), 1.0);
        assert!((arc_probability(&cl, &s, 1, 0).unwrap() - 1.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn finitary_approximation_examples() {
        let unit = MeasureSpec::Product {
            coords: vec![Law1D::Uniform { a: 0.0, b: 1.0 }],
        };
        let k = Kernel::Constant { lambda: 2.5 };
        let a = finitary_approximation(&k, &unit, 4).unwrap();
        assert!(a.kernel.c.entries().iter().all(|&v| v == 2.5));

        let xy = Kernel::Rank1 {
            scale: 1.0,
            minus: PowerFn::identity(0),
            plus: PowerFn::identity(0),
        };
        let a = finitary_approximation(&xy, &unit, 1).unwrap();
        assert!(a.exact);
        assert_eq!(a.kernel.c.to_rows(), vec![vec![0.0, 0.0], vec![0.0, 0.25]]);

        let disc = MeasureSpec::Discrete {
            atoms: vec![vec![1.0, 2.0], vec![3.0, 0.5]],
            weights: vec![0.5, 0.5],
        };
        let cl = Kernel::chung_lu(2.0);
        let a = finitary_approximation(&cl, &disc, 1).unwrap();
        let atoms = [[1.0, 2.0], [3.0, 0.5]];
        for (s, x) in atoms.iter().enumerate() {
            for (t, y) in atoms.iter().enumerate() {
                assert_eq!(a.kernel.c.get(s, t), cl.eval(x, y).unwrap());
            }
        }
    }

    #[test]
    fn custom_kernel_is_flagged_inexact() {
        let unit = MeasureSpec::Product {
            coords: vec![Law1D::Uniform { a: 0.0, b: 1.0 }],
        };
        let k = Kernel::custom("sum", |x, y| x[0] + y[0]);
        let a = finitary_approximation(&k, &unit, 2).unwrap();
        assert!(!a.exact);
        assert_eq!(a.kernel.c.get(0, 0), 0.0);
        assert_eq!(a.kernel.c.get(3, 3), 1.5);
    }

    #[test]
    fn irreducibility_examples() {
        let half = [0.5, 0.5];
        assert!(is_irreducible(&fk(vec![vec![1.0, 2.0], vec![3.0, 4.0]]), &half).unwrap());
        assert!(!is_irreducible(&fk(vec![vec![1.0, 1.0], vec![0.0, 1.0]]), &half).unwrap());
        assert!(is_irreducible(&fk(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), &half).unwrap());
        assert!(matches!(
            is_irreducible(&fk(vec![vec![1.0]]), &[0.0]),
            Err(Error::Config(_))
        ));
        // a zero-weight cell is ignored
        let k = fk(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(is_irreducible(&k, &[1.0, 0.0]).unwrap());
    }

    #[test]
    fn restriction_examples() {
        let half = [0.5, 0.5];
        let irr = fk(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(quasi_irreducible_restriction(&irr, &half).unwrap(), irr);

        let k = fk(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let r = quasi_irreducible_restriction(&k, &half).unwrap();
        assert_eq!(r.c.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);

        let z = fk(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(quasi_irreducible_restriction(&z, &half).unwrap().c.is_zero());
    }

    #[test]
    fn restriction_prefers_heavier_class() {
        // classes {0,1} (mass 0.3) and {2} with self-loop (mass 0.7); 1 → 2 arc
        let k = fk(vec![
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 5.0],
            vec![0.0, 0.0, 2.0],
        ]);
        let r = quasi_irreducible_restriction(&k, &[0.1, 0.2, 0.7]).unwrap();
        assert_eq!(
            r.c.to_rows(),
            vec![vec![0.0; 3], vec![0.0; 3], vec![0.0, 0.0, 2.0]]
        );
        assert!(is_irreducible(&fk(vec![vec![2.0]]), &[1.0]).unwrap());
    }

    #[test]
    fn kernel_json_names() {
        let k: Kernel = serde_json::from_str(r#"{"kind":"er","lambda":2.0}"#).unwrap();
        assert_eq!(k, Kernel::Constant { lambda: 2.0 });
        let k: Kernel = serde_json::from_str(r#"{"kind":"chung-lu","theta":2.0}"#).unwrap();
        assert_eq!(k, Kernel::chung_lu(2.0));
        let k: Kernel = serde_json::from_str(
            r#"{"kind":"finitary","partition":{"kind":"atoms","atoms":[[0.0],[1.0]]},"c":[[1,2],[3,4]]}"#,
        )
        .unwrap();
        assert!(matches!(k, Kernel::Finitary(_)));
        let back = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<Kernel>(&back).unwrap(), k);
        assert!(serde_json::from_str::<Kernel>(r#"{"kind":"er","lambda":2,"x":1}"#).is_err());
        assert!(serde_json::to_string(&Kernel::custom("f", |_, _| 1.0)).is_err());
        let p: PerturbationSpec =
            serde_json::from_str(r#"{"kind":"norros-reittu","theta":3.0}"#).unwrap();
        assert_eq!(p, PerturbationSpec::NorrosReittu { theta: 3.0 });
    }
}
