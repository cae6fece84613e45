//! Ground space `(S, μ)`: measures on boxes of ℝ^d, type sampling, partitions.
//!
//! Types are points in ℝ^d with `1 <= d <= 3`. A measure is either a finite
//! set of weighted atoms or a product of one-dimensional laws. All sampling is
//! by inverse CDF over counter-based uniforms, so a sample is a pure function
//! of `(spec, n, seed)`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{stream_key, tag, uniform_at};

pub const MAX_DIM: usize = 3;

/// Per-coordinate upper quantile used to truncate unbounded supports when
/// building partitions. Sampling itself is never truncated.
pub const TRUNCATION_TAIL: f64 = 1e-6;

/// Largest number of cells a generated grid may have (the finitary matrix is
/// dense, so memory grows with the square of this).
pub const MAX_GRID_CELLS: usize = 4096;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Law1D {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    Pareto { alpha: f64, x_min: f64 },
    /// `v1` with probability `p`, otherwise `v2`.
    TwoPoint { v1: f64, v2: f64, p: f64 },
}

impl Law1D {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law1D::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            Law1D::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Law1D::Pareto { alpha, x_min } => {
                alpha.is_finite() && alpha > 0.0 && x_min.is_finite() && x_min > 0.0
            }
            Law1D::TwoPoint { v1, v2, p } => {
                v1.is_finite() && v2.is_finite() && (0.0..=1.0).contains(&p)
            }
        };
        if ok {
            Ok(())
        } else {
            config(format!("invalid law parameters: {self:?}"))
        }
    }

    /// Inverse CDF; `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Law1D::Uniform { a, b } => a + u * (b - a),
            Law1D::Exponential { rate } => -(-u).ln_1p() / rate,
            Law1D::Pareto { alpha, x_min } => x_min * (1.0 - u).powf(-1.0 / alpha),
            Law1D::TwoPoint { v1, v2, p } => {
                if u < p {
                    v1
                } else {
                    v2
                }
            }
        }
    }

    /// `P(X < x)`.
    pub fn cdf_below(&self, x: f64) -> f64 {
        match *self {
            Law1D::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Law1D::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Law1D::Pareto { alpha, x_min } => {
                if x <= x_min {
                    0.0
                } else {
                    1.0 - (x_min / x).powf(alpha)
                }
            }
            Law1D::TwoPoint { v1, v2, p } => {
                let mut m = 0.0;
                if v1 < x {
                    m += p;
                }
                if v2 < x {
                    m += 1.0 - p;
                }
                m
            }
        }
    }

    pub fn support_min(&self) -> f64 {
        match *self {
            Law1D::Uniform { a, .. } => a,
            Law1D::Exponential { .. } => 0.0,
            Law1D::Pareto { x_min, .. } => x_min,
            Law1D::TwoPoint { v1, v2, .. } => v1.min(v2),
        }
    }

    pub fn is_bounded_above(&self) -> bool {
        matches!(self, Law1D::Uniform { .. } | Law1D::TwoPoint { .. })
    }

    /// Upper end of the box used for partitions: the support maximum, or the
    /// `1 - TRUNCATION_TAIL` quantile for unbounded laws.
    pub fn truncation_upper(&self) -> f64 {
        match *self {
            Law1D::Uniform { b, .. } => b,
            Law1D::TwoPoint { v1, v2, .. } => v1.max(v2),
            _ => self.quantile(1.0 - TRUNCATION_TAIL),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Law1D::Uniform { a, b } => (a..=b).contains(&x),
            Law1D::Exponential { .. } => x >= 0.0 && x.is_finite(),
            Law1D::Pareto { x_min, .. } => x >= x_min && x.is_finite(),
            Law1D::TwoPoint { v1, v2, .. } => x == v1 || x == v2,
        }
    }

    /// `E[X^q]` for `q >= 0`; `+∞` when the moment diverges.
    pub fn moment(&self, q: f64) -> Result<f64> {
        if !(q.is_finite() && q >= 0.0) {
            return config(format!("moment order {q} must be finite and nonnegative"));
        }
        if q == 0.0 {
            return Ok(1.0);
        }
        match *self {
            Law1D::Uniform { a, b } => {
                if a < 0.0 && q.fract() != 0.0 {
                    return config("fractional moment of a uniform law with negative support");
                }
                Ok((b.powf(q + 1.0) - a.powf(q + 1.0)) / ((q + 1.0) * (b - a)))
            }
            Law1D::Exponential { rate } => {
                Ok(statrs::function::gamma::gamma(q + 1.0) / rate.powf(q))
            }
            Law1D::Pareto { alpha, x_min } => {
                if q >= alpha {
                    Ok(f64::INFINITY)
                } else {
                    Ok(alpha * x_min.powf(q) / (alpha - q))
                }
            }
            Law1D::TwoPoint { v1, v2, p } => Ok(p * v1.powf(q) + (1.0 - p) * v2.powf(q)),
        }
    }
}

/// The type measure μ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Discrete {
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Independent coordinates, one law per coordinate.
    Product { coords: Vec<Law1D> },
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::Discrete { atoms, .. } => atoms.first().map_or(0, Vec::len),
            MeasureSpec::Product { coords } => coords.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(1..=MAX_DIM).contains(&d) {
            return config(format!("type dimension {d} outside 1..={MAX_DIM}"));
        }
        match self {
            MeasureSpec::Discrete { atoms, weights } => {
                if atoms.len() != weights.len() {
                    return config("discrete measure needs one weight per atom");
                }
                for (i, a) in atoms.iter().enumerate() {
                    if a.len() != d || a.iter().any(|v| !v.is_finite()) {
                        return config(format!("atom {i} is not a finite point of dimension {d}"));
                    }
                    if atoms[..i].contains(a) {
                        return config(format!("atom {i} duplicates an earlier atom"));
                    }
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return config("atom weights must be nonnegative");
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return config(format!("atom weights sum to {total}, not 1"));
                }
                Ok(())
            }
            MeasureSpec::Product { coords } => coords.iter().try_for_each(Law1D::validate),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            MeasureSpec::Discrete { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .any(|(a, &w)| w > 0.0 && a.as_slice() == x),
            MeasureSpec::Product { coords } => {
                x.len() == coords.len() && coords.iter().zip(x).all(|(l, &v)| l.in_support(v))
            }
        }
    }
}

/// The realized vertex types `X_1, …, X_n`, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeSample {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    source: MeasureSpec,
    seed: u64,
}

impl TypeSample {
    /// Builds a sample from explicit points, checking each lies in the support.
    pub fn from_points(points: &[Vec<f64>], source: MeasureSpec, seed: u64) -> Result<Self> {
        source.validate()?;
        let dim = source.dim();
        if points.is_empty() {
            return config("a type sample needs at least one point");
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim || !source.contains(p) {
                return Err(Error::Domain(format!(
                    "point {i} = {p:?} is outside the support of the measure"
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            n: points.len(),
            dim,
            coords,
            source,
            seed,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn source(&self) -> &MeasureSpec {
        &self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws `n` i.i.d. types from `spec`.
pub fn sample_types(spec: &MeasureSpec, n: usize, seed: u64) -> Result<TypeSample> {
    spec.validate()?;
    if n == 0 {
        return config("sample size n must be at least 1");
    }
    let dim = spec.dim();
    let key = stream_key(seed, &[tag::TYPES]);
    let mut coords = Vec::with_capacity(n * dim);
    match spec {
        MeasureSpec::Discrete { atoms, weights } => {
            let mut cumulative = Vec::with_capacity(weights.len());
            let mut acc = 0.0;
            for w in weights {
                acc += w;
                cumulative.push(acc);
            }
            let last = atoms.len() - 1;
            for i in 0..n {
                let u = uniform_at(key, i as u64);
                let mut idx = cumulative.partition_point(|&c| c <= u).min(last);
                // skip zero-weight atoms that rounding may land on
                while weights[idx] == 0.0 && idx > 0 {
                    idx -= 1;
                }
                coords.extend_from_slice(&atoms[idx]);
            }
        }
        MeasureSpec::Product { coords: laws } => {
            for i in 0..n {
                for (c, law) in laws.iter().enumerate() {
                    let u = uniform_at(key, (i * dim + c) as u64);
                    coords.push(law.quantile(u));
                }
            }
        }
    }
    Ok(TypeSample {
        n,
        dim,
        coords,
        source: spec.clone(),
        seed,
    })
}

/// One coordinate of a grid partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Axis {
    /// Cells `[e_k, e_{k+1})`; the first and last cells extend to `-∞` and `+∞`
    /// so that mass beyond a truncated box lands in the outermost cells.
    Intervals { edges: Vec<f64> },
    /// One cell per listed value (matched exactly).
    Values { values: Vec<f64> },
}

impl Axis {
    pub fn cell_count(&self) -> usize {
        match self {
            Axis::Intervals { edges } => edges.len() - 1,
            Axis::Values { values } => values.len(),
        }
    }

    pub fn cell_index(&self, x: f64) -> Option<usize> {
        match self {
            Axis::Intervals { edges } => {
                if x.is_nan() {
                    None
                } else {
                    Some(edges[1..edges.len() - 1].partition_point(|&e| e <= x))
                }
            }
            Axis::Values { values } => values.iter().position(|&v| v == x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Axis::Intervals { edges } => {
                if edges.len() < 2 {
                    return config("an interval axis needs at least two edges");
                }
                if edges.iter().any(|e| e.is_nan()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                    return config("interval edges must be strictly increasing");
                }
            }
            Axis::Values { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return config("a value axis needs finite values");
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return config("axis values must be strictly increasing");
                }
            }
        }
        Ok(())
    }
}

/// A finite partition of the type space into cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Partition {
    /// One singleton cell per atom.
    Atoms { atoms: Vec<Vec<f64>> },
    /// Cartesian product of per-axis cells, row-major (last axis fastest).
    Grid { axes: Vec<Axis> },
}

impl Partition {
    pub fn dim(&self) -> usize {
        match self {
            Partition::Atoms { atoms } => atoms.first().map_or(0, Vec::len),
            Partition::Grid { axes } => axes.len(),
        }
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Partition::Atoms { atoms } => atoms.len(),
            Partition::Grid { axes } => axes.iter().map(Axis::cell_count).product(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Partition::Atoms { atoms } => {
                let d = self.dim();
                if atoms.is_empty() || d == 0 {
                    return config("atom partition needs at least one atom");
                }
                for (i, a) in atoms.iter().enumerate() {
                    if a.len() != d {
                        return config(format!("partition atom {i} has the wrong dimension"));
                    }
                    if atoms[..i].contains(a) {
                        return config(format!("partition atom {i} is duplicated"));
                    }
                }
                Ok(())
            }
            Partition::Grid { axes } => {
                if axes.is_empty() {
                    return config("grid partition needs at least one axis");
                }
                axes.iter().try_for_each(Axis::validate)
            }
        }
    }

    pub fn cell_index(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        match self {
            Partition::Atoms { atoms } => atoms.iter().position(|a| a.as_slice() == x),
            Partition::Grid { axes } => {
                let mut id = 0;
                for (axis, &v) in axes.iter().zip(x) {
                    id = id * axis.cell_count() + axis.cell_index(v)?;
                }
                Some(id)
            }
        }
    }

    /// Per-axis indices of grid cell `id`.
    pub(crate) fn grid_coords(axes: &[Axis], mut id: usize) -> Vec<usize> {
        let mut out = vec![0; axes.len()];
        for (slot, axis) in out.iter_mut().zip(axes).rev() {
            let k = axis.cell_count();
            *slot = id % k;
            id /= k;
        }
        out
    }

    /// Single-cell grid covering all of ℝ^d.
    pub fn whole_space(dim: usize) -> Self {
        Partition::Grid {
            axes: vec![
                Axis::Intervals {
                    edges: vec![f64::NEG_INFINITY, f64::INFINITY],
                };
                dim
            ],
        }
    }
}

/// Dyadic grid with `2^m` cells per continuous coordinate over the truncated
/// support box; two-point coordinates get one cell per value and discrete
/// measures get their atoms (exact for every `m`).
pub fn dyadic_partition(spec: &MeasureSpec, m: u32) -> Result<Partition> {
    spec.validate()?;
    if m == 0 || m > 24 {
        return config(format!("resolution m = {m} outside 1..=24"));
    }
    let partition = match spec {
        MeasureSpec::Discrete { atoms, .. } => Partition::Atoms {
            atoms: atoms.clone(),
        },
        MeasureSpec::Product { coords } => {
            let cells = 1usize << m;
            let axes = coords
                .iter()
                .map(|law| match *law {
                    Law1D::TwoPoint { v1, v2, .. } => {
                        let mut values = vec![v1.min(v2), v1.max(v2)];
                        values.dedup();
                        Axis::Values { values }
                    }
                    _ => {
                        let lo = law.support_min();
                        let hi = law.truncation_upper();
                        let edges = (0..=cells)
                            .map(|k| lo + (hi - lo) * (k as f64) / (cells as f64))
                            .collect();
                        Axis::Intervals { edges }
                    }
                })
                .collect();
            Partition::Grid { axes }
        }
    };
    if partition.cell_count() > MAX_GRID_CELLS {
        return config(format!(
            "partition would have {} cells (limit {MAX_GRID_CELLS}); lower m",
            partition.cell_count()
        ));
    }
    Ok(partition)
}

/// `μ_n(J_t)`: fraction of sample points in each cell.
pub fn empirical_cell_weights(sample: &TypeSample, partition: &Partition) -> Result<Vec<f64>> {
    if partition.dim() != sample.dim() {
        return config("partition and sample dimensions differ");
    }
    let mut counts = vec![0usize; partition.cell_count()];
    for (i, p) in sample.points().enumerate() {
        let cell = partition
            .cell_index(p)
            .ok_or(Error::Coverage { index: i })?;
        counts[cell] += 1;
    }
    let n = sample.n() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// `μ(J_t)` in closed form from per-coordinate CDFs.
pub fn theoretical_cell_weights(spec: &MeasureSpec, partition: &Partition) -> Result<Vec<f64>> {
    spec.validate()?;
    partition.validate()?;
    if partition.dim() != spec.dim() {
        return config("partition and measure dimensions differ");
    }
    let mut weights = vec![0.0; partition.cell_count()];
    match (spec, partition) {
        (MeasureSpec::Discrete { atoms, weights: w }, _) => {
            for (a, &wa) in atoms.iter().zip(w) {
                if wa == 0.0 {
                    continue;
                }
                match partition.cell_index(a) {
                    Some(cell) => weights[cell] += wa,
                    None => return config(format!("atom {a:?} is not covered by the partition")),
                }
            }
        }
        (MeasureSpec::Product { coords }, Partition::Grid { axes }) => {
            let per_axis = coords
                .iter()
                .zip(axes)
                .map(|(law, axis)| axis_masses(law, axis))
                .collect::<Result<Vec<_>>>()?;
            for (id, w) in weights.iter_mut().enumerate() {
                *w = Partition::grid_coords(axes, id)
                    .iter()
                    .zip(&per_axis)
                    .map(|(&k, masses)| masses[k])
                    .product();
            }
        }
        (MeasureSpec::Product { coords }, Partition::Atoms { atoms }) => {
            for (w, a) in weights.iter_mut().zip(atoms) {
                let mut mass = 1.0;
                for (law, &v) in coords.iter().zip(a) {
                    match *law {
                        Law1D::TwoPoint { v1, v2, p } => {
                            let mut pm = 0.0;
                            if v == v1 {
                                pm += p;
                            }
                            if v == v2 {
                                pm += 1.0 - p;
                            }
                            mass *= pm;
                        }
                        _ => {
                            return config(
                                "atom cells are only supported for two-point coordinates",
                            )
                        }
                    }
                }
                *w = mass;
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return config("atom partition does not cover the product measure");
            }
        }
    }
    Ok(weights)
}

fn axis_masses(law: &Law1D, axis: &Axis) -> Result<Vec<f64>> {
    match axis {
        Axis::Intervals { edges } => {
            let k = edges.len() - 1;
            let below: Vec<f64> = edges[1..k].iter().map(|&e| law.cdf_below(e)).collect();
            let mut masses = Vec::with_capacity(k);
            let mut prev = 0.0;
            for b in below {
                masses.push(b - prev);
                prev = b;
            }
            masses.push(1.0 - prev);
            Ok(masses)
        }
        Axis::Values { values } => match *law {
            Law1D::TwoPoint { v1, v2, p } => {
                let masses: Vec<f64> = values
                    .iter()
                    .map(|&v| {
                        let mut m = 0.0;
                        if v == v1 {
                            m += p;
                        }
                        if v == v2 {
                            m += 1.0 - p;
                        }
                        m
                    })
                    .collect();
                if (masses.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SUM_TOL {
                    return config("value axis misses an atom of the two-point law");
                }
                Ok(masses)
            }
            _ => config("value axes are only supported for two-point laws"),
        },
    }
}
