//! Simple digraph storage and the statistics compared against the limit theory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scc::strongly_connected;

/// Immutable simple digraph on `0..n` with both successor and predecessor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
}

fn compress(n: usize, arcs: &[(u32, u32)], key: impl Fn(&(u32, u32)) -> (u32, u32)) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for a in arcs {
        offsets[key(a).0 as usize + 1] += 1;
    }
    for v in 0..n {
        offsets[v + 1] += offsets[v];
    }
    let mut fill = offsets.clone();
    let mut targets = vec![0u32; arcs.len()];
    for a in arcs {
        let (s, t) = key(a);
        targets[fill[s as usize]] = t;
        fill[s as usize] += 1;
    }
    (offsets, targets)
}

impl Digraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            out_offsets: vec![0; n + 1],
            out_targets: Vec::new(),
            in_offsets: vec![0; n + 1],
            in_sources: Vec::new(),
        }
    }

    /// Builds from an arc list in any order. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn from_arcs(n: usize, arcs: &[(u32, u32)]) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::Config(format!("n = {n} exceeds the u32 vertex id range")));
        }
        for &(i, j) in arcs {
            if i as usize >= n || j as usize >= n {
                return Err(Error::Domain(format!("arc ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::Domain(format!("self-loop at vertex {i}")));
            }
        }
        let mut sorted = arcs.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("duplicate arc ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self::from_sorted_unique(n, &sorted))
    }

    /// `arcs` must be sorted, unique, loop-free and in range.
    pub(crate) fn from_sorted_unique(n: usize, arcs: &[(u32, u32)]) -> Self {
        debug_assert!(arcs.windows(2).all(|w| w[0] < w[1]));
        let (out_offsets, out_targets) = compress(n, arcs, |&(i, j)| (i, j));
        // counting sort by target keeps sources ascending
        let (in_offsets, in_sources) = compress(n, arcs, |&(i, j)| (j, i));
        Self {
            n,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn arc_count(&self) -> usize {
        self.out_targets.len()
    }

    #[inline]
    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    #[inline]
    pub fn in_neighbors(&self, v: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.out_neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Arcs in `(i, j)` lexicographic order.
    pub fn arcs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n).flat_map(move |i| self.out_neighbors(i).iter().map(move |&j| (i as u32, j)))
    }

    pub fn arcs_per_vertex(&self) -> f64 {
        self.arc_count() as f64 / self.n as f64
    }

    /// Size and sorted members of a largest strongly connected component.
    /// Ties go to the component containing the smallest vertex id.
    pub fn largest_scc(&self) -> (usize, Vec<u32>) {
        if self.n == 0 {
            return (0, Vec::new());
        }
        let comps = strongly_connected(&self.out_offsets, &self.out_targets);
        let sizes = comps.sizes();
        let mut best = comps.comp[0] as usize;
        // scanning vertices in id order: the first vertex seen with a strictly
        // larger component wins, so ties keep the smallest minimum id
        for &c in &comps.comp {
            if sizes[c as usize] > sizes[best] {
                best = c as usize;
            }
        }
        let members: Vec<u32> = (0..self.n as u32)
            .filter(|&v| comps.comp[v as usize] as usize == best)
            .collect();
        (members.len(), members)
    }

    pub fn joint_degree_table(&self) -> DegreeTable {
        let mut joint = BTreeMap::new();
        for v in 0..self.n {
            *joint.entry((self.in_degree(v), self.out_degree(v))).or_insert(0) += 1;
        }
        DegreeTable {
            n: self.n,
            arc_count: self.arc_count(),
            joint,
        }
    }

    /// Fraction of vertices whose in- and out-components both have at least `k` vertices.
    pub fn fraction_both_components_ge_k(&self, k: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let k = k.max(1);
        let count: usize = (0..self.n)
            .into_par_iter()
            .map_init(
                || Explorer::new(self.n),
                |ex, v| {
                    let ok = ex.reaches_at_least(v, k, |u| self.out_neighbors(u))
                        && ex.reaches_at_least(v, k, |u| self.in_neighbors(u));
                    ok as usize
                },
            )
            .sum();
        count as f64 / self.n as f64
    }

    /// Components of each vertex truncated at `k`, in and out: `(min(|in|, k), min(|out|, k))`.
    pub fn truncated_component_sizes(&self, v: usize, k: usize) -> (usize, usize) {
        let mut ex = Explorer::new(self.n);
        let i = ex.explore(v, k, |u| self.in_neighbors(u));
        let o = ex.explore(v, k, |u| self.out_neighbors(u));
        (i, o)
    }
}

/// Reusable BFS scratch space; `mark[v] == epoch` means visited in the current search.
struct Explorer {
    mark: Vec<u32>,
    epoch: u32,
    queue: Vec<u32>,
}

impl Explorer {
    fn new(n: usize) -> Self {
        Self {
            mark: vec![0; n],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn reaches_at_least<'g>(&mut self, v: usize, k: usize, next: impl Fn(usize) -> &'g [u32]) -> bool {
        self.explore(v, k, next) >= k
    }

    /// Number of vertices discovered from `v`, stopping once `k` are found.
    fn explore<'g>(&mut self, v: usize, k: usize, next: impl Fn(usize) -> &'g [u32]) -> usize {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.fill(0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        self.queue.clear();
        self.queue.push(v as u32);
        self.mark[v] = epoch;
        let mut head = 0;
        while head < self.queue.len() {
            if self.queue.len() >= k {
                return k;
            }
            let u = self.queue[head] as usize;
            head += 1;
            for &w in next(u) {
                if self.mark[w as usize] != epoch {
                    self.mark[w as usize] = epoch;
                    self.queue.push(w);
                }
            }
        }
        self.queue.len().min(k)
    }
}

/// Joint histogram of `(in-degree, out-degree)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeTable {
    pub n: usize,
    pub arc_count: usize,
    #[serde(serialize_with = "serialize_joint")]
    pub joint: BTreeMap<(usize, usize), usize>,
}

fn serialize_joint<S: serde::Serializer>(
    joint: &BTreeMap<(usize, usize), usize>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(joint.iter().map(|(&(k, l), &c)| [k, l, c]))
}

impl DegreeTable {
    pub fn count(&self, in_degree: usize, out_degree: usize) -> usize {
        self.joint.get(&(in_degree, out_degree)).copied().unwrap_or(0)
    }

    pub fn in_marginal(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for (&(k, _), &c) in &self.joint {
            *m.entry(k).or_insert(0) += c;
        }
        m
    }

    pub fn out_marginal(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for (&(_, l), &c) in &self.joint {
            *m.entry(l).or_insert(0) += c;
        }
        m
    }

    /// Pearson correlation of in- and out-degree; 0 when either is constant.
    pub fn degree_correlation(&self) -> f64 {
        let n = self.n as f64;
        let (mut si, mut so, mut sii, mut soo, mut sio) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&(k, l), &c) in &self.joint {
            let (k, l, c) = (k as f64, l as f64, c as f64);
            si += c * k;
            so += c * l;
            sii += c * k * k;
            soo += c * l * l;
            sio += c * k * l;
        }
        let cov = sio / n - (si / n) * (so / n);
        let vi = sii / n - (si / n).powi(2);
        let vo = soo / n - (so / n).powi(2);
        if vi <= 0.0 || vo <= 0.0 {
            0.0
        } else {
            cov / (vi * vo).sqrt()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("in_degree,out_degree,count\n");
        for (&(k, l), &c) in &self.joint {
            let _ = writeln!(out, "{k},{l},{c}");
        }
        out
    }
}

pub fn largest_scc(g: &Digraph) -> (usize, Vec<u32>) {
    g.largest_scc()
}

pub fn joint_degree_table(g: &Digraph) -> DegreeTable {
    g.joint_degree_table()
}

pub fn arcs_per_vertex(g: &Digraph) -> f64 {
    g.arcs_per_vertex()
}

pub fn fraction_both_components_ge_k(g: &Digraph, k: usize) -> f64 {
    g.fraction_both_components_ge_k(k)
}
