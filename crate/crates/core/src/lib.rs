//! Inhomogeneous random digraphs.
//!
//! Vertices carry i.i.d. types drawn from a measure `μ`; an arc `i → j` is
//! present independently with probability `min(κ(x_i, x_j)(1 + φ_n(x_i, x_j))/n, 1)`.
//! The crate samples such graphs, measures their strongly connected and degree
//! structure, and computes the matching branching-process limits.

pub mod digraph;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod io;
pub mod kernel;
pub mod matrix;
pub mod rng;
pub(crate) mod scc;
pub mod theory;
pub mod typespace;

pub use digraph::{
    arcs_per_vertex, fraction_both_components_ge_k, joint_degree_table, largest_scc, DegreeTable,
    Digraph,
};
pub use error::{Error, Result};
pub use experiments::{
    compare_n_geq_k, degree_gof, hill_tail_index, run_sweep, GofResult, NgeqComparison,
    SweepFailure, SweepFamily, SweepResult, SweepRow, SweepSpec,
};
pub use generator::{choose_mode, expected_arc_count, generate, GenConfig, GenMode};
pub use io::{read_edge_list, write_edge_list, EdgeListMeta};
pub use kernel::{
    arc_probability, finitary_approximation, is_irreducible, kernel_eval,
    quasi_irreducible_restriction, ArcProbabilities, FinitaryApproximation, FinitaryKernel,
    Kernel, ModelSpec, PerturbationSpec, PowerFn,
};
pub use matrix::SquareMatrix;
pub use typespace::{
    dyadic_partition, empirical_cell_weights, sample_types, theoretical_cell_weights, Axis,
    Law1D, MeasureSpec, Partition, TypeSample,
};
pub use theory::{
    build_bp, mean_arcs, mixed_poisson_pmf, predict, rank1_threshold, spectral_radius,
    survival_ge_k, survival_probabilities, FinitaryBP, Prediction, SurvivalSolution,
};
