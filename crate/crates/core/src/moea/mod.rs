//! NSGA-II and its building blocks.

pub mod nsga2;
pub mod operators;
pub mod sorting;

pub use nsga2::{
    annotate, crowded_order, nsga2_run, nsga2_run_traced, write_trace_csv, GenerationTrace, Individual, Nsga2,
    NsgaConfig, Population,
};
pub use operators::{polynomial_mutation, sbx};
pub use sorting::{crowding_distance, dominates, fast_nondominated_sort, ranks_from_fronts};
