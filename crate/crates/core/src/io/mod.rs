//! Instance and solution documents, random generation, SVG figures and the
//! benchmark harness.

mod bench;
mod document;
mod generate;
mod svg;

pub use bench::{aggregate, run_benchmark, write_csv, AggregateRow, BenchmarkGrid, BenchmarkRow};
pub use document::{
    emit_instance, emit_solution, parse_instance, parse_instance_doc, parse_solution, parse_solution_doc,
    read_instance, read_points_csv, ContinuousDoc, DemandDoc, DiscreteDoc, InstanceDoc, SiteDoc, SolutionDoc,
    FORMAT_VERSION,
};
pub use generate::{generate_instance, DiscreteSpec, GeneratorSpec};
pub use svg::emit_svg;
