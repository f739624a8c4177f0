//! Configuration-driven experiment runner: the operational surface behind
//! the `qha` binary. See [`config::Config`] for the experiment document and
//! [`pipeline::run`] for the kinds.

pub mod config;
mod output;
mod pipeline;

pub use config::{parse_group, parse_region, Config};
pub use output::{fmt_f, line_plot, write_csv, Series};
pub use pipeline::{run, Overrides, RunManifest};
