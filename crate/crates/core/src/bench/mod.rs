//! Experiment orchestration: configuration, benchmark tables, convergence
//! study, stopping-region export, and the command-line interface.

pub mod cli;
pub mod config;
pub mod driver;
pub mod region;
pub mod tables;

pub use cli::{cli, cli_from_strs};
pub use config::{Algo, ExperimentConfig, GridConfig, LawConfig, ModelKind, Solver};
pub use driver::{
    build_ensemble, european_for, european_mc, lg_pde_grid, pde_value, run_mc, run_price,
    ss_pde_grid, EuropeanEstimate, McRun, PriceOutput,
};
pub use region::{export_stopping_region, RegionExport, RegionPoint};
pub use tables::{
    run_convergence_study, run_table1, run_table2, table1_result, table2_result,
    ConvergenceReport, ResultRow, ResultTable, Table1Row, Table2Result, Table2Row,
};
