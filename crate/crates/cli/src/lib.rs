//! Experiment harness around `d2d-core`: named solvers, Monte Carlo
//! campaigns, figure-ready tables and single-pair area maps. The `d2d`
//! binary is a thin clap front end over this library.

pub mod area_map;
pub mod campaign;
pub mod figures;
pub mod solvers;
