//! File formats, run configuration and reports.

pub mod color;
pub mod config;
pub mod flo;
pub mod pnm;
pub mod report;

pub use color::{flow_magnitude, flow_to_color};
pub use config::{load_config, RunConfig};
pub use flo::{read_flo, write_flo};
pub use pnm::{read_mask, read_pnm, write_mask, write_pnm};
pub use report::{config_hash, Table};
