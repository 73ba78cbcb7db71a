//! File formats: binary scans, CSV tables and the run configuration.

pub mod config;
pub mod csv;
pub mod scan_file;

pub use config::{MaskKind, RunConfig};
pub use scan_file::{read_scan, write_scan, ScanFile, ScanHeader};
