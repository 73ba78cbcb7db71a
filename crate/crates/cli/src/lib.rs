//! Command implementations behind the `rdo` binary.
//!
//! Each command reads and writes plain files so that runs can be diffed
//! without binary tooling. Errors carry the process exit code they map to.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rdo_core::eval::{failure_count, integrate, kitti_errors, OdometryErrors};
use rdo_core::io::csv::{
    format_odometry, format_relative, parse_pose_rows, parse_trajectory, parse_world, read_text, write_text,
    PoseRow,
};
use rdo_core::io::{read_scan, write_scan, RunConfig, ScanHeader};
use rdo_core::pipeline::{run_pairs, Mode};
use rdo_core::sim::simulate_sequence;
use rdo_core::{PolarScan, RadarConfig, SE2Pose};

pub mod plot;

/// File extension of simulated scans.
pub const SCAN_EXTENSION: &str = "rdos";
/// Ground truth written next to simulated scans.
pub const GT_FILE: &str = "gt_relative.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Missing(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Empty(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<rdo_core::Error> for CliError {
    fn from(e: rdo_core::Error) -> Self {
        use rdo_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { ref source, .. } if source.kind() == ErrorKind::NotFound => CliError::Missing(msg),
            E::ShapeMismatch { .. } | E::LengthMismatch { .. } => CliError::Mismatch(msg),
            E::Empty(_) => CliError::Empty(msg),
            _ => CliError::Other(msg),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))
}

/// Zero-padded scan file name; lexicographic order is time order.
pub fn scan_file_name(index: usize) -> String {
    format!("{index:06}.{SCAN_EXTENSION}")
}

/// Renders one scan file per trajectory sample into `out_dir` and writes the
/// ground-truth relative poses to [`GT_FILE`]. `seed` overrides `sim.seed`.
pub fn simulate(world: &Path, trajectory: &Path, cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> Result<usize> {
    let world = parse_world(&read_text(world)?)?;
    let traj = parse_trajectory(&read_text(trajectory)?)?;
    let mut params = cfg.sim;
    if let Some(seed) = seed {
        params.noise.seed = seed;
    }
    let (scans, gt) = simulate_sequence(&world, &traj, &cfg.radar, &params)?;
    create_dir(out_dir)?;
    for (k, (scan, sample)) in scans.iter().zip(traj.samples()).enumerate() {
        let stamp = (sample.timestamp * 1e6).round().max(0.0) as u64;
        write_scan(&out_dir.join(scan_file_name(k)), &ScanHeader::new(&cfg.radar, stamp), scan)?;
    }
    write_text(&out_dir.join(GT_FILE), &format_relative(&gt))?;
    info!("wrote {} scans to {}", scans.len(), out_dir.display());
    Ok(scans.len())
}

/// Scan files in `dir`, sorted by name.
pub fn list_scans(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::Missing(format!("{}: no such directory", dir.display())),
        _ => CliError::Other(format!("{}: {e}", dir.display())),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == SCAN_EXTENSION))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Rows of the odometry table for the scans in `dir`.
///
/// A scan that cannot be read, or whose geometry differs from the first
/// readable scan, turns both of its pairs into warning rows.
pub fn odometry_rows(dir: &Path, cfg: &RunConfig, mode: Mode, jobs: Option<usize>) -> Result<Vec<PoseRow>> {
    let paths = list_scans(dir)?;
    if paths.len() < 2 {
        return Err(CliError::Empty(format!(
            "{}: need at least two .{SCAN_EXTENSION} files, found {}",
            dir.display(),
            paths.len()
        )));
    }
    let mut radar: Option<RadarConfig> = None;
    let mut scans: Vec<Option<Arc<PolarScan>>> = Vec::with_capacity(paths.len());
    for path in &paths {
        let file = match read_scan(path) {
            Ok(f) => f,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                scans.push(None);
                continue;
            }
        };
        let this = file.header.radar_config(&cfg.radar, &file.scan.modulation);
        match &radar {
            Some(r) if *r != this => {
                warn!("skipping {}: geometry differs from earlier scans", path.display());
                scans.push(None);
            }
            _ => {
                radar.get_or_insert(this);
                scans.push(Some(Arc::new(file.scan)));
            }
        }
    }
    let Some(radar) = radar else {
        return Err(CliError::Other(format!("{}: no readable scan files", dir.display())));
    };

    let run = || run_pairs(&scans, &radar, cfg, mode);
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Other(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(k, r)| match r {
            Ok(est) => PoseRow {
                pose: est.pose,
                fusion: est.fusion.map(|f| [f.w_s, f.w_d, f.c_s, f.c_d]),
            },
            Err(e) => {
                warn!("pair {k} ({} -> {}): {e}", paths[k].display(), paths[k + 1].display());
                PoseRow::failed()
            }
        })
        .collect())
}

/// Runs [`odometry_rows`] and writes the table to `out`.
pub fn odometry(dir: &Path, cfg: &RunConfig, mode: Mode, jobs: Option<usize>, out: &Path) -> Result<usize> {
    let rows = odometry_rows(dir, cfg, mode, jobs)?;
    write_text(out, &format_odometry(&rows))?;
    Ok(rows.len())
}

fn poses(path: &Path) -> Result<Vec<SE2Pose>> {
    Ok(parse_pose_rows(&read_text(path)?)?.into_iter().map(|r| r.pose).collect())
}

/// KITTI metrics of `est` against `gt`, both relative-pose tables.
pub fn evaluate(gt: &Path, est: &Path, cfg: &RunConfig) -> Result<OdometryErrors> {
    let (gt_rel, est_rel) = (poses(gt)?, poses(est)?);
    if gt_rel.len() != est_rel.len() {
        return Err(CliError::Mismatch(format!(
            "{} has {} rows but {} has {}",
            gt.display(),
            gt_rel.len(),
            est.display(),
            est_rel.len()
        )));
    }
    let failures = failure_count(&gt_rel, &est_rel, cfg.eval.failure_threshold)?;
    info!("{failures} steps off by more than {} m", cfg.eval.failure_threshold);
    Ok(kitti_errors(&integrate(&gt_rel), &integrate(&est_rel), &cfg.eval.segments)?)
}

pub fn eval(gt: &Path, est: &Path, cfg: &RunConfig, out: &Path) -> Result<OdometryErrors> {
    let errors = evaluate(gt, est, cfg)?;
    write_text(out, &errors.to_csv())?;
    Ok(errors)
}

/// Labelled relative-pose series read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub poses: Vec<SE2Pose>,
}

impl Series {
    pub fn load(path: &Path) -> Result<Self> {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(Self {
            label,
            poses: poses(path)?,
        })
    }
}

/// Writes an SVG chart to `out` and the plotted values to `out` with a
/// `.csv` extension. The ground truth is drawn first.
pub fn plot(estimates: &[PathBuf], gt: &Path, out: &Path) -> Result<(PathBuf, PathBuf)> {
    if estimates.is_empty() {
        return Err(CliError::Empty("no estimate files to plot".into()));
    }
    let mut series = vec![Series::load(gt)?];
    for p in estimates {
        series.push(Series::load(p)?);
    }
    if let Some(s) = series.iter().find(|s| s.poses.is_empty()) {
        return Err(CliError::Empty(format!("series {:?} has no rows", s.label)));
    }
    let svg_path = out.with_extension("svg");
    let csv_path = out.with_extension("csv");
    write_text(&svg_path, &plot::render_svg(&series))?;
    write_text(&csv_path, &plot::series_csv(&series))?;
    Ok((svg_path, csv_path))
}

/// One-line summary of a metrics table for the terminal.
pub fn summary(errors: &OdometryErrors) -> String {
    format!("trans {:.4} %, rot {:.4} deg/km", errors.trans_error, errors.rot_error)
}
