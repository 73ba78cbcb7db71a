//! Plain numeric CSV tables: trajectories, relative poses and worlds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{EgoVelocity, SE2Pose};
use crate::sim::{Trajectory, TrajectorySample, World};

pub const TRAJECTORY_HEADER: &str = "timestamp_s,x_m,y_m,theta_rad,vx,vy,omega";
pub const RELATIVE_HEADER: &str = "t_x,t_y,theta";
pub const ODOMETRY_HEADER: &str = "t_x,t_y,theta,w_S,w_D,c_S,c_D";
pub const WORLD_HEADER: &str = "kind,x,y,x2,y2,vx,vy,reflectivity,spacing";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Data rows after the header, skipping blank lines, with 1-based line numbers.
fn data_rows(text: &str) -> Result<(&str, Vec<(usize, Vec<&str>)>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::Format("missing header row".into()));
    };
    let rows = lines
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect();
    Ok((header.trim(), rows))
}

/// Parses a float field; an empty field reads as NaN.
fn field(cells: &[&str], k: usize, line: usize) -> Result<f64> {
    let Some(s) = cells.get(k) else {
        return Err(Error::Format(format!("line {line}: missing column {}", k + 1)));
    };
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {s:?} as a number")))
}

fn finite(cells: &[&str], k: usize, line: usize) -> Result<f64> {
    let v = field(cells, k, line)?;
    if !v.is_finite() {
        return Err(Error::Format(format!("line {line}: column {} must be finite", k + 1)));
    }
    Ok(v)
}

/// Reads `timestamp_s,x_m,y_m,theta_rad[,vx,vy,omega]`. Missing velocity
/// columns are derived from the poses.
pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let (header, rows) = data_rows(text)?;
    if !header.starts_with("timestamp_s") {
        return Err(Error::Format(format!("unexpected trajectory header {header:?}")));
    }
    let with_velocity = rows.iter().all(|(_, c)| c.len() >= 7);
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut samples = Vec::with_capacity(rows.len());
    for (line, cells) in &rows {
        let t = finite(cells, 0, *line)?;
        let pose = SE2Pose::new(finite(cells, 1, *line)?, finite(cells, 2, *line)?, finite(cells, 3, *line)?);
        let velocity = if with_velocity {
            EgoVelocity::new(finite(cells, 4, *line)?, finite(cells, 5, *line)?, finite(cells, 6, *line)?)?
        } else {
            EgoVelocity::default()
        };
        timestamps.push(t);
        samples.push(TrajectorySample {
            timestamp: t,
            pose,
            velocity,
        });
    }
    if with_velocity {
        Trajectory::new(samples)
    } else {
        let poses: Vec<SE2Pose> = samples.iter().map(|s| s.pose).collect();
        Trajectory::from_poses(&timestamps, &poses)
    }
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut s = format!("{TRAJECTORY_HEADER}\n");
    for p in traj.samples() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.timestamp, p.pose.t_x, p.pose.t_y, p.pose.theta, p.velocity.v_x, p.velocity.v_y, p.velocity.omega
        );
    }
    s
}

/// One row of an odometry output table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRow {
    pub pose: SE2Pose,
    /// `(w_S, w_D, c_S, c_D)` for fused estimates.
    pub fusion: Option<[f64; 4]>,
}

impl PoseRow {
    pub fn plain(pose: SE2Pose) -> Self {
        Self { pose, fusion: None }
    }

    /// Placeholder for a pair that could not be processed.
    pub fn failed() -> Self {
        Self {
            pose: SE2Pose {
                t_x: f64::NAN,
                t_y: f64::NAN,
                theta: f64::NAN,
            },
            fusion: None,
        }
    }
}

pub fn format_odometry(rows: &[PoseRow]) -> String {
    let mut s = format!("{ODOMETRY_HEADER}\n");
    for r in rows {
        let p = r.pose;
        let _ = write!(s, "{},{},{}", p.t_x, p.t_y, p.theta);
        match r.fusion {
            Some([a, b, c, d]) => {
                let _ = writeln!(s, ",{a},{b},{c},{d}");
            }
            None => s.push_str(",,,,\n"),
        }
    }
    s
}

pub fn format_relative(poses: &[SE2Pose]) -> String {
    let mut s = format!("{RELATIVE_HEADER}\n");
    for p in poses {
        let _ = writeln!(s, "{},{},{}", p.t_x, p.t_y, p.theta);
    }
    s
}

/// Reads relative poses from an odometry or relative-pose table. A
/// trajectory table (header starting with `timestamp_s`) is converted to
/// the relative poses between consecutive samples.
pub fn parse_pose_rows(text: &str) -> Result<Vec<PoseRow>> {
    let (header, rows) = data_rows(text)?;
    if header.starts_with("timestamp_s") {
        return Ok(parse_trajectory(text)?
            .relative_poses()
            .into_iter()
            .map(PoseRow::plain)
            .collect());
    }
    if !header.starts_with("t_x,t_y,theta") {
        return Err(Error::Format(format!("unexpected pose table header {header:?}")));
    }
    rows.iter()
        .map(|(line, c)| {
            // Raw fields: `SE2Pose::new` would wrap the angle.
            let pose = SE2Pose {
                t_x: field(c, 0, *line)?,
                t_y: field(c, 1, *line)?,
                theta: field(c, 2, *line)?,
            };
            let fusion = if c.len() >= 7 && c[3..7].iter().all(|s| !s.is_empty()) {
                Some([field(c, 3, *line)?, field(c, 4, *line)?, field(c, 5, *line)?, field(c, 6, *line)?])
            } else {
                None
            };
            Ok(PoseRow { pose, fusion })
        })
        .collect()
}

/// Scene description, one element per row:
///
/// * `point,x,y,,,,,reflectivity,`
/// * `wall,x,y,x2,y2,,,reflectivity,spacing`
/// * `mover,x,y,,,vx,vy,reflectivity,`
/// * `moving_box,x,y,length,width,vx,vy,reflectivity,spacing`
///   (centre `x,y`, box aligned with its velocity)
///
/// Mover positions are given at `t = 0`.
pub fn parse_world(text: &str) -> Result<World> {
    let (header, rows) = data_rows(text)?;
    if header != WORLD_HEADER {
        return Err(Error::Format(format!("unexpected world header {header:?}")));
    }
    let mut world = World::new();
    for (line, c) in &rows {
        let line = *line;
        let refl = finite(c, 7, line)?;
        let at = [finite(c, 1, line)?, finite(c, 2, line)?];
        match c[0] {
            "point" => world.add_point(at, refl),
            "wall" => world.add_wall(at, [finite(c, 3, line)?, finite(c, 4, line)?], refl, finite(c, 8, line)?),
            "mover" => world.add_mover(at, [finite(c, 5, line)?, finite(c, 6, line)?], refl),
            "moving_box" => world.add_moving_box(
                at,
                [finite(c, 5, line)?, finite(c, 6, line)?],
                finite(c, 3, line)?,
                finite(c, 4, line)?,
                refl,
                finite(c, 8, line)?,
            ),
            other => return Err(Error::Format(format!("line {line}: unknown element kind {other:?}"))),
        }
    }
    world.validate()?;
    Ok(world)
}

/// Writes every reflector as a `point` or `mover` row.
pub fn format_world(world: &World) -> String {
    let mut s = format!("{WORLD_HEADER}\n");
    for p in &world.static_points {
        let _ = writeln!(s, "point,{},{},,,,,{},", p.position[0], p.position[1], p.reflectivity);
    }
    for m in &world.dynamic_objects {
        let _ = writeln!(
            s,
            "mover,{},{},,,{},{},{},",
            m.position[0], m.position[1], m.velocity[0], m.velocity[1], m.reflectivity
        );
    }
    s
}
