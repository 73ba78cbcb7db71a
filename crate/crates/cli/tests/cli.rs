use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const WORLD: &str = "kind,x,y,x2,y2,vx,vy,reflectivity,spacing
wall,-20,14,40,14,,,1,0.3
wall,-20,-11,40,-11,,,0.8,0.3
wall,30,-11,30,14,,,1.2,0.3
point,8,5,,,,,2,
point,14,-6,,,,,1.5,
point,21,3,,,,,2.5,
point,-6,-4,,,,,1.8,
point,3,-8,,,,,1.2,
moving_box,12,8,4,2,-6,0,3,0.3
";

const CONFIG: &str = "radar.n_bins = 1000
match.grid_size = 127
match.resolution = 0.35
sim.power_noise_sigma = 0.02
";

fn rdo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdo"))
        .args(args)
        .env("RDO_LOG", "error")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(samples: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("world.csv"), WORLD).unwrap();
        fs::write(dir.path().join("run.cfg"), CONFIG).unwrap();
        let mut traj = String::from("timestamp_s,x_m,y_m,theta_rad\n");
        for k in 0..samples {
            let t = 0.25 * k as f64;
            traj.push_str(&format!("{t},{},{},{}\n", 4.0 * t, 0.1 * t, 0.02 * t));
        }
        fs::write(dir.path().join("traj.csv"), traj).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn simulate(&self, out: &str, seed: &str) -> Output {
        rdo(&[
            "simulate",
            s(&self.path("world.csv")),
            s(&self.path("traj.csv")),
            "--config",
            s(&self.path("run.cfg")),
            "--seed",
            seed,
            "--out",
            s(&self.path(out)),
        ])
    }

    fn odometry(&self, scans: &str, mode: &str, jobs: &str, out: &str) -> Output {
        rdo(&[
            "odometry",
            s(&self.path(scans)),
            "--config",
            s(&self.path("run.cfg")),
            "--mode",
            mode,
            "--jobs",
            jobs,
            "--out",
            s(&self.path(out)),
        ])
    }
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_writes_one_scan_per_sample() {
    let f = Fixture::new(10);
    ok(&f.simulate("scans", "7"));
    let names: Vec<String> = files(&f.path("scans")).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".rdos")).count(), 10);
    assert_eq!(names[0], "000000.rdos");
    assert_eq!(data_rows(&f.path("scans/gt_relative.csv")).len(), 9);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let f = Fixture::new(3);
    ok(&f.simulate("a", "11"));
    ok(&f.simulate("b", "11"));
    ok(&f.simulate("c", "12"));
    assert_eq!(files(&f.path("a")), files(&f.path("b")));
    assert_ne!(files(&f.path("a")), files(&f.path("c")));
}

#[test]
fn missing_world_exits_2_and_names_the_path() {
    let f = Fixture::new(3);
    fs::remove_file(f.path("world.csv")).unwrap();
    let o = f.simulate("scans", "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("world.csv"));
}

#[test]
fn odometry_rows_and_fused_weights() {
    let f = Fixture::new(3);
    ok(&f.simulate("scans", "3"));
    ok(&f.odometry("scans", "fused", "2", "fused.csv"));
    let rows = data_rows(&f.path("fused.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let w: f64 = r[3].parse::<f64>().unwrap() + r[4].parse::<f64>().unwrap();
        assert!((w - 1.0).abs() < 1e-9, "{r:?}");
        let tx: f64 = r[0].parse().unwrap();
        assert!((tx - 1.0).abs() < 0.3, "{r:?}");
    }
    ok(&f.odometry("scans", "masked", "1", "masked.csv"));
    let rows = data_rows(&f.path("masked.csv"));
    assert!(rows.iter().all(|r| r.len() == 7 && r[3..].iter().all(String::is_empty)));
}

#[test]
fn odometry_output_independent_of_job_count() {
    let f = Fixture::new(6);
    ok(&f.simulate("scans", "5"));
    ok(&f.odometry("scans", "fused", "1", "one.csv"));
    ok(&f.odometry("scans", "fused", "4", "four.csv"));
    ok(&f.odometry("scans", "fused", "4", "again.csv"));
    let one = fs::read(f.path("one.csv")).unwrap();
    assert_eq!(one, fs::read(f.path("four.csv")).unwrap());
    assert_eq!(one, fs::read(f.path("again.csv")).unwrap());
}

#[test]
fn corrupt_scan_yields_warning_rows() {
    let f = Fixture::new(5);
    ok(&f.simulate("scans", "9"));
    fs::write(f.path("scans/000002.rdos"), b"RDOS garbage").unwrap();
    let o = f.odometry("scans", "masked", "2", "est.csv");
    ok(&o);
    let rows = data_rows(&f.path("est.csv"));
    assert_eq!(rows.len(), 4);
    for (k, r) in rows.iter().enumerate() {
        let failed = r[0] == "NaN";
        assert_eq!(failed, k == 1 || k == 2, "row {k}: {r:?}");
    }
}

#[test]
fn odometry_input_errors() {
    let f = Fixture::new(2);
    assert_eq!(f.odometry("nowhere", "raw", "1", "x.csv").status.code(), Some(2));
    fs::create_dir(f.path("empty")).unwrap();
    assert_eq!(f.odometry("empty", "raw", "1", "x.csv").status.code(), Some(4));
}

#[test]
fn eval_identity_fixture_and_mismatch() {
    let f = Fixture::new(2);
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let gt = fixtures.join("kitti_gt.csv");
    let est = fixtures.join("kitti_est.csv");
    fs::write(f.path("eval.cfg"), "eval.segments = 1,2,3\n").unwrap();
    let cfg = f.path("eval.cfg");

    let out = f.path("same.csv");
    ok(&rdo(&["eval", s(&gt), s(&gt), "--config", s(&cfg), "--out", s(&out)]));
    for row in data_rows(&out) {
        assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap().abs() < 1e-9), "{row:?}");
    }

    let out = f.path("metrics.csv");
    ok(&rdo(&["eval", s(&gt), s(&est), "--config", s(&cfg), "--out", s(&out)]));
    let got = data_rows(&out);
    let want = data_rows(&fixtures.join("kitti_expected.csv"));
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g[0].parse::<f64>().ok(), w[0].parse::<f64>().ok());
        for k in 1..3 {
            let (a, b): (f64, f64) = (g[k].parse().unwrap(), w[k].parse().unwrap());
            assert!((a - b).abs() < 1e-6, "{g:?} vs {w:?}");
        }
    }

    fs::write(f.path("short.csv"), "t_x,t_y,theta\n1,0,0\n").unwrap();
    let o = rdo(&["eval", s(&gt), s(&f.path("short.csv")), "--out", s(&f.path("m.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}

fn panel_labels(svg: &str) -> Vec<Vec<String>> {
    svg.split(r#"<g class="panel""#)
        .skip(1)
        .map(|panel| {
            panel
                .split(r#"class="series" data-label=""#)
                .skip(1)
                .map(|s| s.split('"').next().unwrap().to_string())
                .collect()
        })
        .collect()
}

#[test]
fn plot_structure_and_determinism() {
    let f = Fixture::new(2);
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let gt = fixtures.join("kitti_gt.csv");
    let est = fs::read_to_string(fixtures.join("kitti_est.csv")).unwrap();
    for name in ["masked", "doppler", "fused"] {
        fs::write(f.path(&format!("{name}.csv")), &est).unwrap();
    }

    let one = f.path("one.svg");
    ok(&rdo(&["plot", s(&gt), s(&f.path("fused.csv")), "--out", s(&one)]));
    let svg = fs::read_to_string(&one).unwrap();
    let panels = panel_labels(&svg);
    assert_eq!(panels.len(), 4);
    assert!(panels.iter().all(|p| p.len() == 2));

    let three = f.path("three.svg");
    let args = |out: &Path| -> Vec<String> {
        ["plot", s(&gt), s(&f.path("masked.csv")), s(&f.path("doppler.csv")), s(&f.path("fused.csv")), "--out", s(out)]
            .iter()
            .map(|a| a.to_string())
            .collect()
    };
    let run = |out: &Path| {
        let a = args(out);
        ok(&rdo(&a.iter().map(String::as_str).collect::<Vec<_>>()));
    };
    run(&three);
    let svg = fs::read_to_string(&three).unwrap();
    for p in panel_labels(&svg) {
        assert_eq!(p, ["kitti_gt", "masked", "doppler", "fused"]);
    }
    let csv = data_rows(&three.with_extension("csv"));
    assert_eq!(csv.len(), 4 * 4);

    let again = f.path("again.svg");
    run(&again);
    assert_eq!(fs::read(&three).unwrap(), fs::read(&again).unwrap());
    assert_eq!(
        fs::read(three.with_extension("csv")).unwrap(),
        fs::read(again.with_extension("csv")).unwrap()
    );
}

#[test]
fn plot_empty_input_exits_4() {
    let f = Fixture::new(2);
    fs::write(f.path("gt.csv"), "t_x,t_y,theta\n1,0,0\n").unwrap();
    fs::write(f.path("empty.csv"), "t_x,t_y,theta\n").unwrap();
    let o = rdo(&["plot", s(&f.path("gt.csv")), "--out", s(&f.path("p.svg"))]);
    assert_eq!(o.status.code(), Some(4));
    let o = rdo(&["plot", s(&f.path("gt.csv")), s(&f.path("empty.csv")), "--out", s(&f.path("p.svg"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unknown_config_key_is_rejected() {
    let f = Fixture::new(2);
    fs::write(f.path("bad.cfg"), "radar.colour = blue\n").unwrap();
    let o = rdo(&["odometry", s(&f.path("x")), "--config", s(&f.path("bad.cfg")), "--out", s(&f.path("o.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("radar.colour"));
}
