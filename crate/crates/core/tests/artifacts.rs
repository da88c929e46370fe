//! Emitted-artifact contracts: lossless CSV round-trips, snapshot format,
//! summary keys, and CLI-level config behavior.

use neural_particle::config::{resolve, ConfigMap};
use neural_particle::output::read_series;
use neural_particle::runner::execute;

fn tiny_run(dir: &std::path::Path) -> neural_particle::output::RunSummary {
    let mut map = ConfigMap::parse(
        "nx = 6\nny = 6\nsteps = 2\nlayout = 2,12,12,14\nadam_iters_first = 100\n\
         lbfgs_max_iter_first = 80\nlbfgs_max_iter = 60\nadam_iters = 0\ncheckpoint = true\n",
    )
    .unwrap();
    map.set("out_dir", dir.display().to_string());
    let run = resolve("static-pressure", &map).unwrap();
    execute(&run).unwrap()
}

#[test]
fn emitted_files_roundtrip_and_summary_is_complete() {
    let dir = std::env::temp_dir().join("np-artifacts-test");
    let _ = std::fs::remove_dir_all(&dir);
    let summary = tiny_run(&dir);

    // Mandatory summary contents.
    assert_eq!(summary.scenario, "static-pressure");
    assert_eq!(summary.layout, vec![2, 12, 12, 14]);
    assert_eq!(summary.stages, 4);
    assert_eq!(summary.dt, 1.0);
    assert_eq!(summary.steps, 2);
    assert!(summary.final_loss.is_finite());
    assert!(summary.runtime_seconds > 0.0);
    let json = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    for key in [
        "scenario",
        "seed",
        "layout",
        "stages",
        "dt",
        "steps",
        "final_loss",
        "runtime_seconds",
    ] {
        assert!(json.contains(key), "summary missing {key}");
    }

    // Series CSV round-trips bit-exactly.
    let series_path = dir.join("series.csv");
    let rows = read_series(&series_path).unwrap();
    assert_eq!(rows.len(), 2);
    let rewritten = dir.join("series_rewrite.csv");
    neural_particle::output::write_series(&rewritten, &rows).unwrap();
    assert_eq!(
        std::fs::read(&series_path).unwrap(),
        std::fs::read(&rewritten).unwrap()
    );

    // Snapshots carry the mandatory header and parse losslessly.
    let snap = std::fs::read_to_string(dir.join("snapshot_00002.csv")).unwrap();
    let mut lines = snap.lines();
    assert_eq!(lines.next().unwrap(), "id,tag,x,y,vx,vy,p");
    let mut n = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7);
        cols[0].parse::<usize>().unwrap();
        for c in &cols[2..] {
            let v: f64 = c.parse().unwrap();
            assert_eq!(neural_particle::output::fmt_f64(v), *c);
        }
        n += 1;
    }
    assert_eq!(n, 36);

    // Loss history parses with the documented schema.
    let hist = std::fs::read_to_string(dir.join("loss_history.csv")).unwrap();
    assert!(hist.starts_with("time_step,phase,iteration,loss,sse_v,sse_div,sse_pbar\n"));

    // Checkpoint round-trips losslessly.
    let params = neural_particle::network::load_checkpoint(&dir.join("params.txt")).unwrap();
    assert_eq!(params.layout().sizes, vec![2, 12, 12, 14]);

    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn interrupted_runs_leave_complete_snapshots() {
    // Atomic emission: no .tmp leftovers and every snapshot parses fully.
    let dir = std::env::temp_dir().join("np-artifacts-atomic");
    let _ = std::fs::remove_dir_all(&dir);
    tiny_run(&dir);
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        assert!(
            !path.extension().is_some_and(|e| e == "tmp"),
            "leftover temp file {path:?}"
        );
    }
    let _ = std::fs::remove_dir_all(&dir);
}
