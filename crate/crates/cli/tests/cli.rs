use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hopcpt::config::ExperimentConfig;
use hopcpt::experiment::{execute, prepare_data, Mode};

fn bin(args: &[&str], paths: &[&Path]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hopcpt"));
    c.args(args);
    for p in paths {
        c.arg(p);
    }
    c.output().unwrap()
}

fn table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| headers.iter().zip(r.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

const FAST: &str =
    "[data.synthetic]\ntotal_steps = 240\n[hopcpt]\nepochs = 10\nhidden = 8\nencoding = 4\nattention = 4\n";

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn generate_writes_requested_series() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(bin(&["generate", "--seed", "5", "--out"], &[&a]).status.success());
    assert!(bin(&["generate", "--seed", "5", "--out"], &[&b]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rows = table(&a);
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| ["3", "21"].contains(&r["x0"].as_str())));
    assert_eq!(rows[0]["regime"], "low");

    let cfg = write_config(dir.path(), "c.toml", "[data.synthetic]\nregime_len_min = 1\nregime_len_max = 1\n");
    let c = dir.path().join("c.csv");
    assert!(bin(&["generate", "--steps", "3", "--out"], &[&c, Path::new("--config"), &cfg]).status.success());
    let xs: Vec<f64> = table(&c).iter().map(|r| num(r, "x0")).collect();
    assert_eq!(xs, vec![3.0, 21.0, 3.0]);
}

#[test]
fn run_writes_one_summary_row_per_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("seeds = 2\nalphas = [0.05, 0.1, 0.2]\n[[methods]]\nname = \"splitcp\"\n{FAST}"),
    );
    let out = dir.path().join("out");
    let o = bin(&["run", "--config"], &[&cfg, Path::new("--out"), &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = table(&out.join("summary.csv"));
    assert_eq!(summary.len(), 3);
    assert!(summary.iter().all(|r| r["method"] == "splitcp" && r["n_seeds"] == "2"));
    assert_eq!(table(&out.join("per_seed.csv")).len(), 6);
    assert!(out.join("intervals/splitcp_alpha0.2_seed1.csv").exists());
}

#[test]
fn deterministic_methods_have_zero_spread_on_fixed_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("series.csv");
    assert!(bin(&["generate", "--steps", "300", "--out"], &[&data]).status.success());
    let body = format!(
        "seeds = 3\nalphas = [0.1]\n[data]\nsource = \"csv\"\npath = {:?}\n\
         [[methods]]\nname = \"splitcp\"\n[[methods]]\nname = \"nexcp\"\n[[methods]]\nname = \"enbpi\"\n[[methods]]\nname = \"knncp\"\n",
        data.display().to_string()
    );
    let cfg = ExperimentConfig::parse(&body).unwrap();
    let out = execute(&cfg, Mode::Run).unwrap();
    assert!(out.failures.is_empty());
    let mut by_method: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for c in &out.cells {
        by_method.entry(&c.method).or_default().push(c.report.mean_pi_width);
    }
    for (m, widths) in by_method {
        assert!(widths.iter().all(|w| *w == widths[0]), "{m}: {widths:?}");
    }
}

#[test]
fn provided_predictions_are_used_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    let mut text = String::from("t,y,y_hat,x0\n");
    for t in 0..60 {
        text.push_str(&format!("{t},{},{},{}\n", t % 7, 2.5, t % 3));
    }
    std::fs::write(&data, text).unwrap();
    let body =
        format!("[data]\nsource = \"csv\"\nbase_model = \"provided\"\npath = {:?}\n", data.display().to_string());
    let d = prepare_data(&ExperimentConfig::parse(&body).unwrap(), 0).unwrap();
    assert!(d.dataset.predictions().iter().all(|p| *p == 2.5));
    assert_eq!(d.split.test(), 40..60);
}

#[test]
fn nexcp_grid_lists_every_decay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("seeds = 1\nalphas = [0.1]\n[[methods]]\nname = \"nexcp\"\n{FAST}"),
    );
    let out = dir.path().join("out");
    assert!(bin(&["grid", "--config"], &[&cfg, Path::new("--out"), &out]).status.success());
    let grid = table(&out.join("grid.csv"));
    assert_eq!(grid.len(), 7);
    assert_eq!(grid.iter().filter(|r| r["selected"] == "1").count(), 1);
}

#[test]
fn single_point_grid_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "seeds = 2\nalphas = [0.1]\n\
         [[methods]]\nname = \"hopcpt\"\ngrid = {{ learning_rate = [0.001], dropout = [0.0], time_encoding = [true] }}\n\
         [[methods]]\nname = \"nexcp\"\nnexcp_rho = 0.99\ngrid = {{ nexcp_rho = [0.99] }}\n\
         [[methods]]\nname = \"enbpi\"\nadaptive = {{ mode = \"simple\", gamma = 0.005 }}\n\
         grid = {{ enbpi_window = [100], adaptive_mode = [\"simple\"], adaptive_gamma = [0.005] }}\n{FAST}"
    );
    let cfg = write_config(dir.path(), "c.toml", &body);
    let (run, grid) = (dir.path().join("run"), dir.path().join("grid"));
    assert!(bin(&["run", "--config"], &[&cfg, Path::new("--out"), &run]).status.success());
    assert!(bin(&["grid", "--config"], &[&cfg, Path::new("--out"), &grid]).status.success());
    assert_eq!(std::fs::read(run.join("summary.csv")).unwrap(), std::fs::read(grid.join("summary.csv")).unwrap());
    assert_eq!(std::fs::read(run.join("per_seed.csv")).unwrap(), std::fs::read(grid.join("per_seed.csv")).unwrap());
}

#[test]
fn eval_recomputes_summary_from_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("seeds = 3\nalphas = [0.1, 0.15]\n{FAST}"));
    let out = dir.path().join("out");
    assert!(bin(&["run", "--config"], &[&cfg, Path::new("--out"), &out]).status.success());
    assert!(bin(&["eval", "--input"], &[&out]).status.success());
    let key = |r: &BTreeMap<String, String>| (r["method"].clone(), r["alpha"].clone());
    let original: BTreeMap<_, _> = table(&out.join("summary.csv")).into_iter().map(|r| (key(&r), r)).collect();
    let recomputed = table(&out.join("eval_summary.csv"));
    assert_eq!(recomputed.len(), original.len());
    for r in &recomputed {
        let o = &original[&key(r)];
        for col in r.keys().filter(|c| c.ends_with("_mean") || c.ends_with("_std")) {
            assert!((num(r, col) - num(o, col)).abs() <= 1e-9, "{col}");
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut cfg = ExperimentConfig::parse(&format!("seeds = 3\nalphas = [0.1, 0.2]\n{FAST}")).unwrap();
    let a = execute(&cfg, Mode::Run).unwrap();
    cfg.jobs = 3;
    let b = execute(&cfg, Mode::Run).unwrap();
    let key = |o: &hopcpt::experiment::ExperimentOutput| {
        o.cells.iter().map(|c| (c.method.clone(), c.seed, c.report.mean_pi_width.to_bits())).collect::<Vec<_>>()
    };
    assert_eq!(key(&a), key(&b));
}

#[test]
fn checkpoints_reload_to_the_trained_model() {
    let cfg =
        ExperimentConfig::parse(&format!("seeds = 1\nalphas = [0.1]\n[[methods]]\nname = \"hopcpt\"\n{FAST}")).unwrap();
    let out = execute(&cfg, Mode::Run).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    hopcpt::checkpoint::save(&path, &out.models[0].model).unwrap();
    assert_eq!(hopcpt::checkpoint::load(&path).unwrap(), out.models[0].model);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "alphas = [0.0]\n");
    assert_eq!(bin(&["run", "--config"], &[&bad]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--method", "nope"], &[]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"], &[]).status.code(), Some(2));

    // A series too short for any method's history fails every cell.
    let data = dir.path().join("short.csv");
    std::fs::write(&data, "t,y,x0\n0,1,1\n1,2,1\n2,3,1\n3,4,2\n4,5,2\n5,6,3\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "short.toml",
        &format!(
            "seeds = 1\nalphas = [0.1]\n[data]\nsource = \"csv\"\npath = {:?}\n[[methods]]\nname = \"hopcpt\"\n",
            data.display().to_string()
        ),
    );
    let out = dir.path().join("out");
    let o = bin(&["run", "--config"], &[&cfg, Path::new("--out"), &out]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(table(&out.join("failures.csv")).len(), 1);
}
