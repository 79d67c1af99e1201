use std::path::PathBuf;
use std::process::{Command, Output};

use gssl::instances::load_instance;

fn gssl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gssl")).args(args).output().expect("spawn gssl")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gssl-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn lines(p: &PathBuf) -> Vec<String> {
    std::fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}

#[test]
fn threshold_sweep_header_and_pieces() {
    let dir = scratch("sweep");
    let fx = dir.join("fx.json");
    let out = dir.join("curve.csv");
    assert!(gssl(&["generate", "--fixture", "lemma-b1", "--r", "1.2,1.4", "--out", fx.to_str().unwrap()]).status.success());
    let o = gssl(&["sweep", "--family", "threshold", "--objective", "harmonic", "--instance", fx.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out);
    assert_eq!(rows[0], "piece_lo,piece_hi,loss");
    // the dip below the witness sits between the two oscillation points
    assert!(rows.contains(&"1.2,1.4,0".to_string()), "{rows:?}");
}

#[test]
fn generated_fixture_round_trips() {
    let dir = scratch("roundtrip");
    let fx = dir.join("fx.json");
    assert!(gssl(&["generate", "--fixture", "oscillation", "--r", "1.2,1.4", "--out", fx.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&fx).unwrap();
    let inst = load_instance(&fx, None).unwrap();
    assert_eq!(inst.to_json(), text);
    let d = inst.distances().unwrap();
    assert_eq!(d[(0, 1)], 1.1);
}

#[test]
fn online_rows_summary_and_baseline() {
    let dir = scratch("online");
    let out = dir.join("o.csv");
    let o = gssl(&["online", "--mode", "semi-bandit", "--family", "gaussian", "--objective", "harmonic", "--T", "50", "--seed", "7", "--baseline", "random", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out);
    assert_eq!(rows.len(), 51);
    assert!(rows[0].starts_with("round,rho,loss,best_loss_so_far,avg_regret"));
    let last: Vec<f64> = rows[50].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 50.0);
    assert!(last[4] < last[7], "learner {} vs baseline {}", last[4], last[7]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("summary: T=50"));
}

#[test]
fn online_without_baseline_has_five_columns() {
    let o = gssl(&["online", "--mode", "full", "--family", "threshold", "--T", "5", "--n", "10"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut it = text.lines();
    assert_eq!(it.next(), Some("round,rho,loss,best_loss_so_far,avg_regret"));
    assert_eq!(it.clone().filter(|l| !l.starts_with("summary")).count(), 5);
}

#[test]
fn full_information_with_weighted_family_is_a_usage_error() {
    let o = gssl(&["online", "--mode", "full", "--family", "gaussian", "--T", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("semi-bandit"));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(gssl(&["sweep", "--family", "cubic"]).status.code(), Some(2));
    assert_eq!(gssl(&["sweep", "--grid", "1:0:0.1"]).status.code(), Some(2));
    assert_eq!(gssl(&["bogus"]).status.code(), Some(2));
}

#[test]
fn empty_instance_file_names_the_file() {
    let dir = scratch("empty");
    let p = dir.join("nothing.json");
    std::fs::write(&p, "").unwrap();
    let o = gssl(&["sweep", "--instance", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nothing.json"));
}

#[test]
fn erm_writes_one_row() {
    let dir = scratch("erm");
    let train = dir.join("train");
    let out = dir.join("erm.csv");
    assert!(gssl(&["generate", "--T", "4", "--n", "10", "--out", train.to_str().unwrap()]).status.success());
    let o = gssl(&["erm", "--family", "threshold", "--instances", train.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], "rho_star,train_loss");
}

#[test]
fn active_grid_has_46_rows() {
    let dir = scratch("active");
    let out = dir.join("a.csv");
    let o = gssl(&["active", "--budget", "2", "--sigma-grid", "0.5:5:0.1", "--n", "10", "--labeled", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out);
    assert_eq!(rows.len(), 47);
    assert!(rows[0].starts_with("sigma,loss"));
    assert!(rows[46].starts_with("5,") || rows[46].starts_with("5.0"), "{}", rows[46]);
}

#[test]
fn gaussian_sweep_reports_probe_intervals() {
    let dir = scratch("probe");
    let out = dir.join("s.csv");
    let iv = dir.join("iv.csv");
    let o = gssl(&["sweep", "--family", "gaussian", "--grid", "0.5:3:0.5", "--probe", "1,2", "--n", "10", "--out", out.to_str().unwrap(), "--intervals", iv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out)[0], "sigma,loss");
    assert_eq!(lines(&out).len(), 7);
    let ivs = lines(&iv);
    assert_eq!(ivs.len(), 3);
    for row in &ivs[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let (p, lo, hi): (f64, f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        assert!(lo <= p && p <= hi);
    }
}
