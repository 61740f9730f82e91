use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvqkd_coexist::allocator::{max_tolerable_power, DEFAULT_PROBE_INDEX};
use cvqkd_coexist::keyrate::CvqkdSystem;
use cvqkd_coexist::noise::{CoexistenceScenario, Direction, RamanProfile};
use cvqkd_coexist::units::FiberLink;

const BIN: &str = env!("CARGO_BIN_EXE_cvqkd-coexist");
const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn scenario(name: &str) -> PathBuf {
    Path::new(ROOT).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("QKD_COEXIST_DEFAULTS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows of the CSV body as string records, header included.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| {
            let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(l.as_bytes());
            r.records().next().unwrap().unwrap().iter().map(str::to_owned).collect()
        })
        .collect()
}

fn col(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn empty_budget_is_a_single_system_row() {
    let o = run(&["budget"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# tool: cvqkd-coexist"));
    assert!(text.contains("# command: budget\n"));
    let r = rows(&text);
    assert_eq!(r.len(), 3);
    assert_eq!(r[1][0], "system");
    assert_eq!(r[2][0], "total");
    assert_eq!(r[2][1].parse::<f64>().unwrap(), 0.03);
}

#[test]
fn lab_budget_has_bob_referred_raman_near_one_milli() {
    let path = scenario("lab_25km.toml");
    let o = run(&["budget", "--scenario", path.to_str().unwrap(), "--reference", "bob"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    let sasrs = r.iter().find(|row| row[0] == "sasrs_fwd").unwrap();
    let v: f64 = sasrs[1].parse().unwrap();
    assert!(v > 0.8e-3 && v < 2.0e-3, "{v}");
    assert_eq!(r.iter().filter(|row| row[0] != "source").count(), 12);
}

#[test]
fn unknown_key_exits_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[link]\nlength_km = 25.0\nlenght = 3\n").unwrap();
    let out = dir.path().join("out.csv");
    let o = run(&["budget", "--scenario", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("lenght"));
}

#[test]
fn malformed_toml_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system\nv_a = 2").unwrap();
    let o = run(&["keyrate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn sweep_r2(path: &Path) -> f64 {
    let o = run(&["sweep", "--scenario", path.to_str().unwrap()]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    let x = col(&r, "x");
    let y = col(&r, "xi_total_n0");
    assert_eq!(x.len(), 17);
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    assert!(sxy > 0.0);
    sxy * sxy / (sxx * syy)
}

#[test]
fn power_sweep_noise_is_affine() {
    let r2 = sweep_r2(&scenario("lab_25km.toml"));
    assert!(r2 > 0.9999, "{r2}");
}

#[test]
fn power_sweep_is_affine_without_xpm() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lab.toml");
    let text = std::fs::read_to_string(scenario("lab_25km.toml"))
        .unwrap()
        .replace("\"../data/", &format!("\"{ROOT}/data/"));
    let sources = "sources = [\"sasrs_fwd\", \"sasrs_bwd\", \"leakage\", \"fwm\", \"ase\", \"sideband\", \"system\"]\n";
    std::fs::write(&p, format!("{sources}{text}")).unwrap();
    let r2 = sweep_r2(&p);
    assert!(r2 > 0.9999, "{r2}");
}

#[test]
fn empty_sweep_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(&p, "[sweep]\naxis = \"power\"\nstart = 2.0\nstop = 2.0\n").unwrap();
    let o = run(&["sweep", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn distance_sweep_null_power_matches_envelope() {
    let path = scenario("envelope_forward.toml");
    let o = run(&["sweep", "--scenario", path.to_str().unwrap()]);
    let r = rows(&stdout(&o));
    let x = col(&r, "x");
    let i = r[0].iter().position(|h| h == "null_key_power_mw").unwrap();
    let profile = RamanProfile::from_csv_path(format!("{ROOT}/data/raman_flat.csv")).unwrap();
    let mut system = CvqkdSystem::default();
    system.v_a = 2.0;
    for (k, km) in x.iter().enumerate().filter(|(_, &km)| km <= 60.0) {
        let s = CoexistenceScenario::new(system.clone(), FiberLink::with_length(*km), profile.clone());
        let want = max_tolerable_power(*km, Direction::Forward, &s, DEFAULT_PROBE_INDEX)
            .unwrap()
            .power
            .value();
        let got: f64 = r[k + 1][i].parse().unwrap();
        assert!((got / want - 1.0).abs() < 1e-9, "{km} km: {got} vs {want}");
    }
}

#[test]
fn simulate_is_reproducible_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(
        &p,
        "[simulation]\nn_total_pulses = 400000\nblock_pulses = 100000\nruns = 3\n",
    )
    .unwrap();
    let a = run(&["simulate", "--scenario", p.to_str().unwrap(), "--seed", "11"]);
    let b = run(&["simulate", "--scenario", p.to_str().unwrap(), "--seed", "11"]);
    let c = run(&["simulate", "--scenario", p.to_str().unwrap(), "--seed", "12"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let r = rows(&stdout(&a));
    assert_eq!(r.len(), 4);
    for xi in col(&r, "xi_hat_n0") {
        assert!((xi - 0.03).abs() < 0.05, "{xi}");
    }
}

#[test]
fn simulate_block_dump_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(&p, "[simulation]\nn_total_pulses = 400000\nblock_pulses = 100000\n").unwrap();
    let blocks = dir.path().join("blocks.csv");
    let o = run(&["simulate", "--scenario", p.to_str().unwrap(), "--blocks", blocks.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&blocks).unwrap();
    assert!(text.lines().count() >= 4);
}

#[test]
fn allocate_writes_role_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alloc.csv");
    let path = scenario("wdm_pon_25km.toml");
    let o = run(&["allocate", "--scenario", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let r = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(r[0], ["itu_index", "wavelength_nm", "role", "marginal_xi_n0", "cumulative_xi_n0"]);
    let fwd = r.iter().filter(|x| x[2] == "fwd").count();
    let bwd = r.iter().filter(|x| x[2] == "bwd").count();
    assert_eq!(fwd, bwd);
    assert!(fwd >= 1);
    let cum: Vec<f64> = r[1..].iter().filter(|x| x[2] == "fwd" || x[2] == "bwd").map(|x| x[4].parse().unwrap()).collect();
    assert!(cum.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn fit_raman_recovers_bundled_coefficients() {
    let m = format!("{ROOT}/data/raman_measurements.csv");
    let o = run(&["fit-raman", "--measurements", &m]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    let mut betas = col(&r, "beta_per_km_nm");
    betas.sort_by(f64::total_cmp);
    for (got, truth) in betas.iter().zip([1.5e-9, 2.0e-9, 2.6e-9, 2.8e-9, 3.1e-9]) {
        assert!((got / truth - 1.0).abs() < 0.02, "{got} vs {truth}");
    }
}

#[test]
fn negative_key_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(
        &p,
        "[link]\nlength_km = 50.0\n[[channels]]\nindex = 34\ndirection = \"forward\"\npower_dbm = 15.0\n",
    )
    .unwrap();
    let o = run(&["keyrate", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let r = rows(&stdout(&o));
    assert_eq!(r[1][7], "false");
}

#[test]
fn defaults_file_from_environment_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("defaults.toml");
    std::fs::write(&d, "[system]\nxi_system_n0 = 0.05\n").unwrap();
    let o = Command::new(BIN)
        .arg("budget")
        .env("QKD_COEXIST_DEFAULTS", &d)
        .output()
        .unwrap();
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r[2][1].parse::<f64>().unwrap(), 0.05);
}

#[test]
fn defaults_output_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("resolved.toml");
    let o = run(&["defaults", "--out", p.to_str().unwrap()]);
    assert!(o.status.success());
    let again = run(&["budget", "--scenario", p.to_str().unwrap()]);
    assert!(again.status.success());
}

#[test]
fn plot_script_reads_commented_csv() {
    let o = run(&["plot-script", "--input", "sweep.csv", "--kind", "sweep"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("comment='#'"));
    assert!(s.contains("sweep.csv"));
}
