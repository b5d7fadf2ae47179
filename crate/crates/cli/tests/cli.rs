use std::path::Path;
use std::process::{Command, Output};

fn nanoplate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanoplate")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SOLVE: &str = r#"
seed = 7
[domain]
kind = "disk"
radius = 1.0
[material]
mu = 1.0
lambda = 1.0
thickness = 1.0
length_scales = [1.0, 1.0, 1.0]
[discretization]
degree = 4
elements = 6
[data]
source = "synthesize"
u_star = "x1^3"
[output]
grid = 21
export_data = true
export_matrix = true
"#;

const SYNTH: &str = "source = \"synthesize\"\nu_star = \"x1^3\"";

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_recovers_a_manufactured_cubic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "solve.toml", SOLVE);
    let out = tmp.path().join("out");
    let o = nanoplate(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = json(&out.join("diagnostics.json"));
    assert!(d["h3_error_modulo_affine"]["relative"].as_f64().unwrap() <= 1e-7, "{d}");
    let hash = d["config_hash"].as_str().unwrap().to_owned();
    for f in ["solution.csv", "data.csv", "stiffness.coo"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("# nanoplate solve config_hash={hash}"), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("x1,x2,u,u1,u2"));
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "solve.toml", SOLVE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert!(nanoplate(&["solve", "--config", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    for f in ["solution.csv", "data.csv", "diagnostics.json", "stiffness.coo"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exported_boundary_data_can_be_read_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "solve.toml", SOLVE);
    let first = tmp.path().join("first");
    assert!(nanoplate(&["solve", "--config", &cfg, "--out", first.to_str().unwrap()]).status.success());
    let data = first.join("data.csv");
    let replay = SOLVE.replace(SYNTH, &format!("source = \"csv\"\npath = {:?}", data.to_str().unwrap()));
    let cfg2 = write(tmp.path(), "replay.toml", &replay);
    let second = tmp.path().join("second");
    let o = nanoplate(&["solve", "--config", &cfg2, "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (json(&first.join("diagnostics.json")), json(&second.join("diagnostics.json")));
    let (ea, eb) = (a["energy"].as_f64().unwrap(), b["energy"].as_f64().unwrap());
    assert!((ea - eb).abs() <= 1e-8 * ea, "{ea} vs {eb}");
}

#[test]
fn missing_degree_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &SOLVE.replace("degree = 4\n", ""));
    let o = nanoplate(&["solve", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degree"), "{}", stderr(&o));
}

#[test]
fn malformed_settings_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("expr.toml", SOLVE.replace("\"x1^3\"", "\"x1^^3\"")),
        ("degree.toml", SOLVE.replace("degree = 4", "degree = 2")),
        ("solver.toml", SOLVE.replace("elements = 6", "elements = 6\nsolver = \"lu\"")),
        ("domain.toml", SOLVE.replace("radius = 1.0", "radius = -1.0")),
    ] {
        let cfg = write(tmp.path(), name, &text);
        let o = nanoplate(&["solve", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
    }
    let o = nanoplate(&["solve", "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn incompatible_data_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SOLVE.replace(SYNTH, "source = \"analytic\"\nvhat = \"1\"\nmn_hat = \"0\"\nmnh_hat = \"0\"");
    let cfg = write(tmp.path(), "incompatible.toml", &text);
    let o = nanoplate(&["solve", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn seed_flag_reseeds_the_battery() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[carleman]\norders = [1]\ntau_count = 2\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(nanoplate(&["carleman-sweep", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let o =
        nanoplate(&["carleman-sweep", "--config", &cfg, "--seed", "5", "--threads", "1", "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (ja, jb) = (json(&a.join("carleman.json")), json(&b.join("carleman.json")));
    assert_ne!(ja["config_hash"], jb["config_hash"]);
    assert_eq!(jb["orders"][0]["fields"][4]["field"], "random-5");
}

#[test]
fn uc_lab_reports_exact_doubling_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = nanoplate(&["uc-lab", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let j = json(&out.join("uc_lab.json"));
    for (k, exact) in [4.0, 16.0, 64.0].iter().enumerate() {
        for r in j["fields"][k]["doubling_ratios"].as_array().unwrap() {
            assert!((r.as_f64().unwrap() / exact - 1.0).abs() < 1e-7);
        }
        assert_eq!(j["fields"][k]["three_sphere"]["theta"].as_f64().unwrap(), 1.0 / 17.0);
    }
}
