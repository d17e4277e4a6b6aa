use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_adiabatic-elim"))
        .args(args)
        .env("ADIABATIC_ELIM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_single_level_follows_the_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["simulate", "--model", "builtin:single_level", "--param", "beta=1", "--grid", "0:10:41", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut n = 0;
    for r in rows(&dir.path().join("trajectories.csv")).iter().filter(|r| r[1] == "exact") {
        let (t, p): (f64, f64) = (r[0].parse().unwrap(), r[2].parse().unwrap());
        assert!((p - (1.0 + (-2.0 * t).exp()) / 2.0).abs() < 1e-8, "t {t}: {p}");
        n += 1;
    }
    assert_eq!(n, 41);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["params"]["beta"], 1.0);
    assert_eq!(manifest["threads"], 2);
    assert!(manifest["policy"]["kernel_rel_tol"].is_number());
}

#[test]
fn figure_fig2_writes_five_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figure", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for label in ["0.1", "1", "10", "inf", "0"] {
        assert!(dir.path().join(format!("fig2_beta_{label}.csv")).exists(), "{label}");
    }
}

#[test]
fn spectrum_lists_both_sources() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--model", "builtin:fano_fig3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(text.starts_with("re,im,source\n"));
    let r = rows(&dir.path().join("spectrum.csv"));
    assert!(r.iter().any(|r| r[2] == "L0") && r.iter().any(|r| r[2] == "Leff"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["sweep", "--model", "builtin:lambda_fig8", "--grid", "0.1:100:5", "--log-grid", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["sweep.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_model_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("bad.json");
    std::fs::write(&model, "{\n  \"name\": \"x\",\n  \"ground_levels\": 3\n}\n").unwrap();
    let o = run(&["steady", "--model", model.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_figure_and_stray_parameters_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(!run(&["figure", "fig4", "--out", out]).status.success());
    assert!(!run(&["steady", "--model", "builtin:fano_fig3", "--param", "beta=2", "--out", out]).status.success());
    assert!(!run(&["simulate", "--model", "builtin:fano_fig3", "--grid", "1:0:5", "--out", out]).status.success());
}
