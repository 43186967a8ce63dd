use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smote-privacy"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_then_attack() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_string_lossy().into_owned();
    run(&[
        "generate", "--fixture", "n0=480,n1=40,d=3,seed=2", "--k", "5", "--seed", "9", "--augmented",
        "--provenance", &p("prov.csv"), "--real-out", &p("real.csv"), "--out", &p("aug.csv"),
    ]);
    run(&["generate", "--input", &p("real.csv"), "--seed", "9", "--out", &p("syn.csv")]);
    let prov = std::fs::read_to_string(p("prov.csv")).unwrap();
    assert!(prov.starts_with("row,i,j,u\n"));
    assert_eq!(prov.lines().count(), 441);
    let header = std::fs::read_to_string(p("aug.csv")).unwrap();
    assert!(header.lines().next().unwrap().ends_with(",label,origin"));

    run(&[
        "attack", "distinguish", "--input", &p("aug.csv"), "--ratio", "12", "--metrics", &p("m.csv"), "--out", &p("d.json"),
    ]);
    let d = json(&dir.path().join("d.json"));
    assert_eq!(d["precision"], 1.0);
    assert_eq!(d["recall"], 1.0);
    assert_eq!(d["detected_real"].as_array().unwrap().len(), 40);
    assert!(std::fs::read_to_string(p("m.csv")).unwrap().starts_with("method,precision,recall\ndistin_smote,1,1"));

    run(&[
        "attack", "reconstruct", "--input", &p("syn.csv"), "--ratio", "12", "--truth", &p("real.csv"), "--out", &p("r.json"),
    ]);
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["precision"], 1.0);
    assert!(!r["points"].as_array().unwrap().is_empty());
}

#[test]
fn bounds_outputs_csv() {
    let out = run(&["bounds", "--n0", "2600", "--n1", "100", "--k", "5", "--kind", "approx"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n0,n1,k,alpha,lambda,p_edge,bound,kind");
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let bound: f64 = fields[6].parse().unwrap();
    assert!((bound - 0.79225).abs() < 1e-4);

    let out = run(&["bounds", "--sweep", "--ratios", "5,10", "--ks", "3,5", "--alphas", "0,1", "--n1s", "100"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 8);
    let out = run(&["bounds", "--compare", "--ratios", "26", "--ks", "5", "--alphas", "0"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("n0,n1,k,alpha,lambda,approx,exact,ratio\n"));
}

#[test]
fn baselines_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_string_lossy().into_owned();
    run(&["generate", "--fixture", "n0=300,n1=30,d=4,seed=5", "--real-out", &p("real.csv"), "--out", &p("syn.csv")]);
    run(&["baseline", "dcr", "--syn", &p("real.csv"), "--real", &p("real.csv"), "--out", &p("dcr.json")]);
    assert_eq!(json(&dir.path().join("dcr.json"))["dcr"], 0.0);
    run(&["baseline", "linkability", "--syn", &p("syn.csv"), "--real", &p("real.csv"), "--out", &p("l.json")]);
    let l = json(&dir.path().join("l.json"))["linkability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&l));
    run(&["validate", "--input", &p("real.csv"), "--out", &p("v.json")]);
    assert_eq!(json(&dir.path().join("v.json"))["passed"], true);
}

#[test]
fn mia_reports_auc() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mia.json");
    run(&[
        "mia", "--fixture", "n0=200,n1=20,d=2,outlier=true,seed=1", "--worlds", "10", "--worlds-train", "10",
        "--out", out.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_eq!(v["target"], 219);
    assert_eq!(v["scores"].as_array().unwrap().len(), 20);
}

#[test]
fn experiment_is_reproducible_and_flags_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.txt");
    std::fs::write(
        &cfg,
        "seeds = 0..3\nmaster_seed = 4\nmethods = distinguish, reconstruct, dcr, linkability\ndataset = a:fixture:n1=20,r=10,d=2,seed=1\n",
    )
    .unwrap();
    let outs: Vec<String> = (0..2)
        .map(|i| {
            let o = dir.path().join(format!("out{i}"));
            run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--threads", "2"]);
            assert!(o.join("runs/a_seed2.json").is_file());
            assert!(o.join("metadata.json").is_file());
            std::fs::read_to_string(o.join("report.csv")).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].starts_with("dataset,r,method,metric,mean,std,seeds,a_id,l_id\n"));

    std::fs::write(&cfg, "seeds = 0..2\ndataset = tiny:fixture:n1=5,r=10,d=2\n").unwrap();
    let status = bin()
        .args(["experiment", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("bad").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    let status = bin().args(["attack", "distinguish", "--ratio", "3"]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}
