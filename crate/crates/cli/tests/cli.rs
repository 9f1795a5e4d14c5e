use std::path::Path;
use std::process::{Command, Output};

fn patchdim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchdim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn error_kind(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].as_str().unwrap().to_string()
}

fn synth(dir: &Path, kind: &str, seed: &str) {
    let out = patchdim(
        &["synth", "--kind", kind, "--seed", seed, "--size", "64"],
        dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_is_reproducible_and_noise_is_background() {
    let tmp = tempfile::tempdir().unwrap();
    synth(&tmp.path().join("a"), "noise", "4");
    synth(&tmp.path().join("b"), "noise", "4");
    for f in ["cont.grd", "mag.grd", "mask.grd"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(f)).unwrap(),
            std::fs::read(tmp.path().join("b").join(f)).unwrap()
        );
    }
    let mask = patchdim::grd::read_mask(tmp.path().join("a/mask.grd")).unwrap();
    assert_eq!(mask.count(patchdim::Region::Background), 64 * 64);
}

#[test]
fn failures_write_nothing_and_report_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = patchdim(
        &[
            "dim",
            "--pair",
            tmp.path().join("missing").to_str().unwrap(),
        ],
        &out,
    );
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(error_kind(&r), "input");
    assert!(!out.exists());

    let r = patchdim(&["synth", "--size", "32"], &out);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(error_kind(&r), "invalid_parameter");
    assert!(!out.exists());

    let r = patchdim(&["synth", "--kind", "triangle"], &out);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(error_kind(&r), "usage");

    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"dictionary": {"atom_count": 9}}"#).unwrap();
    let r = patchdim(&["synth", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(error_kind(&r), "config");
    std::fs::write(&cfg, r#"{"no_such_section": {}}"#).unwrap();
    let r = patchdim(&["synth", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(error_kind(&r), "config");
    assert!(!out.exists());
}

#[test]
fn dict_rejects_an_oversized_crop() {
    let tmp = tempfile::tempdir().unwrap();
    let pair = tmp.path().join("p");
    synth(&pair, "single_spot", "1");
    let out = tmp.path().join("d");
    let r = patchdim(&["dict", "--pair", pair.to_str().unwrap()], &out);
    assert_eq!(error_kind(&r), "invalid_parameter");
    assert!(!out.exists());
    let r = patchdim(
        &[
            "dict",
            "--pair",
            pair.to_str().unwrap(),
            "--no-crop",
            "--atoms",
            "3",
        ],
        &out,
    );
    assert!(r.status.success());
    let rec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("p.dict.json")).unwrap()).unwrap();
    assert_eq!(rec["atom_count"], 3);
    assert_eq!(rec["dim"], 18);
    assert_eq!(rec["flattened"].as_array().unwrap().len(), 54);
}

#[test]
fn dim_orders_phantom_regions() {
    let tmp = tempfile::tempdir().unwrap();
    let pair = tmp.path().join("p");
    synth(&pair, "single_spot", "2");
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"dimension": {"graph": {"num_runs": 2}, "thresholds": [0.97]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("d");
    let r = patchdim(
        &[
            "dim",
            "--pair",
            pair.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
        &out,
    );
    assert!(r.status.success());
    let mut knn = std::collections::HashMap::new();
    let mut reader = csv::Reader::from_path(out.join("dim.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["scale", "region", "method", "estimate", "spread"]
    );
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[2] == "knn" {
            knn.insert(rec[1].to_string(), rec[3].parse::<f64>().unwrap());
        }
    }
    assert!(knn["umbra"] < knn["background"]);
}

#[test]
fn metrics_of_identical_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let labels = tmp.path().join("l.csv");
    std::fs::write(&labels, "source_id,label\na,0\nb,0\nc,1\nd,2\n").unwrap();
    let shuffled = tmp.path().join("s.csv");
    std::fs::write(&shuffled, "source_id,label\nd,x\nc,y\nb,z\na,z\n").unwrap();
    let trend = tmp.path().join("t.csv");
    std::fs::write(&trend, "group,value\nlow,1\nlow,2\nhigh,3\nhigh,4\n").unwrap();
    let out = tmp.path().join("m");
    let args = [
        "metrics",
        "--labels",
        labels.to_str().unwrap(),
        "--labels",
        shuffled.to_str().unwrap(),
    ];
    let mut with_trend = args.to_vec();
    with_trend.extend(["--trend", trend.to_str().unwrap()]);
    assert!(patchdim(&with_trend, &out).status.success());
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(v["nmi"], 1.0);
    assert_eq!(v["ari"], 1.0);
    assert_eq!(v["n"], 4);
    assert_eq!(v["trend"]["test"]["statistic"], 4.0);

    std::fs::write(&shuffled, "source_id,label\nd,x\nc,y\n").unwrap();
    let r = patchdim(&args, &tmp.path().join("bad"));
    assert_eq!(error_kind(&r), "input");
}
