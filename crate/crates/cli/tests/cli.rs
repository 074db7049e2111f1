use std::path::Path;
use std::process::{Command, Output};

use tssm_core::io::save_png;
use tssm_core::GrayImage;

fn tssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tssm"))
        .args(args)
        .env("TSSM_LOG", "error")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Small corpus shared by several tests.
fn corpus(dir: &Path, pages: &str) {
    let out = tssm(&["synth", "--pages", pages, "--seed", "7", "--out", p(dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn blank_page_gives_empty_region_list() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("blank.png");
    save_png(&GrayImage::filled(320, 240, 255), &img).unwrap();
    let out_json = dir.path().join("out.json");
    let out = tssm(&["detect", "--input", p(&img), "--out", p(&out_json)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        json(&out_json),
        serde_json::json!({"page": "blank", "regions": []})
    );
}

#[test]
fn corrupt_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("blank.png");
    save_png(&GrayImage::filled(64, 64, 255), &img).unwrap();
    let out_json = dir.path().join("out.json");
    for (body, key) in [
        (r#"{"th_sim": "high"}"#, "th_sim"),
        (r#"{"min_rows": 2.5}"#, "min_rows"),
        (r#"{"adj_fraction": 1.5}"#, "adj_fraction"),
        (r#"{"pair_mode": "every"}"#, "pair_mode"),
        (r#"{"th_sim": 0.8, "thsim": 0.9}"#, "thsim"),
    ] {
        let cfg = dir.path().join("cfg.json");
        std::fs::write(&cfg, body).unwrap();
        let out = tssm(&[
            "detect",
            "--input",
            p(&img),
            "--config",
            p(&cfg),
            "--out",
            p(&out_json),
        ]);
        assert_eq!(code(&out), 2, "{body}");
        assert!(stderr(&out).contains(key), "{body}: {}", stderr(&out));
    }
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"thsim": 0.9}"#).unwrap();
    let out = tssm(&[
        "detect",
        "--input",
        p(&img),
        "--config",
        p(&cfg),
        "--lenient-config",
        "--out",
        p(&out_json),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn exit_codes_for_bad_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out_json = dir.path().join("out.json");
    let missing = dir.path().join("missing.png");
    assert_eq!(
        code(&tssm(&[
            "detect",
            "--input",
            p(&missing),
            "--out",
            p(&out_json)
        ])),
        3
    );

    let garbage = dir.path().join("garbage.png");
    std::fs::write(&garbage, b"not a png").unwrap();
    assert_eq!(
        code(&tssm(&[
            "detect",
            "--input",
            p(&garbage),
            "--out",
            p(&out_json)
        ])),
        3
    );

    let img = dir.path().join("blank.png");
    save_png(&GrayImage::filled(64, 64, 255), &img).unwrap();
    let unwritable = dir.path().join("no/such/dir/out.json");
    assert_eq!(
        code(&tssm(&[
            "detect",
            "--input",
            p(&img),
            "--out",
            p(&unwritable)
        ])),
        4
    );

    assert_eq!(code(&tssm(&["detect", "--out", p(&out_json)])), 2);
    assert_eq!(
        code(&tssm(&["synth", "--pages", "0", "--out", p(dir.path())])),
        2
    );
    let out = tssm(&[
        "detect",
        "--input",
        p(&img),
        "--out",
        p(&out_json),
        "--th-sim",
        "1.5",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("th_sim"));
}

#[test]
fn directory_detection_covers_every_page_in_order() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), "6");
    let out_json = dir.path().join("det.json");
    let overlay = dir.path().join("overlay");
    let out = tssm(&[
        "detect",
        "--input",
        p(dir.path()),
        "--out",
        p(&out_json),
        "--jobs",
        "3",
        "--overlay",
        p(&overlay),
        "--groundtruth",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let pages: Vec<String> = json(&out_json)
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["page"].as_str().unwrap().to_string())
        .collect();
    let expect: Vec<String> = (1..=6).map(|i| format!("page_{i:04}")).collect();
    assert_eq!(pages, expect);
    for page in &expect {
        assert!(overlay.join(format!("{page}.png")).is_file());
    }
}

#[test]
fn tables_only_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), "8");
    let all = dir.path().join("all.json");
    let tables = dir.path().join("tables.json");
    assert_eq!(
        code(&tssm(&[
            "detect",
            "--input",
            p(dir.path()),
            "--out",
            p(&all)
        ])),
        0
    );
    assert_eq!(
        code(&tssm(&[
            "detect",
            "--input",
            p(dir.path()),
            "--out",
            p(&tables),
            "--tables-only"
        ])),
        0
    );
    let kinds = |v: serde_json::Value| -> Vec<String> {
        v.as_array()
            .unwrap()
            .iter()
            .flat_map(|page| page["regions"].as_array().unwrap().clone())
            .map(|r| r["kind"].as_str().unwrap().to_string())
            .collect()
    };
    let all_kinds = kinds(json(&all));
    let table_kinds = kinds(json(&tables));
    assert!(table_kinds.iter().all(|k| k == "table"));
    assert_eq!(
        table_kinds.len(),
        all_kinds.iter().filter(|k| *k == "table").count()
    );
    assert!(all_kinds.iter().any(|k| k == "tabular_structure"));

    // the config file suppresses everything; the flag restores the default
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"min_rows": 1000}"#).unwrap();
    let none = dir.path().join("none.json");
    let back = dir.path().join("back.json");
    assert_eq!(
        code(&tssm(&[
            "detect",
            "--input",
            p(dir.path()),
            "--config",
            p(&cfg),
            "--out",
            p(&none)
        ])),
        0
    );
    assert!(kinds(json(&none)).is_empty());
    let out = tssm(&[
        "detect",
        "--input",
        p(dir.path()),
        "--config",
        p(&cfg),
        "--min-rows",
        "3",
        "--out",
        p(&back),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&back), json(&all));
}

#[test]
fn eval_strict_page_mismatch_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    let det = dir.path().join("det.json");
    std::fs::write(
        &gt,
        r#"[{"page": "a", "regions": [{"bbox": [0, 0, 10, 10], "kind": "table"}]}]"#,
    )
    .unwrap();
    std::fs::write(&det, r#"[{"page": "b", "regions": []}]"#).unwrap();
    let args = ["eval", "--detections", p(&det), "--groundtruth", p(&gt)];
    let lenient = tssm(&args);
    assert_eq!(code(&lenient), 0);
    assert_eq!(
        String::from_utf8_lossy(&lenient.stdout),
        "tp 0 fp 0 fn 1\nprecision 1.000000 recall 0.000000 f1 0.000000\n"
    );
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(code(&tssm(&strict)), 5);
}

#[test]
fn eval_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    std::fs::write(
        &gt,
        r#"{"page": "a", "regions": [{"bbox": [0, 0, 10, 10], "kind": "table"}]}"#,
    )
    .unwrap();
    let report = dir.path().join("report.json");
    let out = tssm(&[
        "eval",
        "--detections",
        p(&gt),
        "--groundtruth",
        p(&gt),
        "--report",
        p(&report),
    ]);
    assert_eq!(code(&out), 0);
    let r = json(&report);
    assert_eq!(r["metrics"]["tp"], 1);
    assert_eq!(r["metrics"]["fn"], 0);
    assert_eq!(r["iou_threshold"], 0.8);
    assert_eq!(r["pages"][0]["page"], "a");
}

#[test]
fn voc_conversion_feeds_eval() {
    let dir = tempfile::tempdir().unwrap();
    let xml = dir.path().join("scan.xml");
    std::fs::write(
        &xml,
        "<annotation><filename>scan_01.png</filename>\
         <object><name>Table</name><bndbox><xmin>10</xmin><ymin>20</ymin><xmax>110</xmax><ymax>80</ymax></bndbox></object>\
         <object><name>figure</name><bndbox><xmin>5</xmin><ymin>100</ymin><xmax>50</xmax><ymax>150</ymax></bndbox></object>\
         </annotation>",
    )
    .unwrap();
    let gt = dir.path().join("gt.json");
    let out = tssm(&["convert-voc", "--input", p(dir.path()), "--out", p(&gt)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&gt);
    assert_eq!(v[0]["page"], "scan_01");
    assert_eq!(
        v[0]["regions"][0]["bbox"],
        serde_json::json!([10, 20, 110, 80])
    );
    assert_eq!(v[0]["regions"][0]["kind"], "table");

    let bad = dir.path().join("bad.xml");
    std::fs::write(
        &bad,
        "<annotation><object><name>x</name></object></annotation>",
    )
    .unwrap();
    assert_eq!(
        code(&tssm(&["convert-voc", "--input", p(&bad), "--out", p(&gt)])),
        3
    );
}
