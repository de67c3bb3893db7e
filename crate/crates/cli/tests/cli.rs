use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use timeds_cli::config::Config;
use timeds_cli::formats::{parse_checkpoint, parse_manifest, parse_sentences};
use timeds_core::align::SentenceLookup;
use timeds_core::classifier::{class_list, train_round};

const SMALL: &[&str] = &[
    "--synth_sentences=8000",
    "--synth_days=60",
    "--synth_peak=40",
    "--synth_planted=15",
    "--folds=5",
];

fn timeds(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timeds"))
        .args(args)
        .args(SMALL)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = timeds(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn stderr_of(out: &Path, args: &[&str]) -> String {
    let o = timeds(out, args);
    assert!(!o.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The single hash directory under `out`.
fn artifact_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn checksums(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, hex::encode(Sha256::digest(fs::read(&p).unwrap())))
        })
        .collect()
}

#[test]
fn stage_by_stage_equals_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&a, &["pipeline"]);
    for stage in [
        "synth", "ingest", "knowledge", "popularity", "align", "filter", "curriculum", "train", "eval", "noise", "report",
    ] {
        ok(&b, &[stage]);
    }
    let (ca, cb) = (checksums(&artifact_dir(&a)), checksums(&artifact_dir(&b)));
    assert_eq!(ca, cb);
    assert!(ca.contains_key("report.csv") && ca.contains_key("eval-curriculum-r7.csv"));
}

#[test]
fn every_artifact_carries_hash_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["pipeline", "--seed", "3"]);
    let dir = artifact_dir(tmp.path());
    let hash = dir.file_name().unwrap().to_string_lossy().into_owned();
    for (name, _) in checksums(&dir) {
        let first = fs::read_to_string(dir.join(&name)).unwrap().lines().next().unwrap().to_string();
        assert!(first.starts_with("# timeds artifact="), "{name}: {first}");
        assert!(first.contains(&format!("config_hash={hash}")) && first.ends_with("seed=3"), "{name}: {first}");
    }
}

#[test]
fn missing_upstream_names_the_stage_to_run() {
    let tmp = tempfile::tempdir().unwrap();
    for (stage, needs) in [
        ("ingest", "timeds synth"),
        ("knowledge", "timeds ingest"),
        ("align", "timeds ingest"),
        ("filter", "timeds align"),
        ("train", "timeds ingest"),
        ("report", "timeds filter"),
    ] {
        let e = stderr_of(tmp.path(), &[stage]);
        assert!(e.contains(needs), "{stage}: {e}");
    }
    ok(tmp.path(), &["synth"]);
    ok(tmp.path(), &["ingest"]);
    let e = stderr_of(tmp.path(), &["popularity"]);
    assert!(e.contains("timeds knowledge"), "{e}");
}

#[test]
fn bad_parameters_name_their_key() {
    let tmp = tempfile::tempdir().unwrap();
    for (arg, key) in [
        ("--tau_c=abc", "`tau_c`"),
        ("--window=2", "`window`"),
        ("--holdout_fraction=1.5", "`holdout_fraction`"),
        ("--curriculum=0.2,0.4", "`curriculum`"),
        ("--train_mode=sometimes", "`train_mode`"),
        ("--no_such_key=1", "`no_such_key`"),
    ] {
        let e = stderr_of(tmp.path(), &["pipeline", arg]);
        assert!(e.contains(key), "{arg}: {e}");
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("run.conf");
    fs::write(&conf, "# small run\ntau_c = 0.3\nepochs = 4\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_timeds"))
        .args(["config", "--config"])
        .arg(&conf)
        .arg("--epochs=6")
        .output()
        .unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("tau_c=0.3\n") && text.contains("epochs=6\n"), "{text}");
    let mut want = Config::parse("tau_c = 0.3\nepochs = 6\n").unwrap();
    want.set("seed", "0").unwrap();
    assert!(text.contains(&format!("config_hash={}", want.hash())));
}

#[test]
fn basic_filter_then_train_is_the_plain_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--filter_thetas=0.0", "--train_mode=oneshot"];
    for stage in ["synth", "ingest", "knowledge", "popularity", "align"] {
        ok(tmp.path(), &[&[stage][..], &args].concat());
    }
    ok(tmp.path(), &[&["filter", "0.0"][..], &args].concat());
    ok(tmp.path(), &[&["train"][..], &args].concat());
    let dir = artifact_dir(tmp.path());
    let read = |n: &str| fs::read_to_string(dir.join(n)).unwrap();
    let rels = Config::default().relations().unwrap();
    let full = parse_manifest(&read("manifest.tsv"), &rels).unwrap();
    assert_eq!(parse_manifest(&read("filter-0.000.tsv"), &rels).unwrap(), full);
    let sentences = parse_sentences(&read("sentences.jsonl")).unwrap();
    let classes = class_list(["Acquisition", "Investing", "JobChange", "Lawsuit", "Partnership"]);
    let cfg = Config::default().train().unwrap();
    let direct = train_round(&full, &SentenceLookup::new(&sentences), &classes, &cfg, None).unwrap();
    assert_eq!(parse_checkpoint(&read("model-oneshot-0.000.ckpt")).unwrap(), direct);
}

#[test]
fn changed_input_lands_in_a_new_version() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["pipeline"]);
    let dir = artifact_dir(tmp.path());
    let corpus = tmp.path().join("corpus.jsonl");
    let gaz = tmp.path().join("gaz.tsv");
    fs::copy(dir.join("corpus.jsonl"), &corpus).unwrap();
    fs::copy(dir.join("gazetteer.tsv"), &gaz).unwrap();
    let user = [
        format!("--corpus={}", corpus.display()),
        format!("--gazetteer={}", gaz.display()),
        format!("--rules={}", dir.join("rules.txt").display()),
        format!("--gold={}", dir.join("oracle.tsv").display()),
    ];
    let user: Vec<&str> = user.iter().map(String::as_str).collect();
    let out2 = tmp.path().join("user");
    ok(&out2, &[&["ingest"][..], &user].concat());
    let udir = artifact_dir(&out2);
    let first = fs::read_to_string(udir.join("sentences.jsonl")).unwrap();
    ok(&out2, &[&["ingest"][..], &user].concat());
    assert!(!udir.join("sentences.v2.jsonl").exists(), "identical rerun must not add a version");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str("{\"id\":\"extra\",\"title\":\"Late news\",\"body\":\"Nothing here.\",\"timestamp\":\"2016-03-02\"}\n");
    fs::write(&corpus, text).unwrap();
    ok(&out2, &[&["ingest"][..], &user].concat());
    assert_eq!(fs::read_to_string(udir.join("sentences.jsonl")).unwrap(), first);
    assert!(udir.join("sentences.v2.jsonl").exists());
    // the rest of the pipeline reads the newest version
    ok(&out2, &[&["pipeline"][..], &user].concat());
    assert!(udir.join("report.csv").exists());
}

#[test]
fn report_refuses_foreign_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["pipeline"]);
    let dir = artifact_dir(tmp.path());
    let eval = dir.join("noise.tsv");
    let text = fs::read_to_string(&eval).unwrap();
    let hash = dir.file_name().unwrap().to_string_lossy().into_owned();
    fs::write(&eval, text.replace(&hash, &"0".repeat(64))).unwrap();
    let e = stderr_of(tmp.path(), &["report"]);
    assert!(e.contains("refusing to mix"), "{e}");
}

#[test]
fn label_file_gold_source() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth"]);
    let dir = artifact_dir(tmp.path());
    let rels = Config::default().relations().unwrap();
    let oracle = timeds_core::synth::parse_oracle(&fs::read_to_string(dir.join("oracle.tsv")).unwrap(), &rels).unwrap();
    let mut labels = String::from("# relation\thead_id\ttail_id\tdoc_id\tindex\tpolarity\n");
    for l in &oracle {
        let pol = if l.expresses { "positive" } else { "negative" };
        let i = &l.instance;
        labels.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{pol}\n",
            i.relation_type, i.head_id, i.tail_id, l.sentence_ref.doc_id, l.sentence_ref.index
        ));
    }
    let lf = tmp.path().join("labels.tsv");
    fs::write(&lf, labels).unwrap();
    let run = |gold: &Path, format: &str, name: &str| {
        let args = [
            "pipeline".to_string(),
            format!("--corpus={}", dir.join("corpus.jsonl").display()),
            format!("--gazetteer={}", dir.join("gazetteer.tsv").display()),
            format!("--rules={}", dir.join("rules.txt").display()),
            format!("--gold={}", gold.display()),
            format!("--gold_format={format}"),
        ];
        let out = tmp.path().join(name);
        ok(&out, &args.iter().map(String::as_str).collect::<Vec<_>>());
        artifact_dir(&out)
    };
    let from_labels = run(&lf, "labels", "labels-run");
    let from_oracle = run(&dir.join("oracle.tsv"), "oracle", "oracle-run");
    assert!(from_labels.join("report.csv").exists());
    assert!(!from_labels.join("noise.tsv").exists());
    let body = |d: &Path, n: &str| fs::read_to_string(d.join(n)).unwrap().lines().skip(1).map(String::from).collect::<Vec<_>>();
    for n in ["test_set.tsv", "eval.tsv"] {
        assert_eq!(body(&from_labels, n), body(&from_oracle, n), "{n}");
    }
}
