use std::fs;
use std::path::Path;

use conceptlink::align::TrainConfig;
use conceptlink::bench::{run_bench, BenchConfig, BenchInputs};
use conceptlink::corpus::{Level, SplitKind};
use conceptlink::eval::parse_machine_report;
use conceptlink::node2vec::{SgnsConfig, WalkConfig};
use conceptlink::synth::{synthetic_dataset, SynthConfig, SynthData};

fn data() -> SynthData {
    synthetic_dataset(&SynthConfig {
        concepts: 30,
        mentions: 240,
        word_dim: 16,
        layers: 3,
        stack_dim: 8,
        seed: 5,
    })
    .unwrap()
}

fn small(kind: SplitKind) -> BenchConfig {
    BenchConfig {
        kind,
        level: Level::Specific,
        seed: 11,
        branch_dim: 16,
        walk: WalkConfig {
            walk_length: 12,
            walks_per_node: 4,
            ..WalkConfig::default()
        },
        sgns: SgnsConfig {
            dim: 16,
            window: 4,
            ..SgnsConfig::default()
        },
        train: TrainConfig {
            epochs: 4,
            batch_size: 16,
            ..TrainConfig::default()
        },
        learning_rate: Some(1e-3),
        ..BenchConfig::default()
    }
}

fn inputs(d: &SynthData) -> BenchInputs<'_> {
    BenchInputs {
        graph: &d.graph,
        mentions: &d.mentions,
        word_vectors: Some(&d.word_vectors),
        mention_stacks: Some(&d.mention_stacks),
        label_stacks: Some(&d.label_stacks),
        node2vec: None,
    }
}

fn methods(dir: &Path) -> Vec<String> {
    let kv = fs::read_to_string(dir.join("report.kv")).unwrap();
    parse_machine_report(&kv)
        .into_iter()
        .map(|r| r["method"].clone())
        .collect()
}

#[test]
fn full_ladder_with_every_resource() {
    let d = data();
    let dir = tempfile::tempdir().unwrap();
    let out = run_bench(&inputs(&d), &small(SplitKind::Stratified), dir.path()).unwrap();
    assert!(out.skipped.is_empty());
    assert_eq!(out.rows.len(), 4 + 6 + 8);
    let names = methods(dir.path());
    assert_eq!(&names[..4], ["dict", "exact", "lev", "stoilos"]);
    assert_eq!(&names[4..10], ["n1", "n2", "n3", "n4", "n5", "n6"]);
    assert_eq!(names[10], "dict+exact");
    assert_eq!(names[17], "dict+stoilos+neural:n6");
    for rel in &out.outputs {
        assert!(dir.path().join(rel).is_file(), "{}", rel.display());
    }
    for r in &out.rows {
        let e = &r.report;
        assert!(e.acc1 <= e.acc10 && e.acc1 <= e.mrr && e.acc10 <= 1.0, "{}", r.method);
    }
    // Back-off never loses what the first stage already had.
    let acc = |m: &str| out.rows.iter().find(|r| r.method == m).unwrap().report.acc1;
    assert!(acc("dict+exact") >= acc("dict"));
    assert!(acc("dict+stoilos+neural:n6") >= acc("dict+stoilos"));
    let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(table.lines().count(), 1 + 18);
}

#[test]
fn dictionary_scores_zero_on_zero_shot() {
    let d = data();
    let dir = tempfile::tempdir().unwrap();
    let cfg = BenchConfig {
        recipes: vec![],
        ..small(SplitKind::ZeroShot)
    };
    let out = run_bench(&inputs(&d), &cfg, dir.path()).unwrap();
    assert_eq!(out.rows.len(), 4 + 3);
    assert_eq!(out.rows[0].method, "dict");
    assert_eq!(out.rows[0].report.acc1, 0.0);
    assert!(!dir.path().join("node2vec.txt").exists());
}

#[test]
fn missing_resources_skip_recipes_and_fall_back() {
    let d = data();
    let dir = tempfile::tempdir().unwrap();
    let inp = BenchInputs {
        mention_stacks: None,
        label_stacks: None,
        ..inputs(&d)
    };
    let out = run_bench(&inp, &small(SplitKind::Stratified), dir.path()).unwrap();
    let skipped: Vec<String> = out.skipped.iter().map(|(r, _)| r.to_string()).collect();
    assert_eq!(skipped, ["n3", "n4", "n6"]);
    let names = methods(dir.path());
    assert!(names.contains(&"dict+stoilos+neural:n5".to_string()));
}

#[test]
fn identical_runs_are_byte_identical() {
    let d = data();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small(SplitKind::Stratified);
    let oa = run_bench(&inputs(&d), &cfg, a.path()).unwrap();
    let ob = run_bench(&inputs(&d), &cfg, b.path()).unwrap();
    assert_eq!(oa.outputs, ob.outputs);
    for rel in &oa.outputs {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{}",
            rel.display()
        );
    }
}
