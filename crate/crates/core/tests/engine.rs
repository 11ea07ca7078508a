mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use codesign::agents::{synthesis_rules, Backend};
use codesign::archive::{load_archive, Phase};
use codesign::cli::run_cli;
use codesign::engine::{
    run_debate, run_debate_with, run_round, select_best, AgentConfig, BackendKind, DebateState,
    RoundRecord, ARCHIVE_FILE, SNAPSHOT_FILE,
};
use codesign::morphology::{
    apply_edit, default_design, parse_design, DesignBounds, DesignEdit, ParamChange,
};
use common::{chat_stub, sha256_file, tiny_config};

fn read_record(dir: &std::path::Path, k: usize) -> RoundRecord {
    let text = std::fs::read_to_string(dir.join(format!("rounds/round_{k}.record"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn debate_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let report = run_debate(&cfg).unwrap();
    assert_eq!(report.rounds.len(), 2);
    assert!(report.archive.len() <= 2 * 2 * cfg.variants_per_design);
    let pairs: usize = report.rounds.iter().map(|r| r.pairs.len()).sum();
    assert!(pairs <= cfg.rounds * 2 * cfg.variants_per_design);
    for f in [
        SNAPSHOT_FILE,
        ARCHIVE_FILE,
        "rounds/round_1.record",
        "rounds/round_2.record",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    for rec in &report.rounds {
        for p in &rec.pairs {
            assert!(dir.path().join(&p.curve).exists());
        }
    }
    let loaded = load_archive(&dir.path().join(ARCHIVE_FILE)).unwrap();
    assert!(loaded.corrupt.is_empty());
    assert_eq!(loaded.archive, report.archive);
    assert_eq!(select_best(&loaded.archive).unwrap(), report.best);
}

#[test]
fn debate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_debate(&tiny_config(a.path())).unwrap();
    let mut cfg = tiny_config(b.path());
    cfg.parallel_evaluations = 1;
    run_debate(&cfg).unwrap();
    assert_eq!(
        sha256_file(&a.path().join(ARCHIVE_FILE)),
        sha256_file(&b.path().join(ARCHIVE_FILE))
    );
    for k in 1..=2 {
        assert_eq!(read_record(a.path(), k), read_record(b.path(), k));
    }
}

#[test]
fn one_round_equals_round_then_select() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.rounds = 1;
    let report = run_debate(&cfg).unwrap();
    let mut state = DebateState::new(default_design());
    let rec = run_round(&mut state, &cfg, &Backend::Scripted, 1, None).unwrap();
    assert_eq!(rec.to_json(), report.rounds[0].to_json());
    assert_eq!(select_best(&state.archive).unwrap(), report.best);
}

#[test]
fn synthesis_is_thesis_plus_rule_moves() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_debate(&tiny_config(dir.path())).unwrap();
    for rec in &report.rounds {
        let thesis = parse_design(&rec.thesis.as_ref().unwrap().design).unwrap();
        let synthesis = parse_design(&rec.synthesis.as_ref().unwrap().design).unwrap();
        let best = rec
            .pairs
            .iter()
            .filter(|p| p.phase == Phase::Thesis)
            .reduce(|a, b| if b.score_s > a.score_s { b } else { a })
            .unwrap();
        let mut expected = thesis;
        let b = DesignBounds::default();
        let mut tags: Vec<_> = best
            .feedback
            .verdicts
            .iter()
            .flat_map(|v| v.suggestion_tags.clone())
            .collect();
        tags.sort();
        tags.dedup();
        // Applying each rule in turn is the multiplicative composition.
        for tag in tags {
            for &(path, frac) in synthesis_rules(tag) {
                let e = DesignEdit {
                    changes: vec![ParamChange::relative(path, frac)],
                    rationale: String::new(),
                };
                expected = apply_edit(&expected, &e, &b).unwrap();
            }
        }
        for id in codesign::morphology::ParamId::all() {
            assert!((expected.get(id) - synthesis.get(id)).abs() < 1e-8, "{id}");
        }
    }
}

#[test]
fn dropped_reward_degrades_round() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    let endpoint = chat_stub(move |body| {
        if body.contains("design agent") {
            return r#"[{"param": "torso_length", "kind": "relative", "value": 0.05, "why": "longer body"}]"#.into();
        }
        if body.contains("was rejected") {
            return r#"{"reward_dsl": "((", "why": "still broken"}"#.into();
        }
        let n = counter.fetch_add(1, Ordering::SeqCst);
        if n == 1 {
            r#"{"reward_dsl": "forward_speed +", "why": "oops"}"#.into()
        } else {
            format!(
                r#"{{"reward_dsl": "forward_speed + 0.{}*alive", "why": "v"}}"#,
                n + 1
            )
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.rounds = 1;
    cfg.regenerate_synthesis_rewards = true;
    cfg.agents = AgentConfig {
        backend: BackendKind::Remote,
        endpoint: Some(endpoint),
        ..AgentConfig::default()
    };
    let report = run_debate(&cfg).unwrap();
    let rec = &report.rounds[0];
    assert_eq!(rec.pairs.len(), 7);
    assert!(rec.degraded);
    let thesis = rec.thesis.as_ref().unwrap();
    assert_eq!(thesis.rewards.len(), 3);
    assert_eq!(thesis.reward_repairs, 3);
    assert_eq!(thesis.dropped_rewards.len(), 1);
    assert!(dir.path().join("exchanges/exchange_00000.json").exists());
}

#[test]
fn all_rounds_aborted_is_an_error() {
    let endpoint = chat_stub(|_| "no json here".into());
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.agents.backend = BackendKind::Remote;
    cfg.agents.endpoint = Some(endpoint);
    let backend = codesign::engine::make_backend(&cfg).unwrap();
    let err = run_debate_with(&cfg, &backend).unwrap_err();
    assert!(
        matches!(err, codesign::engine::EngineError::AllRoundsAborted),
        "{err}"
    );
    assert!(read_record(dir.path(), 1).notes[0].starts_with("aborted"));
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(
        std::iter::once("codesign").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn cli_run_plot_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let run_dir = dir.path().join("run");
    std::fs::write(
        &config,
        "rounds = 2\nvariants_per_design = 2\n[sim]\nhorizon_steps = 100\n[budget]\ntotal_env_steps = 3400\n",
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let out = run_dir.to_str().unwrap();

    assert_eq!(
        cli(&["run", "--config", cfg, "--set", "rounds=0", "--out", out]).0,
        2
    );
    let (code, stdout, stderr) = cli(&["run", "--config", cfg, "--out", out, "--seed", "4"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("round 2:"));
    assert!(stdout.contains("best score:"));
    let archive = run_dir.join(ARCHIVE_FILE);
    let snapshot = std::fs::read_to_string(run_dir.join(SNAPSHOT_FILE)).unwrap();
    assert!(snapshot.contains("master_seed = 4"));

    let svg = dir.path().join("plot.svg");
    assert_eq!(
        cli(&[
            "plot",
            archive.to_str().unwrap(),
            "--out",
            svg.to_str().unwrap()
        ])
        .0,
        0
    );
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg_text.matches(r#"class="xtick""#).count(), 2);
    assert_eq!(svg_text.matches(r#"class="series""#).count(), 2);
    let csv_text = std::fs::read_to_string(svg.with_extension("csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 1 + 2 * 2);

    // Plotted means equal the archive values.
    let loaded = load_archive(&archive).unwrap().archive;
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    for row in rdr.records() {
        let row = row.unwrap();
        let round: usize = row[0].parse().unwrap();
        let scores: Vec<f64> = loaded
            .entries()
            .iter()
            .filter(|e| e.round_index == round && e.phase.name() == &row[1])
            .map(|e| e.score_s)
            .collect();
        let mean: f64 = row[3].parse().unwrap();
        assert!((mean - scores.iter().sum::<f64>() / scores.len() as f64).abs() < 1e-12);
    }

    let (code, stdout, _) = cli(&["archive", "show", archive.to_str().unwrap(), "-k", "1"]);
    assert_eq!(code, 0);
    let best = select_best(&loaded).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.contains(&format!("{:.4}", best.score_s)));
    let (_, all, _) = cli(&["archive", "show", archive.to_str().unwrap(), "-k", "100"]);
    assert_eq!(all.lines().count(), 1 + loaded.len());

    let mut text = std::fs::read_to_string(&archive).unwrap();
    text.push_str("{not json\n");
    std::fs::write(&archive, text).unwrap();
    let (code, stdout, stderr) = cli(&["archive", "show", archive.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stderr.contains("skipped 1 corrupt"));
    assert_eq!(stdout.lines().count(), 1 + loaded.len());

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(cli(&["plot", empty.to_str().unwrap()]).0, 2);
}
