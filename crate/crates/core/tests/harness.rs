use std::path::Path;

use eecl_td3::eecl::{NoveltyConfig, NoveltyDetector};
use eecl_td3::envs::make_env;
use eecl_td3::harness::checkpoint::Checkpoint;
use eecl_td3::harness::{
    load_config, run_comparison, run_training, train, HarnessError, LearningCurve, NoveltyMode,
    RunConfig,
};
use eecl_td3::seeding::{stream, stream_rng};
use eecl_td3::td3::Td3Agent;

fn tiny(out: &Path, eecl: bool) -> RunConfig {
    let mut c = if eecl {
        RunConfig::with_eecl("pointmass").unwrap()
    } else {
        RunConfig::baseline("pointmass").unwrap()
    };
    c.td3.hidden_sizes = vec![16, 16];
    c.td3.batch_size = 16;
    c.td3.warmup_steps = 50;
    c.td3.total_steps = 300;
    c.eval_every = 100;
    c.eval_episodes = 2;
    c.out_dir = out.to_path_buf();
    c
}

#[test]
fn load_config_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert!(matches!(
        load_config(&missing),
        Err(HarnessError::ConfigMissing { .. })
    ));

    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let e = load_config(&write("bad.toml", "[td3\n")).unwrap_err();
    assert!(matches!(e, HarnessError::ConfigSyntax { .. }));
    assert!(e.to_string().contains("bad.toml"));
    assert!(matches!(
        load_config(&write("typo.toml", "[eecl]\nepsilom = 0.1\n")),
        Err(HarnessError::UnknownKey { .. })
    ));
    let e = load_config(&write("range.toml", "[eecl]\nepsilon = -1\n")).unwrap_err();
    assert!(e.to_string().contains("eecl.epsilon"), "{e}");
    let e = load_config(&write("range2.toml", "[eecl]\nepsilon = -1.0\n")).unwrap_err();
    assert!(matches!(e, HarnessError::OutOfRange { .. }));
    for e in [HarnessError::ConfigMissing { path: missing }, e] {
        assert!(e.is_config_error());
    }
}

#[test]
fn empty_file_gives_full_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.toml");
    std::fs::write(&p, "").unwrap();
    let c = load_config(&p).unwrap();
    assert!(c.eecl.is_none());
    assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
    assert_eq!(c.eval_every, 250);
    assert_eq!(c.eval_episodes, 10);
    assert_eq!(c.td3.hidden_sizes, vec![400, 300]);
    assert_eq!(c.td3.total_steps, 5000);
    assert_eq!(c.td3.batch_size, 128);
    assert_eq!(c.td3.replay_capacity, 1_000_000);
    assert_eq!(c.td3.warmup_steps, 1000);
}

#[test]
fn zero_steps_gives_only_initial_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), true);
    c.td3.total_steps = 0;
    let curve = run_training(&c, 0).unwrap();
    assert_eq!(curve.steps(), vec![0]);
    assert_eq!(curve.records[0].novel_state_count, 0);
    assert!(dir.path().join("eecl_seed0.csv").exists());
    assert!(dir.path().join("eecl_seed0.ckpt").exists());
}

#[test]
fn runs_are_byte_identical_and_columns_consistent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_training(&tiny(a.path(), true), 3).unwrap();
    run_training(&tiny(b.path(), true), 3).unwrap();
    let ca = std::fs::read(a.path().join("eecl_seed3.csv")).unwrap();
    let cb = std::fs::read(b.path().join("eecl_seed3.csv")).unwrap();
    assert_eq!(ca, cb);

    let curve = LearningCurve::load(&a.path().join("eecl_seed3.csv")).unwrap();
    assert_eq!(curve.steps(), vec![0, 100, 200, 300]);
    let counts: Vec<u64> = curve.records.iter().map(|r| r.novel_state_count).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert!(counts[3] <= 300);
    // bonuses paid are exactly the geometric partial sum of accepted states
    let last = curve.last().unwrap();
    let closed = 0.75 * (1.0 - 0.997f64.powi(last.novel_state_count as i32)) / (1.0 - 0.997);
    assert!((last.cumulative_exploration_reward - closed).abs() < 1e-9);
}

#[test]
fn checkpoint_round_trip_evaluates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&tiny(dir.path(), true), 1, NoveltyMode::Reward).unwrap();
    let (_, ckpt) = out.write(dir.path(), "run").unwrap();
    let env = make_env("pointmass").unwrap();
    let before = out
        .agent
        .evaluate(env.as_ref(), 3, &mut stream_rng(9, stream::EVALUATION))
        .unwrap();

    let (agent, det) = Checkpoint::load(&ckpt).unwrap().restore(&ckpt).unwrap();
    let after = agent
        .evaluate(env.as_ref(), 3, &mut stream_rng(9, stream::EVALUATION))
        .unwrap();
    assert_eq!(before.to_bits(), after.to_bits());
    assert_eq!(agent.fingerprints(), out.agent.fingerprints());
    assert_eq!(agent.env_steps, 300);
    assert_eq!(agent.train_iterations, out.agent.train_iterations);
    assert_eq!(agent.actor_opt, out.agent.actor_opt);
    assert_eq!(agent.replay.snapshot(), out.agent.replay.snapshot());
    assert_eq!(det.unwrap().snapshot(), out.detector.unwrap().snapshot());

    let mut fresh = Td3Agent::new(out.agent.config.clone(), 77).unwrap();
    Checkpoint::load(&ckpt)
        .unwrap()
        .load_into(&mut fresh, &ckpt)
        .unwrap();
    assert_eq!(fresh.fingerprints(), agent.fingerprints());
}

#[test]
fn detector_fifo_continues_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = NoveltyConfig::new(6);
    cfg.max_states = 4;
    let mut det = NoveltyDetector::new(cfg).unwrap();
    let state = |x: f64| vec![x, 0.0, 0.0, 0.0, 0.0, 0.0];
    for i in 0..6 {
        det.record_state(&state(i as f64)).unwrap();
    }
    let agent = Td3Agent::new(tiny(dir.path(), true).td3, 0).unwrap();
    let path = dir.path().join("d.ckpt");
    Checkpoint::capture("pointmass", &agent, Some(&det))
        .save(&path)
        .unwrap();
    let (_, loaded) = Checkpoint::load(&path).unwrap().restore(&path).unwrap();
    let mut loaded = loaded.unwrap();
    for x in [6.0, 7.0] {
        assert_eq!(
            det.record_state(&state(x)).unwrap(),
            loaded.record_state(&state(x)).unwrap()
        );
    }
    let firsts: Vec<f64> = loaded.states().map(|s| s[0]).collect();
    assert_eq!(firsts, vec![4.0, 5.0, 6.0, 7.0]);
    assert!(loaded.novelty_check(&state(3.0)).unwrap());
}

#[test]
fn corrupt_checkpoint_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("junk.ckpt");
    std::fs::write(&p, b"not a checkpoint at all, definitely not").unwrap();
    let e = Checkpoint::load(&p).unwrap_err();
    assert!(matches!(e, HarnessError::CheckpointCorrupt { .. }));
    assert!(!e.is_config_error());
    assert!(matches!(
        Checkpoint::load(&dir.path().join("missing.ckpt")),
        Err(HarnessError::Io { .. })
    ));
}

#[test]
fn single_seed_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), true);
    c.seeds = vec![0];
    c.td3.total_steps = 120;
    let report = run_comparison(&c).unwrap();
    assert_eq!(report.seeds.len(), 1);
    assert_eq!(report.rows.len(), 3);
    assert!(report
        .rows
        .iter()
        .all(|r| r.halfstd_eecl == 0.0 && r.halfstd_base == 0.0));
    // arms share initial networks and evaluation draws
    assert_eq!(report.rows[0].mean_eecl, report.rows[0].mean_base);
    let base = LearningCurve::load(&dir.path().join("baseline_seed0.csv")).unwrap();
    assert!(base
        .records
        .iter()
        .all(|r| r.cumulative_exploration_reward == 0.0));
    assert!(base.last().unwrap().novel_state_count > 0);
    for f in [
        "comparison.csv",
        "summary.json",
        "comparison.svg",
        "eecl_seed0.ckpt",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert!(text.starts_with("step,mean_eecl,halfstd_eecl,mean_base,halfstd_base\n"));
}

#[test]
fn comparison_requires_novelty_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        run_comparison(&tiny(dir.path(), false)),
        Err(HarnessError::MissingNovelty)
    ));
}
