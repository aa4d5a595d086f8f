use proptest::prelude::*;

use super::*;
use crate::envs::{EnvConfig, RewardMode, Task};

/// Tiny everything so a run takes milliseconds.
fn small_cfg(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.seeds = vec![3];
    cfg.run.episodes = 4;
    cfg.run.warmup_episodes = 2;
    cfg.run.output_dir = dir.to_path_buf();
    cfg.run.checkpoint_period = 2;
    cfg.run.window = 3;
    cfg.env.max_steps = Some(6);
    cfg.planner.population = 12;
    cfg.planner.elites = 3;
    cfg.planner.iterations = 2;
    cfg.planner.horizon = 3;
    cfg.model.ensemble_size = 2;
    cfg.model.hidden = vec![6];
    cfg.model.epochs = 2;
    cfg.model.batch_size = 8;
    cfg
}

/// Drops the output directory, the only field that differs between
/// otherwise identical runs in separate temp dirs.
fn portable(mut ck: Checkpoint) -> Checkpoint {
    ck.config.run.output_dir = Default::default();
    ck
}

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn default_config_is_valid_and_round_trips() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
}

#[test]
fn unknown_keys_are_config_errors() {
    for text in [
        "[run]\nepisodez = 3\n",
        "[planner]\npopulaton = 3\n",
        "[nonsense]\n",
    ] {
        let err = RunConfig::from_toml_str(text).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)), "{text}: {err}");
        assert_eq!(err.exit_code(), 1);
    }
}

#[test]
fn schedule_invariants_are_enforced() {
    let mut cfg = RunConfig::default();
    cfg.run.warmup_episodes = 0;
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    let mut cfg = RunConfig::default();
    cfg.run.episodes = 2;
    cfg.run.warmup_episodes = 3;
    assert!(cfg.validate().is_err());
    let mut cfg = RunConfig::default();
    cfg.run.seeds.clear();
    assert!(cfg.validate().is_err());
    let mut cfg = RunConfig::default();
    cfg.planner.elites = cfg.planner.population + 1;
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
}

#[test]
fn missing_config_file_is_io() {
    let err = RunConfig::load(std::path::Path::new("/nonexistent/run.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn curiosity_off_zeroes_beta() {
    let mut cfg = RunConfig::default();
    assert_eq!(cfg.effective_beta(), cfg.planner.beta);
    cfg.run.curiosity_off = true;
    assert_eq!(cfg.effective_beta(), 0.0);
}

#[test]
fn minimal_run_has_one_random_row_and_one_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.episodes = 1;
    cfg.run.warmup_episodes = 1;
    let summary = train_run(&cfg).unwrap();
    assert_eq!(summary.rows.len(), 1);
    let row = &summary.rows[0];
    // Random steps contribute nothing to the plan columns.
    assert_eq!(row.mean_info_gain, 0.0);
    assert_eq!(row.mean_extrinsic, 0.0);
    assert!(row.val_mse.is_finite());
    assert_eq!(row.status, RowStatus::Ok);
    let (rows, skipped) = parse_metrics(&read(&summary.metrics_path));
    assert_eq!((rows.len(), skipped), (1, 0));
    assert_eq!(summary.checkpoints.len(), 1);
    let ck = Checkpoint::load(&summary.checkpoints[0]).unwrap();
    assert_eq!(ck.next_episode, 1);
    assert_eq!(ck.buffer.len(), cfg.env.max_steps());
}

#[test]
fn identical_runs_write_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small_cfg(a.path());
    ca.run.seeds = vec![1, 2];
    let mut cb = ca.clone();
    cb.run.output_dir = b.path().to_path_buf();
    let sa = train_run(&ca).unwrap();
    let sb = train_run(&cb).unwrap();
    let (ta, tb) = (read(&sa.metrics_path), read(&sb.metrics_path));
    assert_eq!(ta, tb);
    assert_eq!(ta.lines().count(), 1 + 2 * ca.run.episodes);
    assert!(ta.starts_with(METRICS_HEADER));
    for (x, y) in sa.checkpoints.iter().zip(&sb.checkpoints) {
        assert_eq!(portable(Checkpoint::load(x).unwrap()), portable(Checkpoint::load(y).unwrap()));
    }
}

#[test]
fn metrics_rows_have_the_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train_run(&small_cfg(dir.path())).unwrap();
    let text = read(&summary.metrics_path);
    let columns = METRICS_HEADER.split(',').count();
    for line in text.lines() {
        assert_eq!(line.split(',').count(), columns, "{line}");
    }
    let (rows, _) = parse_metrics(&text);
    assert_eq!(rows, summary.rows);
}

#[test]
fn window_column_is_recomputable_from_returns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path());
    let summary = train_run(&cfg).unwrap();
    let returns: Vec<f64> = summary.rows.iter().map(|r| r.episode_return).collect();
    let window = sliding_window(&returns, cfg.run.window);
    for (r, w) in summary.rows.iter().zip(window) {
        assert!((r.window_mean_return - w).abs() <= 1e-12 * w.abs().max(1.0));
    }
}

#[test]
fn planned_episodes_report_plan_terms() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train_run(&small_cfg(dir.path())).unwrap();
    let planned = &summary.rows[2..];
    assert!(planned.iter().all(|r| r.mean_info_gain >= 0.0));
    assert!(planned.iter().any(|r| r.mean_info_gain > 0.0));
    assert!(planned.iter().all(|r| r.mean_extrinsic != 0.0));
}

#[test]
fn curiosity_off_records_zero_info_gain() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.curiosity_off = true;
    let summary = train_run(&cfg).unwrap();
    assert!(summary.rows.iter().all(|r| r.mean_info_gain == 0.0));
}

#[test]
fn random_policy_never_plans() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.random_policy = true;
    let summary = train_run(&cfg).unwrap();
    assert!(summary
        .rows
        .iter()
        .all(|r| r.mean_info_gain == 0.0 && r.mean_extrinsic == 0.0));
}

#[test]
fn checkpoints_follow_the_period() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.episodes = 5;
    train_run(&cfg).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(dir.path().join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["seed_3_ep_0002.json", "seed_3_ep_0004.json", "seed_3_ep_0005.json"]
    );
}

#[test]
fn episode_logs_hold_one_record_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path());
    train_run(&cfg).unwrap();
    let log = dir.path().join("episodes/seed_3/episode_0003.jsonl");
    let text = read(&log);
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), cfg.env.max_steps());
    for key in ["obs", "action", "reward", "done", "info"] {
        assert!(records[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(records.last().unwrap()["done"], serde_json::Value::Bool(true));
}

#[test]
fn depth_dump_writes_one_image_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.episodes = 1;
    cfg.run.warmup_episodes = 1;
    cfg.run.debug_depth_dump = true;
    train_run(&cfg).unwrap();
    let d = dir.path().join("depth/seed_3/episode_0000");
    assert_eq!(std::fs::read_dir(&d).unwrap().count(), cfg.env.max_steps());
    let img = std::fs::read(d.join("step_000.pgm")).unwrap();
    assert!(img.starts_with(b"P"));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path());
    let mut run = SeedRun::new(&cfg, 5).unwrap();
    for _ in 0..3 {
        run.run_episode().unwrap();
    }
    let ck = run.checkpoint();
    let back = Checkpoint::from_json(&ck.to_json()).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_json(), ck.to_json());
    let path = dir.path().join("ck.json");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}

#[test]
fn malformed_checkpoints_are_rejected() {
    assert_eq!(Checkpoint::from_json("{").unwrap_err().exit_code(), 1);
    let dir = tempfile::tempdir().unwrap();
    let mut ck = SeedRun::untrained_checkpoint(&small_cfg(dir.path()), 0).unwrap();
    ck.format = 99;
    assert!(Checkpoint::from_json(&ck.to_json()).is_err());
    let err = Checkpoint::load(&dir.path().join("missing.json")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let full_dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(full_dir.path());
    let full = train_run(&cfg).unwrap();

    let part_dir = tempfile::tempdir().unwrap();
    let mut first = cfg.clone();
    first.run.output_dir = part_dir.path().to_path_buf();
    first.run.episodes = 3;
    let head = train_run(&first).unwrap();
    let mut ck = Checkpoint::load(&head.checkpoints[0]).unwrap();
    ck = Checkpoint::from_json(&ck.to_json()).unwrap();
    ck.config.run.episodes = cfg.run.episodes;
    let tail = resume_run(ck, part_dir.path()).unwrap();

    let stitched: Vec<MetricsRow> = head.rows.iter().chain(&tail.rows).cloned().collect();
    assert_eq!(stitched, full.rows);
    assert_eq!(read(&full.metrics_path), read(&tail.metrics_path));
    assert_eq!(
        portable(Checkpoint::load(&tail.checkpoints[0]).unwrap()),
        portable(Checkpoint::load(&full.checkpoints[0]).unwrap())
    );
}

#[test]
fn finished_run_refuses_more_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.episodes = 1;
    cfg.run.warmup_episodes = 1;
    let mut run = SeedRun::new(&cfg, 0).unwrap();
    run.run_episode().unwrap();
    assert!(run.is_finished());
    assert!(run.run_episode().is_err());
}

#[test]
fn unwritable_output_fails_before_any_episode() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = small_cfg(&blocker.join("out"));
    let err = train_run(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::Io(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn divergence_halts_only_that_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.run.seeds = vec![0, 1];
    cfg.model.learning_rate = 1e300;
    let summary = train_run(&cfg).unwrap();
    assert_eq!(summary.diverged, vec![0, 1]);
    for seed in [0, 1] {
        let rows: Vec<_> = summary.rows.iter().filter(|r| r.seed == seed).collect();
        assert_eq!(rows.last().unwrap().status, RowStatus::Diverged);
        assert!(rows[..rows.len() - 1].iter().all(|r| r.status == RowStatus::Ok));
    }
    assert_eq!(summary.checkpoints.len(), 2);
    assert_eq!(HarnessError::Divergence(String::new()).exit_code(), 2);
}

#[test]
fn zero_episode_eval_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path());
    let ck = SeedRun::untrained_checkpoint(&cfg, 0).unwrap();
    let s = eval_checkpoint(&ck, &cfg.env, 0, 0).unwrap();
    assert!(s.zero_episodes);
    assert_eq!((s.episodes, s.mean_return, s.success_rate), (0, 0.0, 0.0));
    assert!(s.returns.is_empty());
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path());
    let ck = SeedRun::untrained_checkpoint(&cfg, 0).unwrap();
    let screw = EnvConfig {
        task: Task::Screw,
        ..EnvConfig::default()
    };
    match eval_checkpoint(&ck, &screw, 1, 0).unwrap_err() {
        HarnessError::DimensionMismatch { checkpoint, env } => {
            assert_eq!(checkpoint, (13, 3));
            assert_eq!(env, (7, 1));
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn eval_is_deterministic_and_does_not_learn() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path());
    let ck = SeedRun::untrained_checkpoint(&cfg, 0).unwrap();
    let before = ck.clone();
    let a = eval_checkpoint(&ck, &cfg.env, 2, 9).unwrap();
    let b = eval_checkpoint(&ck, &cfg.env, 2, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(ck, before);
    assert_eq!(a.returns.len(), 2);
}

#[test]
fn untrained_sparse_checkpoint_rarely_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path());
    cfg.env.reward = RewardMode::Sparse;
    cfg.env.max_steps = None;
    let ck = SeedRun::untrained_checkpoint(&cfg, 0).unwrap();
    let s = eval_checkpoint(&ck, &cfg.env, 20, 0).unwrap();
    assert!(s.success_rate <= 0.2, "success rate {}", s.success_rate);
}

#[test]
fn oracle_beats_random_on_dense_slope() {
    let env = EnvConfig::default();
    let oracle = eval_policy(FixedPolicy::Oracle, &env, 5, 0).unwrap();
    let random = eval_policy(FixedPolicy::Random, &env, 5, 0).unwrap();
    assert!(oracle.mean_return > random.mean_return);
    assert_eq!(oracle.success_rate, 1.0);
    assert!(oracle.mean_abs_shear.is_none());
}

#[test]
fn screw_eval_reports_shear() {
    let env = EnvConfig {
        task: Task::Screw,
        ..EnvConfig::default()
    };
    let oracle = eval_policy(FixedPolicy::Oracle, &env, 3, 0).unwrap();
    let random = eval_policy(FixedPolicy::Random, &env, 3, 0).unwrap();
    assert!(oracle.mean_abs_shear.unwrap() < random.mean_abs_shear.unwrap());
}

fn metrics_text(seeds: &[(u64, &[f64])]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for &(seed, returns) in seeds {
        for (ep, r) in returns.iter().enumerate() {
            let row = MetricsRow {
                seed,
                episode: ep,
                episode_return: *r,
                success: false,
                window_mean_return: 0.0,
                mean_info_gain: 0.0,
                mean_extrinsic: 0.0,
                val_mse: f64::NAN,
                wall_clock_s: 0.0,
                status: RowStatus::Ok,
            };
            out.push_str(&row.to_csv());
            out.push('\n');
        }
    }
    out
}

#[test]
fn constant_returns_plot_flat_with_empty_band() {
    let text = metrics_text(&[(0, &[1.0; 8]), (1, &[1.0; 8])]);
    let s = plot_metrics(&text, 10).unwrap();
    assert!(s.has_band());
    assert!(s.mean.iter().all(|v| *v == 1.0));
    assert_eq!(s.min, s.max);
    let svg = render_svg(&s);
    assert!(svg.contains(r#"class="band""#));
    assert!(svg.contains(r#"class="mean""#));
}

#[test]
fn step_returns_pass_through_half_at_the_transition() {
    let returns = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
    let s = plot_metrics(&metrics_text(&[(0, &returns)]), 2).unwrap();
    assert_eq!(s.mean, vec![0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
}

#[test]
fn single_seed_plot_has_no_band() {
    let s = plot_metrics(&metrics_text(&[(4, &[0.0, 1.0, 2.0])]), 10).unwrap();
    assert!(!s.has_band());
    let svg = render_svg(&s);
    assert!(!svg.contains(r#"class="band""#));
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn malformed_rows_are_skipped_and_counted() {
    let mut text = metrics_text(&[(0, &[1.0, 2.0])]);
    text.push_str("garbage\n0,2,1.0\n0,x,1,0,0,0,0,0,0,ok\n");
    let s = plot_metrics(&text, 1).unwrap();
    assert_eq!(s.skipped, 3);
    assert_eq!(s.mean, vec![1.0, 2.0]);
}

#[test]
fn plot_rejects_empty_input_and_zero_window() {
    assert_eq!(plot_metrics(METRICS_HEADER, 10).unwrap_err().exit_code(), 1);
    let text = metrics_text(&[(0, &[1.0])]);
    assert!(plot_metrics(&text, 0).is_err());
}

#[test]
fn seeds_of_different_lengths_are_averaged_where_present() {
    let text = metrics_text(&[(0, &[0.0, 0.0, 0.0]), (1, &[2.0])]);
    let s = plot_metrics(&text, 1).unwrap();
    assert_eq!(s.mean, vec![1.0, 0.0, 0.0]);
    assert_eq!(s.max, vec![2.0, 0.0, 0.0]);
}

proptest! {
    #[test]
    fn metrics_row_survives_csv(
        seed in any::<u64>(),
        episode in 0usize..100_000,
        vals in prop::array::uniform6(-1e6f64..1e6),
        success in any::<bool>(),
        diverged in any::<bool>(),
    ) {
        let row = MetricsRow {
            seed,
            episode,
            episode_return: vals[0],
            success,
            window_mean_return: vals[1],
            mean_info_gain: vals[2].abs(),
            mean_extrinsic: vals[3],
            val_mse: vals[4].abs(),
            wall_clock_s: vals[5].abs(),
            status: if diverged { RowStatus::Diverged } else { RowStatus::Ok },
        };
        prop_assert_eq!(MetricsRow::parse(&row.to_csv()), Some(row));
    }

    #[test]
    fn window_mean_matches_direct_sum(
        values in prop::collection::vec(-100.0f64..100.0, 1..40),
        window in 1usize..12,
    ) {
        let w = sliding_window(&values, window);
        prop_assert_eq!(w.len(), values.len());
        for i in 0..values.len() {
            let lo = i.saturating_sub(window - 1);
            let direct: f64 = values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
            prop_assert!((w[i] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}
