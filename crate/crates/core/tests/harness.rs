use coach_core::envs::{AnyGame, EnvSpec};
use coach_core::harness::experiment::{compare_teachers, run_batteries, summarize, write_long_csv};
use coach_core::harness::stats::spearman;
use coach_core::harness::teaching::{replay_matches, run_seed, Phase, SelectionRule, Teacher};
use coach_core::harness::{evaluate_student, ExperimentConfig, SeedRange, TeacherKind, TeachingTrace};
use coach_core::inference::{InferenceConfig, PriorConfig, QuadratureRule};
use coach_core::planner::TeachingConfig;
use coach_core::skill_model::{PerformanceRatio, SubSkillId};
use coach_core::students::{StudentPreset, SyntheticStudent};
use coach_core::with_game;
use proptest::prelude::*;

fn kitchen(seeds: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(EnvSpec::kitchen_default(), StudentPreset::heterogeneous());
    cfg.seeds = SeedRange { start: 0, end: seeds };
    cfg
}

#[test]
fn belief_tracks_true_competence_on_kitchen() {
    let mut cfg = kitchen(60);
    cfg.teachers = vec![TeacherKind::StudentAware, TeacherKind::RandomSubskill];
    let report = summarize(&cfg, &run_batteries(&cfg).unwrap());
    let rho = report.belief_truth_spearman.unwrap();
    assert!(rho >= 0.5, "spearman {rho}");
}

#[test]
fn adaptive_steps_only_pick_calibrated_subskills() {
    let cfg = kitchen(10);
    for seed in cfg.seeds.seeds() {
        let trace = run_seed(&cfg, TeacherKind::StudentAware, seed).unwrap();
        for s in trace.steps.iter().filter(|s| s.phase == Phase::Adaptive) {
            match s.rule {
                SelectionRule::ArgmaxGain => {
                    // The belief behind the choice was calibrated one step earlier.
                    let prev = &trace.steps[s.t as usize - 2].beliefs[s.subskill.0];
                    assert!(prev.calibrated, "seed {seed} t {}", s.t);
                    let best = s.gains.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    assert_eq!(s.gains[s.subskill.0], Some(best));
                }
                SelectionRule::Fallback => assert!(s.gains.iter().all(Option::is_none)),
                other => panic!("unexpected rule {other:?}"),
            }
        }
    }
}

#[test]
fn evaluation_examples() {
    let game = AnyGame::new(&EnvSpec::kitchen_default()).unwrap();
    with_game!(&game, g => {
        let expert = SyntheticStudent::new(
            &StudentPreset { c0: vec![1.0, 1.0], ..StudentPreset::uniform() },
            0.3,
        )
        .unwrap();
        for v in evaluate_student(g, &expert, 5, 1).unwrap() {
            assert!(v.unwrap() > 0.99);
        }
        let novice = SyntheticStudent::new(
            &StudentPreset { c0: vec![0.0, 0.0], ..StudentPreset::uniform() },
            0.3,
        )
        .unwrap();
        let before = novice.clone();
        for v in evaluate_student(g, &novice, 5, 1).unwrap().into_iter().flatten() {
            assert!(v < 0.2, "{v}");
        }
        assert_eq!(novice, before);
    });
}

#[test]
fn single_subskill_teachers_agree() {
    let teaching = TeachingConfig { horizon: 8, ..TeachingConfig::default() };
    let (prior, quad, inf) = (PriorConfig::default(), QuadratureRule::default(), InferenceConfig::default());
    let student = SyntheticStudent::new(
        &StudentPreset { c0: vec![0.1], eta: vec![0.1], w: vec![1.0], give_up_threshold: vec![] },
        0.3,
    )
    .unwrap();
    for kind in TeacherKind::ALL {
        let mut teacher = Teacher::new(kind, &teaching, &prior, &quad, &inf, 1, 4).unwrap();
        for t in 1..=8u64 {
            let sel = teacher.select(t, Some(&student)).unwrap();
            assert_eq!(sel.subskill, SubSkillId(0));
            teacher.observe(t, sel.subskill, PerformanceRatio::clamped(0.1 + 0.05 * t as f64)).unwrap();
        }
    }
}

#[test]
fn oracle_needs_truth() {
    let cfg = TeachingConfig { horizon: 4, calibration: 1, ..TeachingConfig::default() };
    let mut teacher = Teacher::new(
        TeacherKind::Oracle,
        &cfg,
        &PriorConfig::default(),
        &QuadratureRule::default(),
        &InferenceConfig::default(),
        2,
        0,
    )
    .unwrap();
    for t in 1..=2 {
        teacher.select(t, None).unwrap();
        teacher.observe(t, SubSkillId(t as usize - 1), PerformanceRatio::clamped(0.3)).unwrap();
    }
    assert!(teacher.select(3, None).is_err());
}

#[test]
fn compare_requires_enough_seeds_and_teachers() {
    assert!(compare_teachers(&kitchen(10)).is_err());
    let mut cfg = kitchen(40);
    cfg.teachers = vec![TeacherKind::StudentAware];
    assert!(compare_teachers(&cfg).is_err());
}

#[test]
fn traces_replay_and_round_trip() {
    let mut cfg = kitchen(3);
    cfg.record_trajectories = true;
    cfg.n_eval_segments = 2;
    for kind in TeacherKind::ALL {
        let trace = run_seed(&cfg, kind, 2).unwrap();
        assert!(trace.steps.iter().all(|s| s.trajectory.is_some()));
        assert!(trace.final_metrics.eval_before.is_some() && trace.final_metrics.eval_after.is_some());
        let bytes = trace.to_jsonl();
        let parsed = TeachingTrace::read_jsonl(bytes.as_slice()).unwrap();
        assert_eq!(parsed, trace);
        assert!(replay_matches(&parsed).unwrap());
    }
}

#[test]
fn long_csv_has_expected_columns() {
    let mut cfg = kitchen(2);
    cfg.teachers = vec![TeacherKind::StudentAware, TeacherKind::FullyAssistive];
    let batteries = run_batteries(&cfg).unwrap();
    let mut buf = Vec::new();
    write_long_csv(&batteries, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "teacher,seed,t,variable,subskill,value");
    assert!(lines.all(|l| l.split(',').count() == 6));
}

#[test]
fn early_stop_ends_loop() {
    let mut cfg = ExperimentConfig::new(EnvSpec::tilt_default(), StudentPreset::uniform());
    cfg.teaching.early_stop_mastery = Some(0.2);
    cfg.teaching.horizon = 60;
    let trace = run_seed(&cfg, TeacherKind::Oracle, 0).unwrap();
    let m = &trace.final_metrics;
    assert!(m.stopped_early);
    assert!(m.segments < 60);
    assert!(m.final_competence.iter().all(|&c| c > 0.2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spearman_is_rank_invariant(xs in prop::collection::vec(-10.0f64..10.0, 3..30), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let a = spearman(&xs, &ys);
        let b = spearman(&moved, &ys);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a.is_nan() || a > 1.0 - 1e-12);
    }

    #[test]
    fn calibration_accounting_holds(seed in 0u64..1_000, n in 1usize..4, extra in 0usize..6) {
        let mut cfg = ExperimentConfig::new(EnvSpec::tilt_default(), StudentPreset::heterogeneous());
        cfg.teaching.calibration = n;
        cfg.teaching.horizon = 2 * n + extra;
        let trace = run_seed(&cfg, TeacherKind::StudentAware, seed).unwrap();
        let m = &trace.final_metrics;
        prop_assert_eq!(m.calibration_segments, 2 * n);
        prop_assert_eq!(m.adaptive_segments, extra);
        prop_assert_eq!(m.allocation.iter().sum::<usize>(), extra);
        for (i, s) in trace.steps.iter().take(2 * n).enumerate() {
            prop_assert_eq!(s.subskill, SubSkillId(i % 2));
        }
    }
}
