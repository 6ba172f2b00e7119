mod common;

use common::{coverage_oracle, naive_bin_counts, naive_returns, two_pass};
use trajvault_core::coverage::{coverage_report, coverage_spectrum_points};
use trajvault_core::rng::StreamRng;
use trajvault_core::stats::{episode_returns, histogram, summarize};
use trajvault_core::synth::{generate, BehaviourKnob, DecPomdpSpec};
use trajvault_core::vault::{
    export_jsonl, import_foreign, read_vault, write_vault, ColumnMapping, ImportSchema, DATA_FILE,
    INDEX_FILE,
};
use trajvault_core::TrajectoryDataset;

fn seed_42() -> TrajectoryDataset {
    generate(
        &DecPomdpSpec::default(),
        &BehaviourKnob {
            quality: 0.6,
            exploration_noise: 0.3,
        },
        300,
        42,
    )
    .unwrap()
}

#[test]
fn seed_42_vault_rewrites_identically() {
    let d = seed_42();
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    write_vault(&d, &a).unwrap();
    let back = read_vault(&a).unwrap();
    assert_eq!(back, d);
    write_vault(&back, &b).unwrap();
    for f in [DATA_FILE, INDEX_FILE] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
}

#[test]
fn seed_42_returns_match_naive_loop() {
    let d = seed_42();
    assert_eq!(episode_returns(&d, 1.0), naive_returns(&d));
}

#[test]
fn summary_matches_two_pass() {
    let mut rng = StreamRng::with_stream_id(7, 0);
    let values: Vec<f64> = (0..1000).map(|_| rng.uniform(-3.0, 40.0)).collect();
    let s = summarize(&values).unwrap();
    let (m, v) = two_pass(&values);
    assert!((s.mean - m).abs() <= 1e-9 * m.abs());
    assert!((s.std - v.sqrt()).abs() <= 1e-9 * v.sqrt());
}

#[test]
fn histogram_matches_naive_binning() {
    let mut rng = StreamRng::with_stream_id(3, 0);
    let values: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
    let h = histogram(&values, 30, None).unwrap();
    assert_eq!(h.total(), 10_000);
    assert_eq!(h.counts, naive_bin_counts(&values, &h.bin_edges));
}

#[test]
fn coverage_modes_agree_with_sorted_oracle() {
    let d = generate(
        &DecPomdpSpec {
            obs_levels: Some(2),
            ..Default::default()
        },
        &BehaviourKnob {
            quality: 0.9,
            exploration_noise: 0.0,
        },
        800,
        1,
    )
    .unwrap();
    assert!(d.n_transitions() >= 10_000);
    let hashed = coverage_report(&d, false).unwrap();
    let exact = coverage_report(&d, true).unwrap();
    let o = coverage_oracle(&d);
    assert_eq!(hashed.unique_state_action, exact.unique_state_action);
    assert_eq!(hashed.count_frequency, exact.count_frequency);
    assert_eq!(
        hashed.unique_state_action,
        o.state_action.as_ref().map(|s| s.0)
    );
    assert_eq!(hashed.unique_joint_obs_action, o.joint.0);
    assert_eq!(
        hashed
            .unique_per_agent
            .values()
            .copied()
            .collect::<Vec<_>>(),
        o.per_agent
    );
    assert_eq!(hashed.count_frequency, o.state_action.unwrap().1);
}

#[test]
fn spectrum_reconstructs_transition_count() {
    let d = common::random_dataset(12, 5_000);
    let r = coverage_report(&d, false).unwrap();
    let total: f64 = coverage_spectrum_points(&r)
        .unwrap()
        .iter()
        .map(|(x, y)| (x.exp() * y.exp()).round())
        .sum();
    assert_eq!(total as usize, d.n_transitions());
}

#[test]
fn jsonl_round_trip_preserves_returns() {
    let spec = DecPomdpSpec {
        episode_length_range: (20, 30),
        ..Default::default()
    };
    let mut d = generate(
        &spec,
        &BehaviourKnob {
            quality: 0.4,
            exploration_noise: 0.2,
        },
        400,
        8,
    )
    .unwrap();
    while d.n_transitions() < 10_000 {
        d = trajvault_core::resample::combine(&[d.clone(), d]).unwrap();
    }
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("export.jsonl");
    export_jsonl(&d, &path, &ColumnMapping::default()).unwrap();
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(lines, d.n_transitions());
    let schema = ImportSchema {
        agents: d.agents.clone(),
        mapping: ColumnMapping::default(),
    };
    let back = import_foreign(&path, &schema).unwrap();
    assert_eq!(episode_returns(&back, 1.0), episode_returns(&d, 1.0));
    assert_eq!(back.observations, d.observations);
}
