mod common;

use std::f64::consts::PI;

use membrane_core::campaign::{Campaign, EvaluatorKind, Event, Status, Storage};
use membrane_core::evolve::{sample_mutation, GaConfig, RunConfig, StructuralEvent};
use membrane_core::fitness::FitnessRecord;
use membrane_core::genome::random_genome;
use membrane_core::mesh::{make_base, stl, validate_mesh, BASE_INNER_RADIUS_MM};
use membrane_core::{Genome, Point2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn base_ring_volume_matches_annulus() {
    for r in [25.0, 30.0, 32.5, 40.0] {
        let ring = make_base(r, 64).unwrap();
        let report = validate_mesh(&ring);
        assert!(report.is_valid_solid());
        assert_eq!(report.euler_characteristic, 0);
        let exact = PI * (r * r - BASE_INNER_RADIUS_MM * BASE_INNER_RADIUS_MM);
        assert!((ring.signed_volume() - exact).abs() / exact < 0.01, "r={r}");
    }
}

#[test]
fn structural_add_and_delete_balance_away_from_bounds() {
    let cfg = GaConfig::default();
    let g = Genome::validated(
        30.0,
        40.0,
        vec![
            Point2::new(0.8, 0.2),
            Point2::new(0.6, 0.4),
            Point2::new(0.4, 0.6),
            Point2::new(0.2, 0.8),
        ],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut add, mut del) = (0usize, 0usize);
    for _ in 0..20_000 {
        match sample_mutation(&g, &cfg, &mut rng).structural {
            StructuralEvent::Add { .. } => add += 1,
            StructuralEvent::Delete { .. } => del += 1,
            StructuralEvent::None => {}
            other => panic!("v=4 never skips: {other:?}"),
        }
    }
    let ratio = add as f64 / del as f64;
    assert!((ratio - 1.0).abs() < 0.08, "add {add} delete {del}");
}

#[test]
fn manual_mean_is_arithmetic() {
    let mut r = FitnessRecord::new("best", 5);
    for f in [28.0, 30.0, 29.0, 29.0, 29.0] {
        r.record_repeat(f).unwrap();
    }
    assert_eq!(r.mean(), Some(29.0));
}

fn campaign_with_unprintable(count: usize) -> Campaign {
    for seed in 0..200 {
        let c = Campaign::init(
            RunConfig::default(),
            EvaluatorKind::Manual,
            seed,
            Storage::Memory,
        )
        .unwrap();
        let n = c
            .generation(0)
            .unwrap()
            .children
            .iter()
            .filter(|ch| ch.unprintable.is_some())
            .count();
        if n == count {
            return c;
        }
    }
    panic!("no seed with {count} unprintable children");
}

#[test]
fn unprintable_child_scores_zero_and_is_skipped_on_export() {
    let c = campaign_with_unprintable(1);
    let gen = c.generation(0).unwrap();
    let bad = gen
        .children
        .iter()
        .position(|ch| ch.unprintable.is_some())
        .unwrap();
    assert_eq!(gen.children[bad].fitness(EvaluatorKind::Manual), Some(0.0));
    assert!(c
        .events()
        .any(|e| matches!(e, Event::GripperFlaggedUnprintable { child, .. } if *child == bad)));

    let tmp = tempfile::tempdir().unwrap();
    let manifest = c.export_generation(0, tmp.path()).unwrap();
    assert_eq!(manifest.files.len(), 4);
    assert_eq!(manifest.skipped.len(), 1);
    assert_eq!(manifest.skipped[0].child, bad);
    let stls = std::fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "stl")
        })
        .count();
    assert_eq!(stls, 4);
    assert!(tmp.path().join("gen0_manifest.json").exists());
    for f in &manifest.files {
        let bytes = std::fs::read(tmp.path().join(&f.file)).unwrap();
        assert_eq!(parse_binary_stl(&bytes).len(), f.triangles);
        assert!(validate_mesh(&stl::read_stl(bytes.as_slice()).unwrap()).is_valid_solid());
    }
}

#[test]
fn same_seed_same_first_generation() {
    let a = Campaign::init(
        RunConfig::default(),
        EvaluatorKind::Manual,
        77,
        Storage::Memory,
    )
    .unwrap();
    let b = Campaign::init(
        RunConfig::default(),
        EvaluatorKind::Proxy,
        77,
        Storage::Memory,
    )
    .unwrap();
    let genomes = |c: &Campaign| {
        c.generation(0)
            .unwrap()
            .children
            .iter()
            .map(|ch| ch.genome.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(genomes(&a), genomes(&b));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let direct: Vec<Genome> = (0..5).map(|_| random_genome(&mut rng).unwrap()).collect();
    assert_eq!(genomes(&a), direct);
}

#[test]
fn manual_run_to_completion_then_advance_fails() {
    let mut cfg = RunConfig::default();
    cfg.ga.max_generations = 4;
    let mut c = Campaign::init(cfg, EvaluatorKind::Manual, 12, Storage::Memory).unwrap();
    drive_manual(&mut c);
    assert_eq!(c.state().status, Status::Complete);
    assert_eq!(c.state().generations.len(), 4);
    assert!(c.advance().is_err());
    let report = c.report();
    assert_eq!(report.rows.len(), 4);
    for (row, gen) in report.rows.iter().zip(&c.state().generations) {
        let f: Vec<f64> = gen
            .children
            .iter()
            .map(|ch| {
                if ch.unprintable.is_some() {
                    0.0
                } else {
                    ch.record.repeats.iter().sum::<f64>() / ch.record.repeats.len() as f64
                }
            })
            .collect();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!((row.mean_f - mean).abs() < 1e-12);
        assert_eq!(
            row.max_f,
            f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
    }
}
