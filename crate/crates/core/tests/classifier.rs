use doci::camera::{acquire, AcquisitionConfig};
use doci::channels::ChannelSet;
use doci::classifier::{
    blockify, channel_subsets, confusion, metrics, metrics_csv, predict_map, rank_rows, train_lda,
    BlockGrid, ClassifierConfig, Evaluator, MetricsRow,
};
use doci::phantom::{label, make_tissue_phantom, TissueSpec};
use doci::pipeline::DociStack;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_force, features, random_dataset, reference_lda, table, TABLE};

#[test]
fn printed_table_percentages_recompute() {
    let rows = table();
    assert_eq!(rows.len(), 50);
    for r in &rows {
        let m = metrics(&r.counts);
        let got = [
            m.sensitivity.unwrap(),
            m.specificity.unwrap(),
            m.accuracy.unwrap(),
        ]
        .map(|v| 100.0 * v);
        for (g, p) in got.iter().zip(r.printed) {
            assert!(
                (g - p).abs() <= 0.005,
                "{}: {g:.4} vs printed {p}",
                r.channels
            );
        }
    }
}

#[test]
fn printed_channel_labels_round_trip() {
    for r in table() {
        let set = ChannelSet::parse(&r.channels).unwrap();
        assert_eq!(set.to_string(), r.channels);
    }
}

#[test]
fn csv_reproduces_printed_rows() {
    let rows: Vec<MetricsRow> = table()
        .iter()
        .map(|r| MetricsRow::new(ChannelSet::parse(&r.channels).unwrap(), r.counts))
        .collect();
    let csv = metrics_csv(&rows, "fixture");
    for (line, r) in csv.lines().skip(1).zip(TABLE.lines().skip(1)) {
        let expected = r.replace('\t', ",");
        assert_eq!(line, format!("{expected},fixture"));
    }
}

#[test]
fn printed_sections_are_ranked() {
    let rows = table();
    for section in [&rows[0..9], &rows[9..29], &rows[29..49]] {
        let mut ranked: Vec<MetricsRow> = section
            .iter()
            .map(|r| MetricsRow::new(ChannelSet::parse(&r.channels).unwrap(), r.counts))
            .collect();
        let before: Vec<String> = ranked.iter().map(|r| r.channels.to_string()).collect();
        rank_rows(&mut ranked);
        let accs: Vec<f64> = ranked.iter().map(|r| r.accuracy.unwrap()).collect();
        assert!(accs.windows(2).all(|w| w[0] >= w[1]));
        // Ties in the printed table are not broken lexicographically, so only
        // the set of rows is compared.
        let mut after: Vec<String> = ranked.iter().map(|r| r.channels.to_string()).collect();
        let mut sorted_before = before.clone();
        sorted_before.sort();
        after.sort();
        assert_eq!(sorted_before, after);
    }
}

#[test]
fn block_protocol_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let block = rng.gen_range(2..=6);
        let (h, w) = (10 * block, 10 * block);
        let density = rng.gen_range(0.0..0.02);
        let truth_px = Array2::from_shape_fn((h, w), |_| rng.gen_bool(density));
        let pred_px = Array2::from_shape_fn((h, w), |_| rng.gen_bool(density));
        let tissue = Array2::from_shape_fn((h, w), |_| rng.gen_bool(0.7));
        // Integer pitch so block edges are exact.
        let grid = BlockGrid::new(block as f64, 1.0, (h, w)).unwrap();
        let t = blockify(&truth_px, &grid, &tissue).unwrap();
        let p = blockify(&pred_px, &grid, &tissue).unwrap();
        assert_eq!(
            confusion(&t, &p).unwrap(),
            brute_force(&truth_px, &pred_px, &tissue, block),
            "trial {trial}"
        );
    }
}

#[test]
fn hand_built_exclusion_grid() {
    // 4x4 blocks of 3x3 pixels; tissue only in the top-left 2x2 blocks.
    let grid = BlockGrid::new(3.0, 1.0, (12, 12)).unwrap();
    let mut tissue = Array2::from_elem((12, 12), false);
    tissue.slice_mut(ndarray::s![0..6, 0..6]).fill(true);
    let mut cancer = Array2::from_elem((12, 12), false);
    cancer[[4, 1]] = true;
    cancer[[10, 10]] = true; // outside tissue: ignored
    let b = blockify(&cancer, &grid, &tissue).unwrap();
    assert_eq!(b.included_count(), 4);
    assert_eq!(b.positive.iter().filter(|p| **p).count(), 1);
    assert!(b.positive[[1, 0]]);
}

proptest! {
    #[test]
    fn adding_a_predicted_pixel_never_lowers_positives(seed in 0u64..500, r in 0usize..40, c in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = BlockGrid::new(0.65, 0.1, (40, 40)).unwrap();
        let tissue = Array2::from_shape_fn((40, 40), |_| rng.gen_bool(0.8));
        let truth = Array2::from_shape_fn((40, 40), |_| rng.gen_bool(0.01));
        let mut pred = Array2::from_shape_fn((40, 40), |_| rng.gen_bool(0.01));
        let t = blockify(&truth, &grid, &tissue).unwrap();
        let before = confusion(&t, &blockify(&pred, &grid, &tissue).unwrap()).unwrap();
        pred[[r, c]] = true;
        let after = confusion(&t, &blockify(&pred, &grid, &tissue).unwrap()).unwrap();
        prop_assert!(after.tp + after.fp >= before.tp + before.fp);
    }
}

#[test]
fn lda_matches_closed_form_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let (x, y) = random_dataset(&mut rng);
        let model = train_lda(&features(&x, &y), 0.0).unwrap();
        let (w, b) = reference_lda(&x, &y);
        for p in &x {
            let ours = model.score(p);
            let theirs: f64 = w.iter().zip(p).map(|(a, v)| a * v).sum::<f64>() + b;
            assert!(
                (ours - theirs).abs() <= 1e-8 * (1.0 + theirs.abs()),
                "trial {trial}"
            );
            if theirs.abs() > 1e-9 {
                assert_eq!(model.predict(p), theirs > 0.0, "trial {trial}");
            }
        }
    }
}

#[test]
fn lda_decisions_survive_positive_affine_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (x, y) = random_dataset(&mut rng);
    let base = train_lda(&features(&x, &y), 0.0).unwrap();
    for _ in 0..10 {
        let d = x[0].len();
        let scale: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..100.0)).collect();
        let offset: Vec<f64> = (0..d).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let mapped: Vec<Vec<f64>> = x
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(j, v)| scale[j] * v + offset[j])
                    .collect()
            })
            .collect();
        let model = train_lda(&features(&mapped, &y), 0.0).unwrap();
        for (p, q) in x.iter().zip(&mapped) {
            let s = base.score(p);
            if s.abs() > 1e-7 {
                assert_eq!(base.predict(p), model.predict(q));
                assert!((model.score(q) - s).abs() <= 1e-7 * (1.0 + s.abs()));
            }
        }
    }
}

#[test]
fn eight_point_toy_set_matches_frozen_values() {
    let x = vec![
        vec![0.10, 0.20],
        vec![0.15, 0.35],
        vec![0.30, 0.25],
        vec![0.22, 0.10],
        vec![0.60, 0.55],
        vec![0.72, 0.40],
        vec![0.55, 0.70],
        vec![0.80, 0.62],
    ];
    let y = [false, false, false, false, true, true, true, true];
    let m = train_lda(&features(&x, &y), 0.0).unwrap();
    let cov = m.covariance();
    assert!((cov[(0, 0)] - 0.010225).abs() < 1e-15);
    assert!((cov[(0, 1)] + 0.00332916666666666).abs() < 1e-15);
    assert!((cov[(1, 1)] - 0.01352916666666666).abs() < 1e-15);
    assert!((m.weights[0] - 59.461314914846184).abs() < 1e-9);
    assert!((m.weights[1] - 39.94751789866403).abs() < 1e-9);
    assert!((m.bias + 41.39756938072948).abs() < 1e-9);
    assert!(m.predict(&m.class_means[1]) && !m.predict(&m.class_means[0]));
}

#[test]
fn subsets_are_exactly_the_combinations() {
    for k in 1..=3usize {
        let subsets = channel_subsets(&[k]).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for s in &subsets {
            assert_eq!(s.len(), k);
            assert!(s.channels().windows(2).all(|w| w[0] < w[1]));
            assert!(seen.insert(s.channels().to_vec()));
        }
        let expected = match k {
            1 => 9,
            2 => 36,
            _ => 84,
        };
        assert_eq!(seen.len(), expected);
    }
    let full = channel_subsets(&[9]).unwrap();
    assert_eq!(full.len(), 1);
    assert_eq!(full[0].to_string(), "[2 - 10]");
}

#[test]
fn noiseless_tissue_prediction_matches_labels() {
    let phantom = make_tissue_phantom(&TissueSpec::default()).unwrap();
    let stack = acquire(&phantom, &AcquisitionConfig::noiseless()).unwrap();
    let mut maps = DociStack::from_channels(&stack, None).unwrap();
    let evaluator = Evaluator::new(
        &maps,
        &phantom.labels,
        phantom.pixel_pitch_mm,
        ClassifierConfig::default(),
    )
    .unwrap();
    let model = evaluator.train(&ChannelSet::all()).unwrap();
    let pred = predict_map(&model, &maps).unwrap();
    let (mut agree, mut total) = (0usize, 0usize);
    for ((r, c), &l) in phantom.labels.indexed_iter() {
        if l != label::CORKBOARD && pred.predicted[[r, c]] {
            total += 1;
            agree += usize::from(pred.cancer[[r, c]] == (l == label::CANCER));
        }
    }
    let fraction = agree as f64 / total as f64;
    assert!(fraction > 0.99, "agreement {fraction}");

    // Invalidate one pixel on one channel: it becomes unpredicted.
    maps.maps[4].valid[[200, 200]] = false;
    let pred = predict_map(&model, &maps).unwrap();
    assert!(!pred.predicted[[200, 200]] && !pred.cancer[[200, 200]]);
    assert!(pred.predicted[[200, 201]]);
}
