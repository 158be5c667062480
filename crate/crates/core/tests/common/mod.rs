//! Independent oracles shared by the integration test targets.
#![allow(dead_code)]

use doci::channels::ChannelSet;
use doci::classifier::{ConfusionCounts, FeatureMatrix};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TABLE: &str = include_str!("../fixtures/margin_table.tsv");

pub struct TableRow {
    pub channels: String,
    pub counts: ConfusionCounts,
    pub printed: [f64; 3],
}

pub fn table() -> Vec<TableRow> {
    TABLE
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let n = |i: usize| f[i].parse::<u64>().unwrap();
            let pct = |i: usize| f[i].trim_end_matches('%').parse::<f64>().unwrap();
            TableRow {
                channels: f[0].to_string(),
                counts: ConfusionCounts {
                    tn: n(1),
                    fn_: n(2),
                    tp: n(3),
                    fp: n(4),
                },
                printed: [pct(5), pct(6), pct(7)],
            }
        })
        .collect()
}

/// Blocks recounted pixel by pixel.
pub fn brute_force(
    truth_px: &Array2<bool>,
    pred_px: &Array2<bool>,
    tissue: &Array2<bool>,
    block: usize,
) -> ConfusionCounts {
    let (h, w) = truth_px.dim();
    let mut counts = ConfusionCounts::default();
    for br in 0..h.div_ceil(block) {
        for bc in 0..w.div_ceil(block) {
            let (mut any_tissue, mut t, mut p) = (false, false, false);
            for r in br * block..((br + 1) * block).min(h) {
                for c in bc * block..((bc + 1) * block).min(w) {
                    if tissue[[r, c]] {
                        any_tissue = true;
                        t |= truth_px[[r, c]];
                        p |= pred_px[[r, c]];
                    }
                }
            }
            if any_tissue {
                match (t, p) {
                    (false, false) => counts.tn += 1,
                    (true, false) => counts.fn_ += 1,
                    (true, true) => counts.tp += 1,
                    (false, true) => counts.fp += 1,
                }
            }
        }
    }
    counts
}

/// Closed-form two-class LDA with explicit 2x2 / 3x3 inverses.
pub fn reference_lda(x: &[Vec<f64>], y: &[bool]) -> (Vec<f64>, f64) {
    let d = x[0].len();
    let mean = |cls: bool| {
        let pts: Vec<&Vec<f64>> = x
            .iter()
            .zip(y)
            .filter(|(_, &l)| l == cls)
            .map(|(p, _)| p)
            .collect();
        let m: Vec<f64> = (0..d)
            .map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64)
            .collect();
        (m, pts.len())
    };
    let ((mp, np), (mn, nn)) = (mean(true), mean(false));
    let mut s = vec![vec![0.0; d]; d];
    for (p, &l) in x.iter().zip(y) {
        let m = if l { &mp } else { &mn };
        for i in 0..d {
            for j in 0..d {
                s[i][j] += (p[i] - m[i]) * (p[j] - m[j]);
            }
        }
    }
    let denom = (np + nn - 2) as f64;
    s.iter_mut().flatten().for_each(|v| *v /= denom);
    let inv = if d == 2 {
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        vec![
            vec![s[1][1] / det, -s[0][1] / det],
            vec![-s[1][0] / det, s[0][0] / det],
        ]
    } else {
        let c = |i: usize, j: usize| {
            let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
            let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
            s[r0][c0] * s[r1][c1] - s[r0][c1] * s[r1][c0]
        };
        let det: f64 = (0..3).map(|j| s[0][j] * c(0, j)).sum();
        (0..3)
            .map(|i| (0..3).map(|j| c(j, i) / det).collect())
            .collect()
    };
    let diff: Vec<f64> = (0..d).map(|j| mp[j] - mn[j]).collect();
    let w: Vec<f64> = (0..d)
        .map(|i| (0..d).map(|j| inv[i][j] * diff[j]).sum())
        .collect();
    let mid: f64 = (0..d).map(|j| w[j] * (mp[j] + mn[j]) / 2.0).sum();
    let b = -mid + (np as f64 / nn as f64).ln();
    (w, b)
}

pub fn features(x: &[Vec<f64>], y: &[bool]) -> FeatureMatrix {
    let d = x[0].len();
    let rows = Array2::from_shape_vec((x.len(), d), x.iter().flatten().copied().collect()).unwrap();
    let channels = ChannelSet((2..2 + d as u8).collect());
    FeatureMatrix::new(rows, y.to_vec(), channels).unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
    let d = rng.gen_range(2..=3);
    let n = rng.gen_range(8..=50);
    let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let cls = i % 2 == 0 || rng.gen_bool(0.3);
        let p = (0..d)
            .map(|j| rng.gen_range(-1.0..1.0) + if cls { shift[j] } else { 0.0 })
            .collect();
        x.push(p);
        y.push(cls);
    }
    if y.iter().filter(|l| !**l).count() < 2 {
        y[1] = false;
        y[3] = false;
    }
    (x, y)
}
