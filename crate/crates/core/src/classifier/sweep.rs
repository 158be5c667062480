use std::cmp::Ordering;
use std::ops::Range;

use itertools::Itertools;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blocks::{blockify, BlockGrid, BlockMap, DEFAULT_BLOCK_MM};
use super::lda::{train_lda_with, FeatureMatrix, LdaModel, Priors, DEFAULT_LAMBDA};
use super::metrics::{confusion, MetricsRow};
use crate::channels::{ChannelSet, FIRST_CHANNEL, LAST_CHANNEL};
use crate::error::{invalid, DociError, Result};
use crate::phantom::label;
use crate::pipeline::{DociStack, Roi};

/// How evaluation blocks relate to the training pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Train on ROIs anywhere in the field and score every tissue block.
    #[default]
    Resubstitution,
    /// Train on ROIs in the left half and score tissue blocks in the right half.
    HeldOut,
}

impl EvalMode {
    pub fn label(self) -> &'static str {
        match self {
            EvalMode::Resubstitution => "resubstitution",
            EvalMode::HeldOut => "held_out",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub lambda: f64,
    pub priors: Priors,
    pub block_size_mm: f64,
    pub mode: EvalMode,
    pub rois_per_class: usize,
    pub roi_size_px: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            lambda: DEFAULT_LAMBDA,
            priors: Priors::Empirical,
            block_size_mm: DEFAULT_BLOCK_MM,
            mode: EvalMode::Resubstitution,
            rois_per_class: 6,
            roi_size_px: 9,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRoi {
    pub label: u8,
    pub roi: Roi,
}

/// Draw square ROIs lying wholly inside one class and inside `cols`.
/// Classes too small to hold an ROI get none.
pub fn sample_training_rois(
    labels: &Array2<u8>,
    cols: Range<usize>,
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<TrainingRoi>> {
    if size == 0 {
        return Err(invalid("ROI size must be positive"));
    }
    let (h, w) = labels.dim();
    let cols = cols.start.min(w)..cols.end.min(w);
    if h < size || cols.len() < size {
        return Err(invalid("ROI does not fit in the sampling region"));
    }
    let present: Vec<u8> = labels.iter().copied().sorted().dedup().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in present {
        let mut placed = 0;
        let mut attempts = 0;
        while placed < per_class && attempts < 20_000 {
            attempts += 1;
            let r = rng.gen_range(0..=h - size);
            let c = rng.gen_range(cols.start..=cols.end - size);
            let window = labels.slice(ndarray::s![r..r + size, c..c + size]);
            if window.iter().all(|&l| l == class) {
                out.push(TrainingRoi {
                    label: class,
                    roi: Roi::rect(r, c, size, size),
                });
                placed += 1;
            }
        }
    }
    Ok(out)
}

/// Pixels from the ROIs that are valid on every selected channel. Cancer
/// is the positive class; every other label is negative.
pub fn build_features(
    stack: &DociStack,
    channels: &ChannelSet,
    rois: &[TrainingRoi],
) -> Result<FeatureMatrix> {
    let maps = channels
        .channels()
        .iter()
        .map(|&c| stack.get(c))
        .collect::<Result<Vec<_>>>()?;
    let shape = stack.shape().ok_or(DociError::EmptyRoi)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for t in rois {
        for (r, c) in t.roi.pixels(shape) {
            if maps.iter().all(|m| m.valid[[r, c]]) {
                values.extend(maps.iter().map(|m| m.values[[r, c]]));
                labels.push(t.label == label::CANCER);
            }
        }
    }
    let rows =
        Array2::from_shape_vec((labels.len(), maps.len()), values).expect("row-major features");
    FeatureMatrix::new(rows, labels, channels.clone())
}

/// Per-pixel prediction. `predicted` is false where any model channel is
/// invalid; such pixels count as benign in `cancer`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelPrediction {
    pub cancer: Array2<bool>,
    pub predicted: Array2<bool>,
}

pub fn predict_map(model: &LdaModel, stack: &DociStack) -> Result<PixelPrediction> {
    let maps = model
        .channels
        .channels()
        .iter()
        .map(|&c| stack.get(c))
        .collect::<Result<Vec<_>>>()?;
    let shape = stack.shape().ok_or(DociError::EmptyRoi)?;
    let mut cancer = Array2::from_elem(shape, false);
    let mut predicted = Array2::from_elem(shape, false);
    let mut x = vec![0.0; maps.len()];
    for ((r, c), dst) in cancer.indexed_iter_mut() {
        if maps.iter().all(|m| m.valid[[r, c]]) {
            for (xi, m) in x.iter_mut().zip(&maps) {
                *xi = m.values[[r, c]];
            }
            *dst = model.predict(&x);
            predicted[[r, c]] = true;
        }
    }
    Ok(PixelPrediction { cancer, predicted })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: LdaModel,
    pub pixels: PixelPrediction,
    pub truth: BlockMap,
    pub predicted: BlockMap,
    pub row: MetricsRow,
}

/// Shared state for training and scoring many channel subsets on one scene.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub stack: &'a DociStack,
    pub grid: BlockGrid,
    pub config: ClassifierConfig,
    pub rois: Vec<TrainingRoi>,
    truth_pixels: Array2<bool>,
    eval_mask: Array2<bool>,
    truth: BlockMap,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        stack: &'a DociStack,
        labels: &Array2<u8>,
        pixel_pitch_mm: f64,
        config: ClassifierConfig,
    ) -> Result<Self> {
        let shape = stack.shape().ok_or(DociError::EmptyRoi)?;
        if labels.dim() != shape {
            return Err(DociError::ShapeMismatch {
                expected: shape,
                found: labels.dim(),
            });
        }
        let grid = BlockGrid::new(config.block_size_mm, pixel_pitch_mm, shape)?;
        let split = match config.mode {
            EvalMode::Resubstitution => 0,
            EvalMode::HeldOut => grid.pixel_bounds(0, grid.dims().1 / 2).2,
        };
        let train_cols = match config.mode {
            EvalMode::Resubstitution => 0..shape.1,
            EvalMode::HeldOut => 0..split,
        };
        let rois = sample_training_rois(
            labels,
            train_cols,
            config.rois_per_class,
            config.roi_size_px,
            config.seed,
        )?;
        let mut eval_mask = labels.mapv(|l| l != label::CORKBOARD);
        eval_mask
            .indexed_iter_mut()
            .for_each(|((_, c), m)| *m &= c >= split);
        let truth_pixels = labels.mapv(|l| l == label::CANCER);
        let truth = blockify(&truth_pixels, &grid, &eval_mask)?;
        Ok(Evaluator {
            stack,
            grid,
            config,
            rois,
            truth_pixels,
            eval_mask,
            truth,
        })
    }

    pub fn with_rois(mut self, rois: Vec<TrainingRoi>) -> Self {
        self.rois = rois;
        self
    }

    pub fn truth_blocks(&self) -> &BlockMap {
        &self.truth
    }

    pub fn truth_pixels(&self) -> &Array2<bool> {
        &self.truth_pixels
    }

    pub fn evaluation_mask(&self) -> &Array2<bool> {
        &self.eval_mask
    }

    pub fn train(&self, channels: &ChannelSet) -> Result<LdaModel> {
        let features = build_features(self.stack, channels, &self.rois)?;
        train_lda_with(&features, self.config.lambda, self.config.priors)
    }

    pub fn evaluate(&self, channels: &ChannelSet) -> Result<Evaluation> {
        let model = self.train(channels)?;
        let pixels = predict_map(&model, self.stack)?;
        let predicted = blockify(&pixels.cancer, &self.grid, &self.eval_mask)?;
        let counts = confusion(&self.truth, &predicted)?;
        Ok(Evaluation {
            model,
            pixels,
            truth: self.truth.clone(),
            predicted,
            row: MetricsRow::new(channels.clone(), counts),
        })
    }
}

/// All subsets of channels 2..=10 with the given sizes, in lexicographic order.
pub fn channel_subsets(sizes: &[usize]) -> Result<Vec<ChannelSet>> {
    let all: Vec<u8> = (FIRST_CHANNEL..=LAST_CHANNEL).collect();
    let mut out = Vec::new();
    for &k in sizes {
        if k == 0 || k > all.len() {
            return Err(invalid(format!(
                "subset size {k} outside 1..={}",
                all.len()
            )));
        }
        out.extend(all.iter().copied().combinations(k).map(ChannelSet));
    }
    Ok(out)
}

/// Accuracy descending (undefined last), then channel list ascending.
pub fn rank_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| {
        let by_acc = match (a.accuracy, b.accuracy) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_acc.then_with(|| a.channels.channels().cmp(b.channels.channels()))
    });
}

/// Train and score every subset of the given sizes, then rank.
pub fn channel_sweep(evaluator: &Evaluator<'_>, sizes: &[usize]) -> Result<Vec<MetricsRow>> {
    let subsets = channel_subsets(sizes)?;
    let mut rows = subsets
        .par_iter()
        .map(|s| evaluator.evaluate(s).map(|e| e.row))
        .collect::<Result<Vec<_>>>()?;
    rank_rows(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::metrics::ConfusionCounts;

    #[test]
    fn subset_counts() {
        for (k, n) in [(1, 9), (2, 36), (3, 84), (9, 1)] {
            assert_eq!(channel_subsets(&[k]).unwrap().len(), n);
        }
        assert!(channel_subsets(&[0]).is_err());
    }

    #[test]
    fn ranking_ties_are_lexicographic() {
        let c = ConfusionCounts {
            tn: 1,
            fn_: 1,
            tp: 1,
            fp: 1,
        };
        let mut rows = vec![
            MetricsRow::new(ChannelSet(vec![5, 6]), c),
            MetricsRow::new(ChannelSet(vec![2, 9]), c),
            MetricsRow::new(ChannelSet(vec![3]), ConfusionCounts { tn: 3, ..c }),
        ];
        rank_rows(&mut rows);
        let order: Vec<String> = rows.iter().map(|r| r.channels.to_string()).collect();
        assert_eq!(order, ["[3]", "[2 9]", "[5 6]"]);
    }

    #[test]
    fn rois_stay_inside_their_class() {
        let mut labels = Array2::from_elem((40, 40), 0u8);
        labels.slice_mut(ndarray::s![10..30, 10..30]).fill(3);
        let rois = sample_training_rois(&labels, 0..40, 4, 5, 1).unwrap();
        assert_eq!(rois.len(), 8);
        for t in rois {
            for (r, c) in t.roi.pixels((40, 40)) {
                assert_eq!(labels[[r, c]], t.label);
            }
        }
    }
}
