//! Segmentation overlap scores and communication-overhead sizing.

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("mask {index}: prediction is {pred_w}x{pred_h}, truth is {truth_w}x{truth_h}")]
    ShapeMismatch {
        index: usize,
        pred_w: usize,
        pred_h: usize,
        truth_w: usize,
        truth_h: usize,
    },
    #[error("{pred} prediction masks but {truth} truth masks")]
    CountMismatch { pred: usize, truth: usize },
    #[error("class count must be positive")]
    NoClasses,
    #[error("class id {id} is not below the class count {classes}")]
    ClassOutOfRange { id: u32, classes: usize },
    #[error("mask parse error: {0}")]
    Parse(String),
}

/// A per-pixel class map, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    classes: Vec<u32>,
}

impl Mask {
    pub fn new(width: usize, height: usize, classes: Vec<u32>) -> Result<Self, MetricsError> {
        if classes.len() != width * height {
            return Err(MetricsError::Parse(format!(
                "expected {} class ids, found {}",
                width * height,
                classes.len()
            )));
        }
        Ok(Self { width, height, classes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    /// Plain-text form: width, height, then `width * height` class ids,
    /// whitespace separated. `#` starts a comment that runs to end of line.
    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut next_num = |what: &str| -> Result<u64, MetricsError> {
            let tok = tokens
                .next()
                .ok_or_else(|| MetricsError::Parse(format!("missing {what}")))?;
            tok.parse()
                .map_err(|_| MetricsError::Parse(format!("bad {what} `{tok}`")))
        };
        let width = next_num("width")? as usize;
        let height = next_num("height")? as usize;
        let classes = (0..width * height)
            .map(|_| next_num("class id").map(|v| v as u32))
            .collect::<Result<Vec<_>, _>>()?;
        if tokens.next().is_some() {
            return Err(MetricsError::Parse("trailing data after mask".into()));
        }
        Self::new(width, height, classes)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.width, self.height);
        for row in self.classes.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Per-class true positive, false positive and false negative pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTotals {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionTotals {
    pub fn from_masks(pred: &[Mask], truth: &[Mask], class_count: usize) -> Result<Self, MetricsError> {
        if class_count == 0 {
            return Err(MetricsError::NoClasses);
        }
        if pred.len() != truth.len() {
            return Err(MetricsError::CountMismatch {
                pred: pred.len(),
                truth: truth.len(),
            });
        }
        let mut totals = Self {
            tp: vec![0; class_count],
            fp: vec![0; class_count],
            fn_: vec![0; class_count],
        };
        for (index, (p, t)) in pred.iter().zip(truth).enumerate() {
            if p.width != t.width || p.height != t.height {
                return Err(MetricsError::ShapeMismatch {
                    index,
                    pred_w: p.width,
                    pred_h: p.height,
                    truth_w: t.width,
                    truth_h: t.height,
                });
            }
            for (&a, &b) in p.classes.iter().zip(&t.classes) {
                for id in [a, b] {
                    if id as usize >= class_count {
                        return Err(MetricsError::ClassOutOfRange {
                            id,
                            classes: class_count,
                        });
                    }
                }
                if a == b {
                    totals.tp[a as usize] += 1;
                } else {
                    totals.fp[a as usize] += 1;
                    totals.fn_[b as usize] += 1;
                }
            }
        }
        Ok(totals)
    }

    /// `TP / (TP + FP + FN)`, or 1.0 for a class absent from both sides.
    /// `2 tp / (2 tp + fp + fn)`; 1.0 when the class is absent from both.
    pub fn dice(&self, class: usize) -> f64 {
        let denom = 2 * self.tp[class] + self.fp[class] + self.fn_[class];
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp[class]) as f64 / denom as f64
        }
    }

    pub fn dices(&self) -> Vec<f64> {
        (0..self.tp.len()).map(|c| self.dice(c)).collect()
    }

    pub fn iou(&self, class: usize) -> f64 {
        let denom = self.tp[class] + self.fp[class] + self.fn_[class];
        if denom == 0 {
            1.0
        } else {
            self.tp[class] as f64 / denom as f64
        }
    }

    pub fn ious(&self) -> Vec<f64> {
        (0..self.tp.len()).map(|b| self.iou(b)).collect()
    }
}

pub fn iou_per_class(pred: &[Mask], truth: &[Mask], class: u32) -> Result<f64, MetricsError> {
    let classes = pred
        .iter()
        .chain(truth)
        .flat_map(|m| m.classes.iter().copied())
        .max()
        .map_or(0, |m| m as usize + 1)
        .max(class as usize + 1);
    Ok(ConfusionTotals::from_masks(pred, truth, classes)?.iou(class as usize))
}

pub fn miou(pred: &[Mask], truth: &[Mask], class_count: usize) -> Result<f64, MetricsError> {
    let ious = ConfusionTotals::from_masks(pred, truth, class_count)?.ious();
    Ok(mean(&ious))
}

pub fn dice_from_iou(iou: f64) -> f64 {
    2.0 * iou / (1.0 + iou)
}

/// Per-class Dice and their mean.
pub fn dice_scores(pred: &[Mask], truth: &[Mask], class_count: usize) -> Result<(Vec<f64>, f64), MetricsError> {
    let dice = ConfusionTotals::from_masks(pred, truth, class_count)?.dices();
    let m = mean(&dice);
    Ok((dice, m))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Byte sizing of one encrypted model upload on an elliptic-curve group.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    pub elements: u64,
    pub group_bits: u64,
    /// Two affine coordinates per point.
    pub bytes_uncompressed: u64,
    /// x coordinate plus one sign bit per point, bit-packed.
    pub bytes_compressed: u64,
    pub encrypt_ms_per_vector: Option<f64>,
}

pub fn overhead_report(elements: u64, group_bits: u64, timing_samples: &[Duration]) -> OverheadReport {
    let coord = group_bits.div_ceil(8);
    let encrypt_ms_per_vector = (!timing_samples.is_empty())
        .then(|| timing_samples.iter().map(Duration::as_secs_f64).sum::<f64>() * 1000.0 / timing_samples.len() as f64);
    OverheadReport {
        elements,
        group_bits,
        bytes_uncompressed: elements * 2 * coord,
        bytes_compressed: (elements * (group_bits + 1)).div_ceil(8),
        encrypt_ms_per_vector,
    }
}

/// Number of points whose uncompressed encoding totals `bytes`.
pub fn elements_from_uncompressed_bytes(bytes: u64, group_bits: u64) -> u64 {
    bytes / (2 * group_bits.div_ceil(8))
}

impl OverheadReport {
    pub fn compression_ratio(&self) -> f64 {
        self.bytes_compressed as f64 / self.bytes_uncompressed as f64
    }
}
