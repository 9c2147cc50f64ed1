use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::RatingLabel;
use crate::teacher::Segment;

/// Bookkeeping about where a rating came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TeacherMeta {
    /// Label the teacher would have given without noise, when known.
    pub clean_label: Option<RatingLabel>,
    /// Feedback session that produced the rating (0 = warmup).
    pub session: usize,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSample {
    pub segment: Segment,
    pub label: RatingLabel,
    pub meta: TeacherMeta,
}

/// Append-only store of rated segments with per-class index lists that always
/// partition the sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    n_classes: usize,
    samples: Vec<RatingSample>,
    class_index: Vec<Vec<usize>>,
}

impl RatingDataset {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            samples: Vec::new(),
            class_index: vec![Vec::new(); n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn push(&mut self, segment: Segment, label: RatingLabel, meta: TeacherMeta) -> Result<()> {
        if label.index() >= self.n_classes {
            return Err(Error::LabelOutOfRange {
                label: label.index(),
                n: self.n_classes,
            });
        }
        self.class_index[label.index()].push(self.samples.len());
        self.samples.push(RatingSample {
            segment,
            label,
            meta,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[RatingSample] {
        &self.samples
    }

    pub fn class_index(&self) -> &[Vec<usize>] {
        &self.class_index
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.class_index.iter().map(Vec::len).collect()
    }

    pub fn labels(&self) -> Vec<RatingLabel> {
        self.samples.iter().map(|s| s.label).collect()
    }
}
