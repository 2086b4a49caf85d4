use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EngineError;

/// Per-generation resampling of the training rows.
///
/// Each generation draws a start offset inside the first `buffer_days` rows
/// and takes a fixed-width window from there, so every generation sees the
/// same number of rows. The window is cut into `segments` contiguous parts;
/// ordinary generations see one part, super generations see all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRegime {
    pub buffer_days: usize,
    pub segments: usize,
    pub super_every: usize,
}

impl Default for TrainingRegime {
    fn default() -> Self {
        TrainingRegime {
            buffer_days: 100,
            segments: 3,
            super_every: 50,
        }
    }
}

impl TrainingRegime {
    /// Generations are numbered from 1.
    pub fn is_super(&self, generation: usize) -> bool {
        self.super_every > 0 && generation.is_multiple_of(self.super_every)
    }

    /// Width of every sampled window for `available` training rows.
    pub fn window_width(&self, available: usize) -> usize {
        available.saturating_sub(self.buffer_days)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingWindow {
    pub offset: usize,
    pub window: Range<usize>,
    pub parts: Vec<Range<usize>>,
    /// Rows evaluated this generation.
    pub rows: Range<usize>,
    pub is_super: bool,
}

/// Splits `window` into `segments` contiguous parts; leftover rows join the
/// last part.
pub fn segment(window: Range<usize>, segments: usize) -> Vec<Range<usize>> {
    let part = window.len() / segments;
    (0..segments)
        .map(|k| {
            let start = window.start + k * part;
            let end = if k + 1 == segments {
                window.end
            } else {
                start + part
            };
            start..end
        })
        .collect()
}

/// Picks this generation's evaluation rows out of `available`.
pub fn sample_training_window<R: Rng + ?Sized>(
    available: Range<usize>,
    generation: usize,
    regime: &TrainingRegime,
    rng: &mut R,
) -> Result<TrainingWindow, EngineError> {
    let len = available.len();
    if regime.segments == 0 || len <= regime.buffer_days + regime.segments {
        return Err(EngineError::TrainingTooShort {
            rows: len,
            needed: regime.buffer_days + regime.segments + 1,
        });
    }
    let offset = rng.random_range(0..regime.buffer_days.max(1));
    let width = regime.window_width(len);
    let start = available.start + offset;
    let window = start..start + width;
    let parts = segment(window.clone(), regime.segments);
    let is_super = regime.is_super(generation);
    let rows = if is_super {
        window.clone()
    } else {
        parts[generation % regime.segments].clone()
    };
    Ok(TrainingWindow {
        offset,
        window,
        parts,
        rows,
        is_super,
    })
}
