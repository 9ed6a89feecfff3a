// SPDX-License-Identifier: MIT OR Apache-2.0

//! Portable activation archives and stimulus tables.
//!
//! An archive holds, for one model checkpoint, the hidden state of the final
//! "." token of every stimulus at every layer, plus the summed token
//! log-probability of each stimulus. On disk it is a directory:
//!
//! ```text
//! <archive>/
//!   manifest.json   model_id, checkpoint_id, layer_count, hidden_dim,
//!                   n_stimuli, stimulus_ids, summed_logprob, ...
//!   layer_0.f32     n * d little-endian f32, row-major, no header
//!   layer_1.f32
//!   ...
//! ```
//!
//! Row `i` of every layer matrix belongs to `stimulus_ids[i]`.

mod io;
mod stimuli;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_archive, read_archive_for, write_archive, MANIFEST_FILE};
pub use stimuli::{
    read_ratings, read_responses, read_stimuli, validate_stimuli, write_ratings, write_responses,
    write_stimuli, Adversarial, FeatureRatings, HumanResponses, IssueKind, RatingsTable,
    ResponseSet, Stimulus, StimulusSet, ValidationIssue, ValidationReport,
    MIN_RESPONDENTS,
};

pub(crate) use io::{read_f32_file, write_f32_file};

/// Optional descriptive metadata carried in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    /// Where in each block the hidden state was read, as declared by the
    /// producer (for example `resid_post`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_point: Option<String>,
    /// Ordered label set for datasets that do not use the four modal
    /// categories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_set: Option<Vec<String>>,
}

/// Final-token hidden states and summed log-probabilities for one model
/// checkpoint.
///
/// Construct with [`ActivationArchive::new`], which enforces every invariant;
/// the fields are read-only afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationArchive {
    model_id: String,
    checkpoint_id: String,
    hidden_dim: usize,
    stimulus_ids: Vec<String>,
    /// One row-major `n x d` matrix per layer.
    states: Vec<Vec<f32>>,
    summed_logprob: Vec<f64>,
    metadata: ArchiveMetadata,
    index: HashMap<String, usize>,
}

impl ActivationArchive {
    /// Validate and assemble an archive.
    pub fn new(
        model_id: impl Into<String>,
        checkpoint_id: impl Into<String>,
        hidden_dim: usize,
        stimulus_ids: Vec<String>,
        states: Vec<Vec<f32>>,
        summed_logprob: Vec<f64>,
    ) -> Result<Self> {
        let n = stimulus_ids.len();
        if n == 0 {
            return Err(Error::Validation("empty stimulus set".into()));
        }
        if hidden_dim == 0 {
            return Err(Error::Validation("hidden_dim must be positive".into()));
        }
        if states.is_empty() {
            return Err(Error::Validation("layer_count must be positive".into()));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in stimulus_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate stimulus id `{id}`")));
            }
        }
        for (layer, matrix) in states.iter().enumerate() {
            if matrix.len() != n * hidden_dim {
                return Err(Error::Validation(format!(
                    "layer {layer} holds {} values, expected n*d = {}*{}",
                    matrix.len(),
                    n,
                    hidden_dim
                )));
            }
            if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite hidden state at layer {layer}, row {}, column {}",
                    pos / hidden_dim,
                    pos % hidden_dim
                )));
            }
        }
        if summed_logprob.len() != n {
            return Err(Error::Validation(format!(
                "summed_logprob has {} entries for {n} stimuli",
                summed_logprob.len()
            )));
        }
        if let Some((i, lp)) = summed_logprob
            .iter()
            .enumerate()
            .find(|(_, lp)| !lp.is_finite() || **lp > 0.0)
        {
            return Err(Error::Validation(format!(
                "summed_logprob for `{}` is {lp}; must be finite and <= 0",
                stimulus_ids[i]
            )));
        }
        Ok(Self {
            model_id: model_id.into(),
            checkpoint_id: checkpoint_id.into(),
            hidden_dim,
            stimulus_ids,
            states,
            summed_logprob,
            metadata: ArchiveMetadata::default(),
            index,
        })
    }

    pub fn with_metadata(mut self, metadata: ArchiveMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn checkpoint_id(&self) -> &str {
        &self.checkpoint_id
    }

    pub fn layer_count(&self) -> usize {
        self.states.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn len(&self) -> usize {
        self.stimulus_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimulus_ids.is_empty()
    }

    pub fn stimulus_ids(&self) -> &[String] {
        &self.stimulus_ids
    }

    pub fn summed_logprob(&self) -> &[f64] {
        &self.summed_logprob
    }

    pub fn metadata(&self) -> &ArchiveMetadata {
        &self.metadata
    }

    /// Row-major `n x d` matrix of one layer.
    pub fn layer(&self, layer: usize) -> Result<&[f32]> {
        self.states.get(layer).map(Vec::as_slice).ok_or_else(|| {
            Error::Precondition(format!(
                "layer {layer} out of range for {} layers",
                self.layer_count()
            ))
        })
    }

    /// Hidden state of row `row` at `layer`.
    ///
    /// Panics if either index is out of range.
    pub fn state(&self, layer: usize, row: usize) -> &[f32] {
        let d = self.hidden_dim;
        &self.states[layer][row * d..(row + 1) * d]
    }

    /// Row index of a stimulus id.
    pub fn row_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Check that the archive rows cover exactly the ids of `stimuli`.
    pub fn check_stimuli(&self, stimuli: &StimulusSet) -> Result<()> {
        if stimuli.len() != self.len() {
            return Err(Error::Validation(format!(
                "archive has {} stimuli but the stimulus set has {}",
                self.len(),
                stimuli.len()
            )));
        }
        for s in stimuli.iter() {
            if !self.index.contains_key(&s.id) {
                return Err(Error::Validation(format!(
                    "stimulus `{}` missing from archive",
                    s.id
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn states(&self) -> &[Vec<f32>] {
        &self.states
    }
}
