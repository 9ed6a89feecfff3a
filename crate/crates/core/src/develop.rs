// SPDX-License-Identifier: MIT OR Apache-2.0

//! Difference-vector accuracy across checkpoints, layers and model scale.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{read_archive_for, read_stimuli, ActivationArchive, StimulusSet};
use crate::category::CategoryPair;
use crate::diffvec::{crossval_select_layer, CvReport};
use crate::error::{Error, Result};

/// Accuracy at which a category pair counts as distinguished in the
/// emergence summary.
pub const EMERGENCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Checkpoint,
    Layer,
    Scale,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Checkpoint => "checkpoint",
            Self::Layer => "layer",
            Self::Scale => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// Axis value shown in tables (checkpoint step, model name, ...).
    pub label: String,
    pub archive: PathBuf,
    /// Stimulus table for this archive; falls back to the spec-level table.
    #[serde(default)]
    pub stimuli: Option<PathBuf>,
}

/// Sweep description, also the JSON accepted by the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub entries: Vec<SweepEntry>,
    #[serde(default)]
    pub stimuli: Option<PathBuf>,
    pub pairs: Vec<CategoryPair>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_folds() -> usize {
    5
}

impl SweepSpec {
    /// Read a JSON spec; relative paths resolve against the spec's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: SweepSpec =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(s) = spec.stimuli.as_mut() {
            resolve(s);
        }
        for e in &mut spec.entries {
            resolve(&mut e.archive);
            if let Some(s) = e.stimuli.as_mut() {
                resolve(s);
            }
        }
        Ok(spec)
    }

    fn check(&self, n_entries: usize) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::Precondition("sweep has an empty pair list".into()));
        }
        if n_entries == 0 {
            return Err(Error::Precondition("sweep needs at least one archive".into()));
        }
        if self.axis == SweepAxis::Layer && n_entries != 1 {
            return Err(Error::Precondition(format!(
                "a layer sweep takes exactly one archive, got {n_entries}"
            )));
        }
        Ok(())
    }
}

/// One line of the long-format table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub position: usize,
    pub label: String,
    pub category_pair: CategoryPair,
    /// Best layer for checkpoint and scale sweeps, the swept layer otherwise.
    pub layer: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emergence {
    pub category_pair: CategoryPair,
    /// First sweep position with accuracy at or above the threshold.
    pub position: Option<usize>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// Cross-validation reports, one per (entry, pair), in sweep order.
    pub reports: Vec<(String, CvReport)>,
    pub emergence: Vec<Emergence>,
}

impl SweepResult {
    /// Accuracies of one pair in sweep order.
    pub fn curve(&self, pair: CategoryPair) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.category_pair == pair)
            .map(|r| r.accuracy)
            .collect()
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("sweep.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e.to_string()))?;
        w.write_record(["position", self.axis.as_str(), "category_pair", "layer", "accuracy"])
            .map_err(|e| Error::parse(&path, e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.position.to_string(),
                r.label.clone(),
                r.category_pair.to_string(),
                r.layer.to_string(),
                r.accuracy.to_string(),
            ])
            .map_err(|e| Error::parse(&path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let path = dir.join("sweep.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// A sweep entry already in memory.
pub struct LoadedEntry {
    pub label: String,
    pub archive: ActivationArchive,
    pub stimuli: StimulusSet,
}

fn wrap(label: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Sweep {
        reference: label.to_string(),
        source: Box::new(e),
    }
}

/// Read every archive in the spec, then sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.check(spec.entries.len())?;
    let loaded = spec
        .entries
        .par_iter()
        .map(|e| {
            let reference = e.archive.display().to_string();
            let stim_path = e.stimuli.as_ref().or(spec.stimuli.as_ref()).ok_or_else(|| {
                Error::Sweep {
                    reference: reference.clone(),
                    source: Box::new(Error::Precondition("no stimulus table for this archive".into())),
                }
            })?;
            let load = || -> Result<LoadedEntry> {
                let stimuli = read_stimuli(stim_path)?;
                let archive = read_archive_for(&e.archive, &stimuli)?;
                Ok(LoadedEntry {
                    label: e.label.clone(),
                    archive,
                    stimuli,
                })
            };
            load().map_err(wrap(&reference))
        })
        .collect::<Result<Vec<_>>>()?;
    run_sweep_loaded(spec, &loaded)
}

/// Sweep over entries already in memory. `spec.entries` is ignored.
pub fn run_sweep_loaded(spec: &SweepSpec, entries: &[LoadedEntry]) -> Result<SweepResult> {
    spec.check(entries.len())?;
    let jobs: Vec<(usize, CategoryPair)> = (0..entries.len())
        .flat_map(|i| spec.pairs.iter().map(move |&p| (i, p)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(i, pair)| {
            let e = &entries[i];
            let pairs = e.stimuli.pair_set(pair);
            crossval_select_layer(&e.archive, &pairs, spec.folds, spec.seed)
                .map_err(wrap(&e.label))
                .map(|r| (e.label.clone(), r))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    match spec.axis {
        SweepAxis::Layer => {
            for pair in &spec.pairs {
                let (_, r) = reports.iter().find(|(_, r)| r.category_pair == *pair).expect("one report per pair");
                for (layer, &accuracy) in r.mean_accuracy.iter().enumerate() {
                    rows.push(SweepRow {
                        position: layer,
                        label: layer.to_string(),
                        category_pair: *pair,
                        layer,
                        accuracy,
                    });
                }
            }
        }
        SweepAxis::Checkpoint | SweepAxis::Scale => {
            for pair in &spec.pairs {
                for (position, ((label, r), _)) in reports
                    .iter()
                    .zip(&jobs)
                    .filter(|(_, (_, p))| p == pair)
                    .enumerate()
                {
                    rows.push(SweepRow {
                        position,
                        label: label.clone(),
                        category_pair: *pair,
                        layer: r.best_layer,
                        accuracy: r.best_accuracy(),
                    });
                }
            }
        }
    }
    let emergence = spec
        .pairs
        .iter()
        .map(|&pair| {
            let hit = rows
                .iter()
                .find(|r| r.category_pair == pair && r.accuracy >= EMERGENCE_THRESHOLD);
            Emergence {
                category_pair: pair,
                position: hit.map(|r| r.position),
                label: hit.map(|r| r.label.clone()),
            }
        })
        .collect();
    Ok(SweepResult {
        axis: spec.axis,
        rows,
        reports,
        emergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::Category;
    use crate::synth::{generate, SynthSpec};

    fn synth(separation: f64, seed: u64) -> LoadedEntry {
        let out = generate(&SynthSpec {
            layers: 4,
            hidden_dim: 12,
            per_category: 30,
            planted_layer: 2,
            separation,
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        LoadedEntry {
            label: format!("sep{separation}"),
            archive: out.archive,
            stimuli: out.stimuli,
        }
    }

    fn spec(axis: SweepAxis, pairs: Vec<CategoryPair>) -> SweepSpec {
        SweepSpec {
            axis,
            entries: Vec::new(),
            stimuli: None,
            pairs,
            folds: 5,
            seed: 1,
        }
    }

    fn pi() -> CategoryPair {
        CategoryPair::new(Category::Probable, Category::Impossible).unwrap()
    }

    #[test]
    fn layer_sweep_peaks_at_planted_layer() {
        let e = synth(10.0, 3);
        let s = spec(SweepAxis::Layer, vec![pi()]);
        let r = run_sweep_loaded(&s, std::slice::from_ref(&e)).unwrap();
        let curve = r.curve(pi());
        assert_eq!(curve.len(), 4);
        assert_eq!(curve[2], 1.0);
        assert!(curve.iter().enumerate().all(|(l, &a)| l == 2 || a < 1.0));
        assert_eq!(curve, r.reports[0].1.mean_accuracy);
        assert_eq!(r.emergence[0].position, Some(2));
    }

    #[test]
    fn checkpoint_sweep_increases_with_signal() {
        let entries = [synth(0.0, 3), synth(10.0, 3)];
        let s = spec(SweepAxis::Checkpoint, vec![pi()]);
        let r = run_sweep_loaded(&s, &entries).unwrap();
        let curve = r.curve(pi());
        assert!(curve[1] > curve[0], "{curve:?}");
        assert_eq!(r.rows[1].label, "sep10");
        // pure function of the inputs
        assert_eq!(r, run_sweep_loaded(&s, &entries).unwrap());
    }

    #[test]
    fn empty_pairs_rejected() {
        let e = synth(10.0, 3);
        let s = spec(SweepAxis::Checkpoint, vec![]);
        assert!(matches!(
            run_sweep_loaded(&s, std::slice::from_ref(&e)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn failures_name_the_reference() {
        let dir = tempfile::tempdir().unwrap();
        let s = SweepSpec {
            entries: vec![SweepEntry {
                label: "ckpt".into(),
                archive: dir.path().join("nope"),
                stimuli: Some(dir.path().join("nope.csv")),
            }],
            ..spec(SweepAxis::Scale, vec![pi()])
        };
        let err = run_sweep(&s).unwrap_err();
        assert!(matches!(err, Error::Sweep { .. }));
        assert!(err.to_string().contains("nope"), "{err}");
    }
}
