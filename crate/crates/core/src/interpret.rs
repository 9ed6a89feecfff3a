// SPDX-License-Identifier: MIT OR Apache-2.0

//! Absolute correlations between difference-vector projections and human
//! feature ratings.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::RatingsTable;
use crate::behavior::FeatureSpace;
use crate::error::{Error, Result};
use crate::numerics::pearson;

/// Fewest stimuli for a defined cell.
pub const MIN_CELL_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// `|r|`, or `None` when the correlation is undefined.
    pub value: Option<f64>,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl GridCell {
    fn undefined(count: usize, note: String) -> Self {
        Self {
            value: None,
            count,
            note: Some(note),
        }
    }
}

/// Rows are projection columns (vector names), columns are rating features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<GridCell>>,
}

impl CorrelationGrid {
    pub fn cell(&self, row: &str, column: &str) -> Option<&GridCell> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(&self.cells[r][c])
    }

    /// Matrix table: one line per vector, blank for undefined cells.
    pub fn write_matrix_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let mut header = vec!["vector".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| Error::parse(path, e.to_string()))?;
        for (name, row) in self.rows.iter().zip(&self.cells) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| c.value.map_or(String::new(), |v| v.to_string())));
            w.write_record(&rec).map_err(|e| Error::parse(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Long table: vector, feature, value, count, note.
    pub fn write_long_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        w.write_record(["vector", "feature", "abs_pearson", "count", "note"])
            .map_err(|e| Error::parse(path, e.to_string()))?;
        for (name, row) in self.rows.iter().zip(&self.cells) {
            for (feature, c) in self.columns.iter().zip(row) {
                w.write_record([
                    name.as_str(),
                    feature.as_str(),
                    &c.value.map_or(String::new(), |v| v.to_string()),
                    &c.count.to_string(),
                    c.note.as_deref().unwrap_or(""),
                ])
                .map_err(|e| Error::parse(path, e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `|pearson|` between every projection column and every rating feature.
///
/// Stimuli missing a rating drop out of that feature's cells only. Cells
/// with fewer than three stimuli or a constant column are undefined, with
/// the reason in `note`.
pub fn correlate_projections(features: &FeatureSpace, ratings: &RatingsTable) -> Result<CorrelationGrid> {
    let index: HashMap<&str, usize> = features
        .stimulus_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let rated: Vec<(usize, &crate::archive::FeatureRatings)> = ratings
        .rows
        .iter()
        .filter_map(|r| index.get(r.stimulus_id.as_str()).map(|&i| (i, r)))
        .collect();
    if rated.is_empty() {
        return Err(Error::Precondition(
            "no rated stimulus appears in the projection table".into(),
        ));
    }
    let n_rows = features.columns.len();
    let n_cols = ratings.features.len();
    let flat: Vec<GridCell> = (0..n_rows * n_cols)
        .into_par_iter()
        .map(|k| {
            let (v, f) = (k / n_cols, k % n_cols);
            let feature = &ratings.features[f];
            let (xs, ys): (Vec<f64>, Vec<f64>) = rated
                .iter()
                .filter_map(|(i, r)| {
                    r.ratings
                        .get(feature)
                        .copied()
                        .flatten()
                        .filter(|y| y.is_finite())
                        .map(|y| (features.features[*i][v], y))
                })
                .unzip();
            let count = xs.len();
            if count < MIN_CELL_COUNT {
                return GridCell::undefined(count, format!("only {count} rated stimuli"));
            }
            match pearson(&xs, &ys) {
                Ok(r) => GridCell {
                    value: Some(r.abs()),
                    count,
                    note: None,
                },
                Err(e) => GridCell::undefined(count, e.to_string()),
            }
        })
        .collect();
    let cells = flat.chunks(n_cols.max(1)).map(<[GridCell]>::to_vec).collect();
    Ok(CorrelationGrid {
        rows: features.columns.clone(),
        columns: ratings.features.clone(),
        cells: if n_cols == 0 { vec![Vec::new(); n_rows] } else { cells },
    })
}

/// Cell-wise mean over grids (for example one per model). Undefined cells
/// are left out of their cell's mean and counted in its note.
pub fn aggregate_grids(grids: &[CorrelationGrid]) -> Result<CorrelationGrid> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Precondition("no grids to aggregate".into()))?;
    for (i, g) in grids.iter().enumerate().skip(1) {
        if g.rows != first.rows || g.columns != first.columns {
            return Err(Error::Validation(format!(
                "grid {i} has axes {:?} x {:?}, expected {:?} x {:?}",
                g.rows, g.columns, first.rows, first.columns
            )));
        }
    }
    if grids.len() == 1 {
        return Ok(first.clone());
    }
    let cells = (0..first.rows.len())
        .map(|r| {
            (0..first.columns.len())
                .map(|c| {
                    let defined: Vec<&GridCell> = grids
                        .iter()
                        .map(|g| &g.cells[r][c])
                        .filter(|cell| cell.value.is_some())
                        .collect();
                    let excluded = grids.len() - defined.len();
                    let value = if defined.is_empty() {
                        None
                    } else {
                        Some(defined.iter().filter_map(|x| x.value).sum::<f64>() / defined.len() as f64)
                    };
                    GridCell {
                        value,
                        count: defined.iter().map(|x| x.count).sum(),
                        note: (excluded > 0).then(|| {
                            format!("{excluded} of {} grids undefined, excluded", grids.len())
                        }),
                    }
                })
                .collect()
        })
        .collect();
    Ok(CorrelationGrid {
        rows: first.rows.clone(),
        columns: first.columns.clone(),
        cells,
    })
}
