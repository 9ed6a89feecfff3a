// SPDX-License-Identifier: MIT OR Apache-2.0

//! Stimulus, human-response and feature-rating tables.
//!
//! Tables are delimiter-separated text with a header row. Files ending in
//! `.tsv` or `.tab` are tab-separated, everything else comma-separated.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::{Category, CategoryPair};
use crate::diffvec::{MinimalPair, PairSet};
use crate::error::{Error, Result};

/// Stimuli answered by fewer participants than this are dropped.
pub const MIN_RESPONDENTS: u32 = 4;

const SUM_TOLERANCE: f64 = 1e-9;

/// Kind of adversarial manipulation applied to a stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adversarial {
    None,
    Lexical,
    Semantic,
}

impl fmt::Display for Adversarial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Lexical => "lexical",
            Self::Semantic => "semantic",
        })
    }
}

impl FromStr for Adversarial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "lexical" => Ok(Self::Lexical),
            "semantic" => Ok(Self::Semantic),
            other => Err(Error::Validation(format!("unknown adversarial tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: String,
    pub text: String,
    pub category: Option<Category>,
    /// Stimuli sharing a `pair_id` form one minimal-pair group.
    pub pair_id: Option<String>,
    pub source: String,
    pub adversarial: Option<Adversarial>,
}

impl Stimulus {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            category: None,
            pair_id: None,
            source: String::new(),
            adversarial: None,
        }
    }

    pub fn with_category(mut self, category: Category) -> Self {
        self.category = Some(category);
        self
    }

    pub fn with_pair(mut self, pair_id: impl Into<String>) -> Self {
        self.pair_id = Some(pair_id.into());
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

/// Ordered collection of stimuli with unique ids.
///
/// [`StimulusSet::new`] enforces id uniqueness and the minimal-pair rule;
/// use [`validate_stimuli`] to get a report instead of an error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StimulusSet {
    stimuli: Vec<Stimulus>,
}

impl StimulusSet {
    pub fn new(stimuli: Vec<Stimulus>) -> Result<Self> {
        let set = Self { stimuli };
        let report = validate_stimuli(&set, None);
        if let Some(issue) = report
            .issues
            .iter()
            .find(|i| matches!(i.kind, IssueKind::DuplicateId | IssueKind::PairCategoryClash))
        {
            return Err(Error::Validation(issue.to_string()));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Stimulus> {
        self.stimuli.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Stimulus> {
        self.stimuli.iter().find(|s| s.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.stimuli.iter().map(|s| s.id.clone()).collect()
    }

    /// Minimal pairs for one category pair: within every `pair_id` group,
    /// the stimulus of the positive category paired with the stimulus of
    /// the negative category. Groups are visited in first-appearance order.
    pub fn pair_set(&self, category_pair: CategoryPair) -> PairSet {
        let mut groups: Vec<(&str, HashMap<Category, &str>)> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for s in &self.stimuli {
            let (Some(pid), Some(cat)) = (s.pair_id.as_deref(), s.category) else {
                continue;
            };
            let g = *slot.entry(pid).or_insert_with(|| {
                groups.push((pid, HashMap::new()));
                groups.len() - 1
            });
            groups[g].1.entry(cat).or_insert(s.id.as_str());
        }
        let pairs = groups
            .iter()
            .filter_map(|(_, members)| {
                let pos = members.get(&category_pair.positive)?;
                let neg = members.get(&category_pair.negative)?;
                Some(MinimalPair::new(*pos, *neg))
            })
            .collect();
        PairSet::new(category_pair, pairs)
    }
}

impl FromIterator<Stimulus> for StimulusSet {
    /// Collects without validation.
    fn from_iter<I: IntoIterator<Item = Stimulus>>(iter: I) -> Self {
        Self {
            stimuli: iter.into_iter().collect(),
        }
    }
}

/// Population response distribution for one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanResponses {
    pub stimulus_id: String,
    pub distribution: Vec<f64>,
    pub respondent_count: u32,
}

/// Response distributions over a shared ordered label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub labels: Vec<String>,
    pub rows: Vec<HumanResponses>,
}

impl ResponseSet {
    pub fn new(labels: Vec<String>, rows: Vec<HumanResponses>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Validation("label set needs at least two labels".into()));
        }
        for r in &rows {
            if r.distribution.len() != labels.len() {
                return Err(Error::Validation(format!(
                    "response for `{}` has {} entries for {} labels",
                    r.stimulus_id,
                    r.distribution.len(),
                    labels.len()
                )));
            }
        }
        Ok(Self { labels, rows })
    }

    pub fn get(&self, id: &str) -> Option<&HumanResponses> {
        self.rows.iter().find(|r| r.stimulus_id == id)
    }

    /// Distributions in the order of `ids`; every id must be present.
    pub fn aligned(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        let by_id: HashMap<&str, &HumanResponses> =
            self.rows.iter().map(|r| (r.stimulus_id.as_str(), r)).collect();
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|r| r.distribution.clone())
                    .ok_or_else(|| Error::UnknownId(id.clone()))
            })
            .collect()
    }

    /// Keep only the rows whose ids are in `keep`.
    pub fn retain_ids(&self, keep: &HashSet<String>) -> Self {
        Self {
            labels: self.labels.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| keep.contains(&r.stimulus_id))
                .cloned()
                .collect(),
        }
    }
}

/// Mean Likert ratings of one stimulus. `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRatings {
    pub stimulus_id: String,
    pub ratings: BTreeMap<String, Option<f64>>,
}

/// Ratings over a declared, ordered feature header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsTable {
    pub features: Vec<String>,
    pub rows: Vec<FeatureRatings>,
}

impl RatingsTable {
    pub fn new(features: Vec<String>, rows: Vec<FeatureRatings>) -> Result<Self> {
        for r in &rows {
            for key in r.ratings.keys() {
                if !features.contains(key) {
                    return Err(Error::Validation(format!(
                        "rating `{key}` for `{}` is not a declared feature",
                        r.stimulus_id
                    )));
                }
            }
            for f in &features {
                if !r.ratings.contains_key(f) {
                    return Err(Error::Validation(format!(
                        "`{}` has no column for declared feature `{f}`",
                        r.stimulus_id
                    )));
                }
            }
        }
        Ok(Self { features, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    DuplicateId,
    /// A `pair_id` shared by no other stimulus.
    DanglingPairId,
    /// Two stimuli in one minimal-pair group with the same category.
    PairCategoryClash,
    /// Response distribution with negative entries or a sum other than 1.
    InvalidDistribution,
    /// Response row for an id absent from the stimulus set.
    UnknownResponseId,
    /// Stimulus dropped for having fewer than four respondents.
    TooFewRespondents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub id: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    /// Ids dropped because of the respondent threshold, in table order.
    pub excluded: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty() && self.excluded.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, id: &str, message: String) {
        self.issues.push(ValidationIssue {
            kind,
            id: id.to_string(),
            message,
        });
    }
}

/// Check a stimulus set and, optionally, its response table.
///
/// Never fails; every problem lands in the report. Stimuli with responses
/// from fewer than [`MIN_RESPONDENTS`] participants are listed in
/// `excluded`.
pub fn validate_stimuli(stimuli: &StimulusSet, responses: Option<&ResponseSet>) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = HashSet::new();
    for s in stimuli.iter() {
        if !seen.insert(s.id.as_str()) {
            report.push(IssueKind::DuplicateId, &s.id, "duplicate stimulus id".into());
        }
    }

    let mut groups: BTreeMap<&str, Vec<&Stimulus>> = BTreeMap::new();
    for s in stimuli.iter() {
        if let Some(pid) = s.pair_id.as_deref() {
            groups.entry(pid).or_default().push(s);
        }
    }
    for (pid, members) in &groups {
        if members.len() == 1 {
            report.push(
                IssueKind::DanglingPairId,
                &members[0].id,
                format!("pair_id `{pid}` has no partner"),
            );
        }
        let mut cats = HashSet::new();
        for s in members {
            if let Some(c) = s.category {
                if !cats.insert(c) {
                    report.push(
                        IssueKind::PairCategoryClash,
                        &s.id,
                        format!("pair_id `{pid}` already has a {c} stimulus"),
                    );
                }
            }
        }
    }

    if let Some(responses) = responses {
        for r in &responses.rows {
            if !seen.contains(r.stimulus_id.as_str()) {
                report.push(
                    IssueKind::UnknownResponseId,
                    &r.stimulus_id,
                    "responses for an id not in the stimulus set".into(),
                );
            }
            let sum: f64 = r.distribution.iter().sum();
            if r.distribution.iter().any(|p| !p.is_finite() || *p < 0.0) {
                report.push(
                    IssueKind::InvalidDistribution,
                    &r.stimulus_id,
                    "distribution has negative or non-finite entries".into(),
                );
            } else if (sum - 1.0).abs() > SUM_TOLERANCE {
                report.push(
                    IssueKind::InvalidDistribution,
                    &r.stimulus_id,
                    format!("sum ≠ 1 (sum = {sum})"),
                );
            }
            if r.respondent_count < MIN_RESPONDENTS {
                report.push(
                    IssueKind::TooFewRespondents,
                    &r.stimulus_id,
                    format!(
                        "{} respondents, fewer than {MIN_RESPONDENTS}",
                        r.respondent_count
                    ),
                );
                report.excluded.push(r.stimulus_id.clone());
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Delimited tables
// ---------------------------------------------------------------------------

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .trim(csv::Trim::Headers)
        .from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .delimiter(delimiter_for(path))
        .from_writer(file))
}

fn headers(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn column(path: &Path, header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::parse(path, format!("missing `{name}` column")))
}

fn non_empty(field: Option<&str>) -> Option<&str> {
    field.map(str::trim).filter(|f| !f.is_empty())
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, format!("line {line}: `{field}` is not a number")))
}

/// Read a stimulus table (`id, text, category, pair_id, source, adversarial`).
///
/// `id` and `text` are required; the other columns may be absent or empty.
pub fn read_stimuli(path: impl AsRef<Path>) -> Result<StimulusSet> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    let id_col = column(path, &header, "id")?;
    let text_col = column(path, &header, "text")?;
    let opt = |name: &str| header.iter().position(|h| h == name);
    let (cat_col, pair_col, src_col, adv_col) =
        (opt("category"), opt("pair_id"), opt("source"), opt("adversarial"));

    let mut stimuli = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let get = |c: Option<usize>| non_empty(c.and_then(|c| rec.get(c)));
        let id = get(Some(id_col))
            .ok_or_else(|| Error::parse(path, format!("line {line}: empty id")))?;
        let mut s = Stimulus::new(id, rec.get(text_col).unwrap_or_default());
        s.category = get(cat_col)
            .map(str::parse)
            .transpose()
            .map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        s.pair_id = get(pair_col).map(str::to_string);
        s.source = get(src_col).unwrap_or_default().to_string();
        s.adversarial = get(adv_col)
            .map(str::parse)
            .transpose()
            .map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        stimuli.push(s);
    }
    StimulusSet::new(stimuli).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_stimuli(stimuli: &StimulusSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let wrap = |e: csv::Error| Error::parse(path, e.to_string());
    w.write_record(["id", "text", "category", "pair_id", "source", "adversarial"])
        .map_err(wrap)?;
    for s in stimuli.iter() {
        let cat = s.category.map(|c| c.to_string()).unwrap_or_default();
        let adv = s.adversarial.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([
            s.id.as_str(),
            s.text.as_str(),
            cat.as_str(),
            s.pair_id.as_deref().unwrap_or(""),
            s.source.as_str(),
            adv.as_str(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a response table (`id, <label>..., respondent_count`).
///
/// Label columns keep their header order, except that a table whose labels
/// are exactly the four modal categories is put in canonical order.
/// Distributions are not checked here; see [`validate_stimuli`].
pub fn read_responses(path: impl AsRef<Path>) -> Result<ResponseSet> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    let id_col = column(path, &header, "id")?;
    let count_col = column(path, &header, "respondent_count")?;
    let mut label_cols: Vec<(String, usize)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col && *i != count_col)
        .map(|(i, h)| (h.clone(), i))
        .collect();

    let canonical: Vec<&str> = Category::ALL.iter().map(|c| c.as_str()).collect();
    let mut sorted: Vec<&str> = label_cols.iter().map(|(l, _)| l.as_str()).collect();
    sorted.sort_unstable();
    let mut canon_sorted = canonical.clone();
    canon_sorted.sort_unstable();
    if sorted == canon_sorted {
        label_cols.sort_by_key(|(l, _)| canonical.iter().position(|c| c == l));
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let id = non_empty(rec.get(id_col))
            .ok_or_else(|| Error::parse(path, format!("line {line}: empty id")))?;
        let distribution = label_cols
            .iter()
            .map(|(_, c)| parse_f64(path, line, rec.get(*c).unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        let count_field = rec.get(count_col).unwrap_or_default().trim();
        let respondent_count = count_field.parse().map_err(|_| {
            Error::parse(path, format!("line {line}: bad respondent_count `{count_field}`"))
        })?;
        rows.push(HumanResponses {
            stimulus_id: id.to_string(),
            distribution,
            respondent_count,
        });
    }
    ResponseSet::new(label_cols.into_iter().map(|(l, _)| l).collect(), rows)
        .map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_responses(responses: &ResponseSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let wrap = |e: csv::Error| Error::parse(path, e.to_string());
    let mut header = vec!["id".to_string()];
    header.extend(responses.labels.iter().cloned());
    header.push("respondent_count".into());
    w.write_record(&header).map_err(wrap)?;
    for r in &responses.rows {
        let mut rec = vec![r.stimulus_id.clone()];
        rec.extend(r.distribution.iter().map(|p| p.to_string()));
        rec.push(r.respondent_count.to_string());
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a ratings table (`id, <feature>...`). Empty or `NA` cells are
/// missing ratings.
pub fn read_ratings(path: impl AsRef<Path>) -> Result<RatingsTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    let id_col = column(path, &header, "id")?;
    let features: Vec<(String, usize)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col)
        .map(|(i, h)| (h.clone(), i))
        .collect();
    if features.is_empty() {
        return Err(Error::parse(path, "ratings table declares no features"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let id = non_empty(rec.get(id_col))
            .ok_or_else(|| Error::parse(path, format!("line {line}: empty id")))?;
        let mut ratings = BTreeMap::new();
        for (name, c) in &features {
            let value = match non_empty(rec.get(*c)) {
                None => None,
                Some(f) if f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") => None,
                Some(f) => Some(parse_f64(path, line, f)?),
            };
            ratings.insert(name.clone(), value);
        }
        rows.push(FeatureRatings {
            stimulus_id: id.to_string(),
            ratings,
        });
    }
    RatingsTable::new(features.into_iter().map(|(f, _)| f).collect(), rows)
}

pub fn write_ratings(table: &RatingsTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let wrap = |e: csv::Error| Error::parse(path, e.to_string());
    let mut header = vec!["id".to_string()];
    header.extend(table.features.iter().cloned());
    w.write_record(&header).map_err(wrap)?;
    for r in &table.rows {
        let mut rec = vec![r.stimulus_id.clone()];
        for f in &table.features {
            rec.push(match r.ratings.get(f).copied().flatten() {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn labels4() -> Vec<String> {
        Category::ALL.iter().map(|c| c.to_string()).collect()
    }

    fn four_way_group(item: &str) -> Vec<Stimulus> {
        Category::ALL
            .iter()
            .map(|&c| {
                Stimulus::new(format!("{item}-{c}"), format!("{item} {c}."))
                    .with_category(c)
                    .with_pair(item)
            })
            .collect()
    }

    #[test]
    fn clean_set_gives_empty_report() {
        let set = StimulusSet::new(four_way_group("a")).unwrap();
        let responses = ResponseSet::new(
            labels4(),
            set.iter()
                .map(|s| HumanResponses {
                    stimulus_id: s.id.clone(),
                    distribution: vec![0.25; 4],
                    respondent_count: 10,
                })
                .collect(),
        )
        .unwrap();
        let report = validate_stimuli(&set, Some(&responses));
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn three_respondents_excluded() {
        let set = StimulusSet::new(four_way_group("a")).unwrap();
        let responses = ResponseSet::new(
            labels4(),
            vec![HumanResponses {
                stimulus_id: "a-probable".into(),
                distribution: vec![1.0, 0.0, 0.0, 0.0],
                respondent_count: 3,
            }],
        )
        .unwrap();
        let report = validate_stimuli(&set, Some(&responses));
        assert_eq!(report.excluded, vec!["a-probable".to_string()]);
        assert!(report.has(IssueKind::TooFewRespondents));
    }

    #[test]
    fn bad_sum_flagged() {
        let set = StimulusSet::new(vec![Stimulus::new("x", "x.")]).unwrap();
        let responses = ResponseSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![HumanResponses {
                stimulus_id: "x".into(),
                distribution: vec![0.5, 0.5, 0.1],
                respondent_count: 9,
            }],
        )
        .unwrap();
        let report = validate_stimuli(&set, Some(&responses));
        let issue = report
            .issues
            .iter()
            .find(|i| i.kind == IssueKind::InvalidDistribution)
            .unwrap();
        assert!(issue.message.contains("sum ≠ 1"));
    }

    #[test]
    fn duplicates_and_dangling_pairs() {
        let set: StimulusSet = vec![
            Stimulus::new("a", "a.").with_pair("p1").with_category(Category::Probable),
            Stimulus::new("a", "b.").with_pair("p2"),
        ]
        .into_iter()
        .collect();
        let report = validate_stimuli(&set, None);
        assert!(report.has(IssueKind::DuplicateId));
        assert!(report.has(IssueKind::DanglingPairId));
        assert!(StimulusSet::new(set.iter().cloned().collect()).is_err());
    }

    #[test]
    fn pair_sharing_requires_distinct_categories() {
        let stimuli = vec![
            Stimulus::new("a", "a.").with_pair("p").with_category(Category::Probable),
            Stimulus::new("b", "b.").with_pair("p").with_category(Category::Probable),
        ];
        let err = StimulusSet::new(stimuli).unwrap_err();
        assert!(err.to_string().contains("already has a probable"));
    }

    #[test]
    fn pair_set_matches_groups() {
        let mut all = four_way_group("a");
        all.extend(four_way_group("b"));
        all.push(Stimulus::new("lone", "x.").with_category(Category::Probable));
        let set = StimulusSet::new(all).unwrap();
        let cp = CategoryPair::new(Category::Probable, Category::Impossible).unwrap();
        let pairs = set.pair_set(cp);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs.pairs()[0].positive, "a-probable");
        assert_eq!(pairs.pairs()[0].negative, "a-impossible");
        assert_eq!(pairs.pairs()[1].positive, "b-probable");
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut all = four_way_group("a");
        all[0].adversarial = Some(Adversarial::Lexical);
        all[0].source = "shades".into();
        all[1].text = "Commas, \"quotes\" and\ttabs.".into();
        let set = StimulusSet::new(all).unwrap();
        for name in ["s.csv", "s.tsv"] {
            let p = dir.path().join(name);
            write_stimuli(&set, &p).unwrap();
            assert_eq!(read_stimuli(&p).unwrap(), set);
        }

        let responses = ResponseSet::new(
            labels4(),
            vec![HumanResponses {
                stimulus_id: "a-probable".into(),
                distribution: vec![0.7, 0.2, 0.1, 0.0],
                respondent_count: 12,
            }],
        )
        .unwrap();
        let p = dir.path().join("r.csv");
        write_responses(&responses, &p).unwrap();
        assert_eq!(read_responses(&p).unwrap(), responses);

        let mut ratings = BTreeMap::new();
        ratings.insert("Imageability".to_string(), Some(5.5));
        ratings.insert("Event Likelihood".to_string(), None);
        let table = RatingsTable::new(
            vec!["Imageability".into(), "Event Likelihood".into()],
            vec![FeatureRatings {
                stimulus_id: "a-probable".into(),
                ratings,
            }],
        )
        .unwrap();
        let p = dir.path().join("f.tsv");
        write_ratings(&table, &p).unwrap();
        assert_eq!(read_ratings(&p).unwrap(), table);
    }

    #[test]
    fn response_labels_put_in_canonical_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(
            &p,
            "id,inconceivable,probable,impossible,improbable,respondent_count\nx,0.1,0.4,0.2,0.3,5\n",
        )
        .unwrap();
        let r = read_responses(&p).unwrap();
        assert_eq!(r.labels, labels4());
        assert_eq!(r.rows[0].distribution, vec![0.4, 0.3, 0.2, 0.1]);
    }

    #[test]
    fn binary_labels_keep_declared_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, "id,possible,impossible,respondent_count\nx,0.75,0.25,8\n").unwrap();
        let r = read_responses(&p).unwrap();
        assert_eq!(r.labels, vec!["possible".to_string(), "impossible".to_string()]);
    }

    #[test]
    fn ratings_must_use_declared_features() {
        let mut ratings = BTreeMap::new();
        ratings.insert("Other".to_string(), Some(1.0));
        let err = RatingsTable::new(
            vec!["Imageability".into()],
            vec![FeatureRatings {
                stimulus_id: "x".into(),
                ratings,
            }],
        );
        assert!(err.is_err());
    }
}
