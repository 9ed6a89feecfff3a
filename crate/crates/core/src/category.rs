// SPDX-License-Identifier: MIT OR Apache-2.0

//! Modal categories and ordered category pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modal category of a sentence.
///
/// Declaration order is the canonical label order used by response tables:
/// probable, improbable, impossible, inconceivable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Probable,
    Improbable,
    Impossible,
    Inconceivable,
}

impl Category {
    /// Canonical label order.
    pub const ALL: [Category; 4] = [
        Category::Probable,
        Category::Improbable,
        Category::Impossible,
        Category::Inconceivable,
    ];

    /// Position in the plausibility ordering, 0 = least probable
    /// (inconceivable) up to 3 = probable.
    pub fn plausibility_rank(self) -> u8 {
        match self {
            Self::Inconceivable => 0,
            Self::Impossible => 1,
            Self::Improbable => 2,
            Self::Probable => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Probable => "probable",
            Self::Improbable => "improbable",
            Self::Impossible => "impossible",
            Self::Inconceivable => "inconceivable",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "probable" => Ok(Self::Probable),
            "improbable" => Ok(Self::Improbable),
            "impossible" => Ok(Self::Impossible),
            "inconceivable" => Ok(Self::Inconceivable),
            other => Err(Error::Validation(format!("unknown category `{other}`"))),
        }
    }
}

/// Ordered pair of distinct categories: difference vectors point from
/// `negative` towards `positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CategoryPair {
    pub positive: Category,
    pub negative: Category,
}

impl CategoryPair {
    pub fn new(positive: Category, negative: Category) -> Result<Self> {
        if positive == negative {
            return Err(Error::Validation(format!(
                "category pair needs distinct categories, got {positive}:{positive}"
            )));
        }
        Ok(Self { positive, negative })
    }

    /// The six unordered pairs, each oriented from the more to the less
    /// plausible category.
    pub fn all() -> Vec<CategoryPair> {
        let mut out = Vec::with_capacity(6);
        for (i, &a) in Category::ALL.iter().enumerate() {
            for &b in &Category::ALL[i + 1..] {
                out.push(CategoryPair {
                    positive: a,
                    negative: b,
                });
            }
        }
        out
    }

    /// Feature-space axes, in column order: probable−improbable,
    /// improbable−impossible, impossible−inconceivable.
    pub fn feature_axes() -> [CategoryPair; 3] {
        use Category::*;
        [
            CategoryPair { positive: Probable, negative: Improbable },
            CategoryPair { positive: Improbable, negative: Impossible },
            CategoryPair { positive: Impossible, negative: Inconceivable },
        ]
    }

    pub fn swapped(self) -> Self {
        Self {
            positive: self.negative,
            negative: self.positive,
        }
    }

    /// Name used for directories and table rows, e.g. `probable-impossible`.
    pub fn slug(self) -> String {
        format!("{}-{}", self.positive, self.negative)
    }
}

impl fmt::Display for CategoryPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.positive, self.negative)
    }
}

impl FromStr for CategoryPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .or_else(|| s.split_once('-'))
            .ok_or_else(|| Error::Validation(format!("category pair `{s}` must look like a:b")))?;
        CategoryPair::new(a.parse()?, b.parse()?)
    }
}

impl TryFrom<String> for CategoryPair {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CategoryPair> for String {
    fn from(p: CategoryPair) -> String {
        p.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_pairs_point_down_the_ordering() {
        let pairs = CategoryPair::all();
        assert_eq!(pairs.len(), 6);
        for p in pairs {
            assert!(p.positive.plausibility_rank() > p.negative.plausibility_rank());
        }
    }

    #[test]
    fn parse_pair() {
        let p: CategoryPair = "probable:impossible".parse().unwrap();
        assert_eq!(p.positive, Category::Probable);
        assert_eq!(p.negative, Category::Impossible);
        assert_eq!(p.to_string(), "probable:impossible");
        assert_eq!("probable-impossible".parse::<CategoryPair>().unwrap(), p);
        assert!("probable:probable".parse::<CategoryPair>().is_err());
        assert!("probable".parse::<CategoryPair>().is_err());
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"probable:impossible\"");
        assert_eq!(serde_json::from_str::<CategoryPair>("\"probable:impossible\"").unwrap(), p);
    }
}
