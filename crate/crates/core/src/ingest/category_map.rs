//! Versioned plain-text category map.
//!
//! ```text
//! version = 1
//!
//! [threshold]
//! min_count = 450
//!
//! [collapse]
//! # raw-description pattern = collapsed category, first match wins
//! aggravated assault = assault
//!
//! [classes]
//! assault = non-reclassified
//!
//! [exclude]
//! misappropriation
//! ```
//!
//! Patterns are case-insensitive substrings of the raw description. Anything
//! not listed under `[classes]` (including [`UNMAPPED`]) is excluded.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MIN_COUNT: u64 = 450;
/// Collapsed name for descriptions no rule matches.
pub const UNMAPPED: &str = "Unmapped";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Reclassified,
    NonReclassified,
    Excluded,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Reclassified => "reclassified",
            Classification::NonReclassified => "non-reclassified",
            Classification::Excluded => "excluded",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reclassified" => Ok(Classification::Reclassified),
            "non-reclassified" => Ok(Classification::NonReclassified),
            "excluded" => Ok(Classification::Excluded),
            other => Err(format!("unknown class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollapseRule {
    /// Lower-cased substring.
    pub pattern: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryMap {
    pub collapse_rules: Vec<CollapseRule>,
    pub classification: BTreeMap<String, Classification>,
    pub min_count_threshold: u64,
    pub exclusions: Vec<String>,
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl CategoryMap {
    /// Builds a map, checking that every classified category is reachable
    /// from some collapse rule.
    pub fn new(
        collapse_rules: Vec<CollapseRule>,
        classification: BTreeMap<String, Classification>,
        min_count_threshold: u64,
        exclusions: Vec<String>,
    ) -> Result<Self, IngestError> {
        for category in classification.keys() {
            if !collapse_rules.iter().any(|r| &r.category == category) {
                return Err(IngestError::Config(format!(
                    "category map: class given for `{category}` but no collapse rule produces it"
                )));
            }
        }
        let collapse_rules = collapse_rules
            .into_iter()
            .map(|r| CollapseRule { pattern: normalize(&r.pattern), category: r.category })
            .collect();
        Ok(Self { collapse_rules, classification, min_count_threshold, exclusions })
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let err = |line: usize, msg: String| IngestError::Config(format!("category map line {line}: {msg}"));
        let mut version = None;
        let mut min_count = DEFAULT_MIN_COUNT;
        let mut rules = Vec::new();
        let mut classes = BTreeMap::new();
        let mut exclusions = Vec::new();
        let mut section = String::new();

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                if !["threshold", "collapse", "classes", "exclude"].contains(&section.as_str()) {
                    return Err(err(lineno, format!("unknown section [{section}]")));
                }
                continue;
            }
            if section == "exclude" {
                exclusions.push(line.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(lineno, "expected `key = value`".into()));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(err(lineno, "empty key or value".into()));
            }
            match section.as_str() {
                "" if key == "version" => {
                    version = Some(value.parse::<u32>().map_err(|e| err(lineno, e.to_string()))?);
                }
                "" => return Err(err(lineno, format!("`{key}` outside a section"))),
                "threshold" if key == "min_count" => {
                    min_count = value.parse::<u64>().map_err(|e| err(lineno, format!("min_count: {e}")))?;
                }
                "threshold" => return Err(err(lineno, format!("unknown threshold key `{key}`"))),
                "collapse" => rules.push(CollapseRule { pattern: key.to_string(), category: value.to_string() }),
                "classes" => {
                    let class = value.parse().map_err(|e| err(lineno, e))?;
                    if classes.insert(key.to_string(), class).is_some() {
                        return Err(err(lineno, format!("class for `{key}` given twice")));
                    }
                }
                _ => unreachable!(),
            }
        }
        match version {
            Some(FORMAT_VERSION) => {}
            Some(v) => return Err(IngestError::Config(format!("category map version {v} is not supported"))),
            None => return Err(IngestError::Config("category map has no `version` line".into())),
        }
        Self::new(rules, classes, min_count, exclusions)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// First rule whose pattern occurs in the description; [`UNMAPPED`] otherwise.
    pub fn collapse_category(&self, raw_category: &str) -> &str {
        let raw = normalize(raw_category);
        self.collapse_rules
            .iter()
            .find(|r| raw.contains(&r.pattern))
            .map(|r| r.category.as_str())
            .unwrap_or(UNMAPPED)
    }

    /// Static class of a collapsed category, before any count threshold.
    pub fn classify(&self, category: &str) -> Classification {
        if self.exclusions.iter().any(|e| e.eq_ignore_ascii_case(category)) {
            return Classification::Excluded;
        }
        self.classification.get(category).copied().unwrap_or(Classification::Excluded)
    }

    pub fn with_threshold(mut self, min_count: u64) -> Self {
        self.min_count_threshold = min_count;
        self
    }
}

pub fn collapse_category<'m>(raw_category: &str, map: &'m CategoryMap) -> &'m str {
    map.collapse_category(raw_category)
}

pub fn classify(category: &str, map: &CategoryMap) -> Classification {
    map.classify(category)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "version = 1\n[threshold]\nmin_count = 3\n[collapse]\ngrand theft auto = gta\ntheft = larceny\nAggravated  Assault = assault\n[classes]\nlarceny = reclassified\ngta = non-reclassified\nassault = Non-Reclassified\n[exclude]\nassault\n";

    #[test]
    fn parses_and_collapses_first_match() {
        let m = CategoryMap::parse(SMALL).unwrap();
        assert_eq!(m.min_count_threshold, 3);
        assert_eq!(m.collapse_category("GRAND THEFT AUTO - 1st degree"), "gta");
        assert_eq!(m.collapse_category("petty theft"), "larceny");
        assert_eq!(m.collapse_category("aggravated   assault w/ knife"), "assault");
        assert_eq!(m.collapse_category("zzz-unknown"), UNMAPPED);
        assert_eq!(m.classify("larceny"), Classification::Reclassified);
        assert_eq!(m.classify("gta"), Classification::NonReclassified);
        // exclusion list wins over a class entry
        assert_eq!(m.classify("assault"), Classification::Excluded);
        assert_eq!(m.classify(UNMAPPED), Classification::Excluded);
    }

    #[test]
    fn rejects_bad_maps() {
        for bad in [
            "[collapse]\na = b\n",
            "version = 2\n",
            "version = 1\n[classes]\nlarceny = reclassified\n",
            "version = 1\n[threshold]\nmin_count = -1\n",
            "version = 1\n[collapse]\njust a line\n",
            "version = 1\n[weird]\n",
            "version = 1\n[collapse]\na = b\n[classes]\nb = maybe\n",
        ] {
            assert!(matches!(CategoryMap::parse(bad), Err(IngestError::Config(_))), "{bad}");
        }
    }
}
