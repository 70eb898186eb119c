//! Column roster for a delimited table.
//!
//! Schemas are written as TOML, one `[[column]]` table per column in file
//! order:
//!
//! ```toml
//! [[column]]
//! name = "age"
//! kind = "numeric"        # "numeric" | "categorical"
//! integer = true          # numeric only, default false
//! range = [17, 90]        # numeric only, optional [lo, hi]
//!
//! [[column]]
//! name = "sex"
//! kind = "categorical"
//! vocabulary = ["Female", "Male"]   # optional; fitted from data when absent
//! ```
//!
//! [`Schema::to_toml`] writes the same grammar back, so a parsed schema
//! round-trips without loss.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub integer: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>, integer: bool, range: Option<(f64, f64)>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            integer,
            range,
            vocabulary: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, vocabulary: Vec<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            integer: false,
            range: None,
            vocabulary,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == ColumnKind::Numeric
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == ColumnKind::Categorical
    }

    /// Index of `category` in the vocabulary.
    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.vocabulary.iter().position(|v| v == category)
    }
}

/// Ordered, name-unique list of columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "column")]
    columns: Vec<ColumnSpec>,
}

// Ranges in TOML are often written as integers; accept both.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Int(i64),
    Float(f64),
}

impl RawNumber {
    fn value(&self) -> f64 {
        match *self {
            RawNumber::Int(v) => v as f64,
            RawNumber::Float(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    kind: String,
    #[serde(default)]
    integer: bool,
    #[serde(default)]
    range: Option<Vec<RawNumber>>,
    #[serde(default)]
    vocabulary: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    #[serde(default)]
    column: Vec<RawColumn>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Schema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, index: usize) -> &ColumnSpec {
        &self.columns[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [ColumnSpec] {
        &mut self.columns
    }

    pub fn numeric_count(&self) -> usize {
        self.columns.iter().filter(|c| c.is_numeric()).count()
    }

    pub fn categorical_count(&self) -> usize {
        self.columns.iter().filter(|c| c.is_categorical()).count()
    }

    /// Same column names and kinds in the same order. Vocabularies may differ.
    pub fn is_compatible(&self, other: &Schema) -> bool {
        self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema declares no columns".into()));
        }
        let mut seen = HashSet::new();
        for col in &self.columns {
            if col.name.trim().is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", col.name)));
            }
            match col.kind {
                ColumnKind::Numeric => {
                    if !col.vocabulary.is_empty() {
                        return Err(Error::Schema(format!(
                            "numeric column `{}` declares a vocabulary",
                            col.name
                        )));
                    }
                    if let Some((lo, hi)) = col.range {
                        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                            return Err(Error::Schema(format!(
                                "malformed range [{lo}, {hi}] on column `{}`",
                                col.name
                            )));
                        }
                    }
                }
                ColumnKind::Categorical => {
                    if col.integer || col.range.is_some() {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` carries numeric attributes",
                            col.name
                        )));
                    }
                    let mut vocab = HashSet::new();
                    for v in &col.vocabulary {
                        if !vocab.insert(v.as_str()) {
                            return Err(Error::Schema(format!(
                                "duplicate category `{v}` in column `{}`",
                                col.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes to TOML")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading schema {}", path.display()), e))?;
        parse_schema(&text)
    }
}

/// Parse the TOML schema grammar documented at the top of this module.
pub fn parse_schema(config_text: &str) -> Result<Schema> {
    let raw: RawSchema =
        toml::from_str(config_text).map_err(|e| Error::Schema(format!("malformed config: {e}")))?;
    let mut columns = Vec::with_capacity(raw.column.len());
    for rc in raw.column {
        let kind = match rc.kind.as_str() {
            "numeric" => ColumnKind::Numeric,
            "categorical" => ColumnKind::Categorical,
            other => {
                return Err(Error::Schema(format!(
                    "unknown kind `{other}` for column `{}`",
                    rc.name
                )))
            }
        };
        let range = match rc.range {
            None => None,
            Some(r) if r.len() == 2 => Some((r[0].value(), r[1].value())),
            Some(r) => {
                return Err(Error::Schema(format!(
                    "malformed range on column `{}`: expected [lo, hi], got {} values",
                    rc.name,
                    r.len()
                )))
            }
        };
        columns.push(ColumnSpec {
            name: rc.name,
            kind,
            integer: rc.integer,
            range,
            vocabulary: rc.vocabulary,
        });
    }
    Schema::new(columns)
}
