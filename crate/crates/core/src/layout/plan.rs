use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::CodecSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementGroup {
    pub name: String,
    pub columns: Vec<String>,
}

/// Ordered named groups of columns for the manual layout.
///
/// TOML form: one `[[group]]` table per group with `name` and `columns`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementPlan {
    #[serde(rename = "group")]
    pub groups: Vec<PlacementGroup>,
}

impl PlacementPlan {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Layout(format!("malformed placement plan: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading plan {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    /// Block indices in placement order; every codec column exactly once.
    pub fn block_order(&self, spec: &CodecSpec) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        let mut order = Vec::with_capacity(spec.blocks().len());
        for group in &self.groups {
            for col in &group.columns {
                let idx = spec
                    .blocks()
                    .iter()
                    .position(|b| &b.column_name == col)
                    .ok_or_else(|| {
                        Error::Layout(format!(
                            "plan group `{}` names unknown column `{col}`",
                            group.name
                        ))
                    })?;
                if !seen.insert(idx) {
                    return Err(Error::Layout(format!("plan lists column `{col}` twice")));
                }
                order.push(idx);
            }
        }
        let missing: Vec<&str> = spec
            .blocks()
            .iter()
            .enumerate()
            .filter(|(i, _)| !seen.contains(i))
            .map(|(_, b)| b.column_name.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Layout(format!(
                "plan omits column(s): {}",
                missing.join(", ")
            )));
        }
        Ok(order)
    }
}
