use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::Table;

/// Bachelors or higher in the UCI `education-num` coding.
pub const BACHELORS_EDUCATION_NUM: f64 = 13.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralFeature {
    pub feature: String,
    pub real_pct: f64,
    pub synth_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub features: Vec<StructuralFeature>,
}

impl StructuralReport {
    pub fn get(&self, feature: &str) -> Option<&StructuralFeature> {
        self.features.iter().find(|f| f.feature == feature)
    }
}

enum Test {
    Is(&'static str, &'static str),
    IsNot(&'static str, &'static str),
    AtLeast(&'static str, f64),
}

const FEATURES: [(&str, Test); 6] = [
    (">50K income", Test::Is("income", ">50K")),
    ("Married-civ-spouse", Test::Is("marital-status", "Married-civ-spouse")),
    ("Husband", Test::Is("relationship", "Husband")),
    ("Bachelors+", Test::AtLeast("education-num", BACHELORS_EDUCATION_NUM)),
    ("White", Test::Is("race", "White")),
    ("Foreign-born", Test::IsNot("native-country", "United-States")),
];

fn share(table: &Table, test: &Test) -> Result<f64> {
    let column = match test {
        Test::Is(c, _) | Test::IsNot(c, _) | Test::AtLeast(c, _) => *c,
    };
    let c = table
        .schema()
        .index_of(column)
        .ok_or_else(|| Error::Audit(format!("structural report needs column `{column}`")))?;
    if table.is_empty() {
        return Ok(0.0);
    }
    let hits = table
        .rows()
        .iter()
        .filter(|row| match test {
            Test::Is(_, v) => row[c].as_category().is_some_and(|k| table.category_name(c, k) == *v),
            Test::IsNot(_, v) => row[c].as_category().is_some_and(|k| table.category_name(c, k) != *v),
            Test::AtLeast(_, t) => row[c].as_number().is_some_and(|x| x >= *t),
        })
        .count();
    Ok(100.0 * hits as f64 / table.len() as f64)
}

/// Percentages of the structural and diversity features in one table.
pub fn feature_shares(table: &Table) -> Result<Vec<(String, f64)>> {
    FEATURES
        .iter()
        .map(|(name, test)| Ok((name.to_string(), share(table, test)?)))
        .collect()
}

pub fn structural_report(real: &Table, synth: &Table) -> Result<StructuralReport> {
    let r = feature_shares(real)?;
    let s = feature_shares(synth)?;
    Ok(StructuralReport {
        features: r
            .into_iter()
            .zip(s)
            .map(|((feature, real_pct), (_, synth_pct))| StructuralFeature {
                feature,
                real_pct,
                synth_pct,
            })
            .collect(),
    })
}
