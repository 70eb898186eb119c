use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemanticRule {
    NegCapital,
    HoursRange,
    FemaleHusband,
    MaleWife,
    EduRange,
}

impl SemanticRule {
    pub const ALL: [SemanticRule; 5] = [
        SemanticRule::NegCapital,
        SemanticRule::HoursRange,
        SemanticRule::FemaleHusband,
        SemanticRule::MaleWife,
        SemanticRule::EduRange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SemanticRule::NegCapital => "NegCapital",
            SemanticRule::HoursRange => "HoursRange",
            SemanticRule::FemaleHusband => "FemaleHusband",
            SemanticRule::MaleWife => "MaleWife",
            SemanticRule::EduRange => "EduRange",
        }
    }
}

/// Column names and bounds the rules read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticConfig {
    pub capital_gain: String,
    pub capital_loss: String,
    pub hours: String,
    pub hours_range: (f64, f64),
    pub sex: String,
    pub relationship: String,
    pub education_num: String,
    pub education_range: (f64, f64),
}

impl Default for SemanticConfig {
    fn default() -> Self {
        SemanticConfig {
            capital_gain: "capital-gain".into(),
            capital_loss: "capital-loss".into(),
            hours: "hours-per-week".into(),
            hours_range: (1.0, 99.0),
            sex: "sex".into(),
            relationship: "relationship".into(),
            education_num: "education-num".into(),
            education_range: (1.0, 16.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: SemanticRule,
    pub count: usize,
    pub rate: f64,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticReport {
    pub rows: usize,
    pub rules: Vec<RuleOutcome>,
    /// Rows breaking at least one rule.
    pub any_count: usize,
    pub any_rate: f64,
}

impl SemanticReport {
    pub fn rule(&self, rule: SemanticRule) -> &RuleOutcome {
        self.rules.iter().find(|r| r.rule == rule).expect("every rule is reported")
    }
}

fn rate(count: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        count as f64 / n as f64
    }
}

pub fn semantic_check(table: &Table) -> Result<SemanticReport> {
    semantic_check_with(table, &SemanticConfig::default())
}

pub fn semantic_check_with(table: &Table, cfg: &SemanticConfig) -> Result<SemanticReport> {
    let schema = table.schema();
    let col = |name: &str| {
        schema
            .index_of(name)
            .ok_or_else(|| Error::Audit(format!("semantic check needs column `{name}`")))
    };
    let (gain, loss, hours) = (col(&cfg.capital_gain)?, col(&cfg.capital_loss)?, col(&cfg.hours)?);
    let (sex, rel, edu) = (col(&cfg.sex)?, col(&cfg.relationship)?, col(&cfg.education_num)?);
    let num = |row: &[Value], c: usize| row[c].as_number().unwrap_or(f64::NAN);
    let is = |row: &[Value], c: usize, name: &str| {
        row[c]
            .as_category()
            .is_some_and(|k| table.category_name(c, k) == name)
    };
    let outside = |v: f64, (lo, hi): (f64, f64)| !(lo..=hi).contains(&v);

    let mut flagged: Vec<Vec<usize>> = vec![Vec::new(); SemanticRule::ALL.len()];
    let mut any = 0;
    for (i, row) in table.rows().iter().enumerate() {
        let hits = [
            num(row, gain) < 0.0 || num(row, loss) < 0.0,
            outside(num(row, hours), cfg.hours_range),
            is(row, sex, "Female") && is(row, rel, "Husband"),
            is(row, sex, "Male") && is(row, rel, "Wife"),
            outside(num(row, edu), cfg.education_range),
        ];
        for (k, &h) in hits.iter().enumerate() {
            if h {
                flagged[k].push(i);
            }
        }
        any += hits.iter().any(|&h| h) as usize;
    }
    let n = table.len();
    Ok(SemanticReport {
        rows: n,
        rules: SemanticRule::ALL
            .iter()
            .zip(flagged)
            .map(|(&rule, rows)| RuleOutcome {
                rule,
                count: rows.len(),
                rate: rate(rows.len(), n),
                rows,
            })
            .collect(),
        any_count: any,
        any_rate: rate(any, n),
    })
}
