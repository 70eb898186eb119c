//! Fidelity, semantic, downstream-utility, disclosure and structural audits.

mod disclosure;
mod fidelity;
mod report;
mod semantic;
mod structural;
mod tstr;

pub use disclosure::{disclosure, median, DisclosureReport, DISCLOSURE_DEFINITION, LOO_REFERENCE_ROWS};
pub use fidelity::{
    column_shape_score, decile_bin, decile_edges, fidelity, ks_complement, ks_statistic,
    pairwise_correlation_score, total_variation, tv_complement, ColumnShape, FidelityScores,
    PairTrend,
};
pub use report::{
    reference_for, AuditReport, Reference, NOTES, REFERENCE_BASELINE, REFERENCE_CLUSTERED,
    REFERENCE_DISCLOSURE_RANGE, REFERENCE_MANUAL, REFERENCE_REAL_SHARES,
};
pub use semantic::{
    semantic_check, semantic_check_with, RuleOutcome, SemanticConfig, SemanticReport, SemanticRule,
};
pub use structural::{feature_shares, structural_report, StructuralFeature, StructuralReport};
pub use tstr::{
    evaluate, f1, tstr, tstr_with, ClassMetrics, Classifier, FeatureEncoder, LogisticRegression,
    TstrResult, INCOME_COLUMN, POSITIVE_CLASS,
};

use crate::error::{Error, Result};
use crate::layout::LayoutStrategy;
use crate::schema::Schema;
use crate::table::{Table, Value};

/// Re-express `table`'s categorical codes in `schema`'s vocabularies, by name.
pub fn align_to(table: &Table, schema: &Schema) -> Result<Table> {
    if !table.schema().is_compatible(schema) {
        return Err(Error::Audit("tables have different schemas".into()));
    }
    if table.schema() == schema {
        return Ok(table.clone());
    }
    let maps: Vec<Option<Vec<u32>>> = (0..schema.len())
        .map(|c| {
            let col = table.schema().column(c);
            if col.is_numeric() {
                return Ok(None);
            }
            col.vocabulary
                .iter()
                .map(|name| {
                    schema.column(c).category_index(name).map(|i| i as u32).ok_or_else(|| {
                        Error::Audit(format!("category `{name}` of `{}` is unknown to the reference table", col.name))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;
    let rows = table
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&maps)
                .map(|(v, m)| match (v, m) {
                    (Value::Category(k), Some(m)) => Value::Category(m[*k as usize]),
                    _ => *v,
                })
                .collect()
        })
        .collect();
    Table::new(schema.clone(), rows)
}

const SEMANTIC_COLUMNS: [&str; 6] = [
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "sex",
    "relationship",
    "education-num",
];
const STRUCTURAL_COLUMNS: [&str; 6] = [
    "income",
    "marital-status",
    "relationship",
    "education-num",
    "race",
    "native-country",
];

fn applies(table: &Table, columns: &[&str]) -> bool {
    columns.iter().all(|c| table.schema().index_of(c).is_some())
}

#[derive(Clone, Debug)]
pub struct AuditOptions {
    pub strategy: Option<LayoutStrategy>,
    pub seed: u64,
    pub disclosure: bool,
}

/// The whole battery. `test` enables TSTR.
pub fn run_audit(
    real: &Table,
    synth: &Table,
    test: Option<&Table>,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    Ok(AuditReport {
        strategy: opts.strategy,
        real_rows: real.len(),
        synth_rows: synth.len(),
        fidelity: fidelity(real, synth)?,
        semantic: applies(real, &SEMANTIC_COLUMNS).then(|| semantic_check(synth)).transpose()?,
        semantic_real: applies(real, &SEMANTIC_COLUMNS).then(|| semantic_check(real)).transpose()?,
        tstr: test
            .filter(|_| applies(real, &[INCOME_COLUMN]))
            .map(|t| tstr(synth, t, opts.seed))
            .transpose()?,
        disclosure: opts
            .disclosure
            .then(|| disclosure(real, synth, opts.seed))
            .transpose()?,
        structural: applies(real, &STRUCTURAL_COLUMNS)
            .then(|| structural_report(real, synth))
            .transpose()?,
        reference: opts
            .strategy
            .filter(|_| applies(real, &STRUCTURAL_COLUMNS))
            .map(reference_for),
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
    })
}
