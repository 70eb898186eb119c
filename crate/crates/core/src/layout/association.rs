use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::Table;

/// Symmetric column-by-column association in `[0, 1]` with a unit diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    names: Vec<String>,
    values: Vec<f64>,
}

impl AssociationMatrix {
    /// Build from a full row-major matrix. Symmetry, range and the unit
    /// diagonal are checked.
    pub fn from_values(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = names.len();
        if values.len() != n * n {
            return Err(Error::Layout(format!(
                "association matrix for {n} columns needs {} entries",
                n * n
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::Layout("association diagonal must be 1".into()));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || !(0.0..=1.0).contains(&v) || v != values[j * n + i] {
                    return Err(Error::Layout(format!(
                        "association ({i}, {j}) = {v} is not a symmetric value in [0, 1]"
                    )));
                }
            }
        }
        Ok(AssociationMatrix { names, values })
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.names.len() + j]
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.get(i, j))
    }
}

/// Column values prepared for association scoring.
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<usize>, levels: usize },
}

impl ColumnData {
    fn from_table(table: &Table) -> Vec<ColumnData> {
        table
            .schema()
            .columns()
            .iter()
            .enumerate()
            .map(|(ci, col)| {
                if col.is_numeric() {
                    ColumnData::Numeric(table.numeric_column(ci))
                } else {
                    ColumnData::Categorical {
                        codes: table.category_codes(ci),
                        levels: col.vocabulary.len(),
                    }
                }
            })
            .collect()
    }

    fn is_constant(&self) -> bool {
        match self {
            ColumnData::Numeric(v) => v.iter().all(|&x| x == v[0]),
            ColumnData::Categorical { codes, .. } => codes.iter().all(|&c| c == codes[0]),
        }
    }
}

/// Pairwise association between two non-constant columns.
pub trait AssociationMeasure: Sync {
    fn name(&self) -> &'static str;
    fn pair(&self, a: &ColumnData, b: &ColumnData) -> f64;
}

/// `|r|` for numeric pairs, the correlation ratio η for numeric–categorical
/// pairs and Cramér's V for categorical pairs.
#[derive(Clone, Copy, Debug, Default)]
pub struct MixedAssociation;

/// Largest `|r|` over the 0/1 indicator columns of each side.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxIndicatorPearson;

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

fn correlation_ratio(values: &[f64], codes: &[usize], levels: usize) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut sums = vec![0.0; levels];
    let mut counts = vec![0usize; levels];
    for (&v, &c) in values.iter().zip(codes) {
        sums[c] += v;
        counts[c] += 1;
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &k)| k > 0)
        .map(|(&s, &k)| {
            let m = s / k as f64;
            k as f64 * (m - mean) * (m - mean)
        })
        .sum();
    let total: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if total == 0.0 {
        return 0.0;
    }
    (between / total).sqrt().clamp(0.0, 1.0)
}

fn cramers_v(a: &[usize], la: usize, b: &[usize], lb: usize) -> f64 {
    let mut joint = vec![0usize; la * lb];
    let mut ra = vec![0usize; la];
    let mut rb = vec![0usize; lb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * lb + y] += 1;
        ra[x] += 1;
        rb[y] += 1;
    }
    let n = a.len() as f64;
    let mut chi2 = 0.0;
    for i in 0..la {
        if ra[i] == 0 {
            continue;
        }
        for j in 0..lb {
            if rb[j] == 0 {
                continue;
            }
            let expected = ra[i] as f64 * rb[j] as f64 / n;
            let d = joint[i * lb + j] as f64 - expected;
            chi2 += d * d / expected;
        }
    }
    let ka = ra.iter().filter(|&&k| k > 0).count();
    let kb = rb.iter().filter(|&&k| k > 0).count();
    let k = ka.min(kb);
    if k < 2 {
        return 0.0;
    }
    (chi2 / (n * (k - 1) as f64)).sqrt().clamp(0.0, 1.0)
}

impl AssociationMeasure for MixedAssociation {
    fn name(&self) -> &'static str {
        "mixed (|pearson| / correlation ratio / cramers v)"
    }

    fn pair(&self, a: &ColumnData, b: &ColumnData) -> f64 {
        match (a, b) {
            (ColumnData::Numeric(x), ColumnData::Numeric(y)) => pearson(x, y).abs(),
            (ColumnData::Numeric(x), ColumnData::Categorical { codes, levels })
            | (ColumnData::Categorical { codes, levels }, ColumnData::Numeric(x)) => {
                correlation_ratio(x, codes, *levels)
            }
            (
                ColumnData::Categorical {
                    codes: ca,
                    levels: la,
                },
                ColumnData::Categorical {
                    codes: cb,
                    levels: lb,
                },
            ) => cramers_v(ca, *la, cb, *lb),
        }
    }
}

fn indicators(col: &ColumnData) -> Vec<Vec<f64>> {
    match col {
        ColumnData::Numeric(v) => vec![v.clone()],
        ColumnData::Categorical { codes, levels } => (0..*levels)
            .map(|l| codes.iter().map(|&c| f64::from(c == l)).collect())
            .collect(),
    }
}

impl AssociationMeasure for MaxIndicatorPearson {
    fn name(&self) -> &'static str {
        "max |pearson| over indicator columns"
    }

    fn pair(&self, a: &ColumnData, b: &ColumnData) -> f64 {
        let ia = indicators(a);
        let ib = indicators(b);
        let mut best = 0.0f64;
        for x in &ia {
            for y in &ib {
                best = best.max(pearson(x, y).abs());
            }
        }
        best
    }
}

/// Association matrix under the default [`MixedAssociation`] measure.
pub fn association(table: &Table) -> Result<AssociationMatrix> {
    association_with(table, &MixedAssociation)
}

pub fn association_with(
    table: &Table,
    measure: &dyn AssociationMeasure,
) -> Result<AssociationMatrix> {
    if table.is_empty() {
        return Err(Error::Layout(
            "association needs a nonempty table".into(),
        ));
    }
    let names: Vec<String> = table.schema().names().map(str::to_string).collect();
    let n = names.len();
    let data = ColumnData::from_table(table);
    let constant: Vec<bool> = data.iter().map(ColumnData::is_constant).collect();
    for (name, _) in names.iter().zip(&constant).filter(|(_, &c)| c) {
        log::warn!("column `{name}` has zero variance; its associations are set to 0");
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if constant[i] || constant[j] {
                0.0
            } else {
                measure.pair(&data[i], &data[j])
            }
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (&(i, j), &s) in pairs.iter().zip(&scores) {
        values[i * n + j] = s;
        values[j * n + i] = s;
    }
    AssociationMatrix::from_values(names, values)
}
