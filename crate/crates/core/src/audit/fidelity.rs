//! Column-shape and pairwise-trend similarity.
//!
//! * numeric shape: `1 − KS`, the sup distance between empirical CDFs
//! * categorical shape: `1 − TV`, with `TV = ½ Σ |p − q|` over the union of categories
//! * numeric pair: `1 − |r_real − r_synth| / 2` on Pearson r
//! * any pair with a categorical: `1 − TV` between the normalized contingency
//!   tables, numeric partners cut at the real column's deciles

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::pearson;
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnShape {
    pub column: String,
    pub metric: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTrend {
    pub first: String,
    pub second: String,
    pub metric: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityScores {
    pub column_shapes: Vec<ColumnShape>,
    pub pairs: Vec<PairTrend>,
    /// Pairs left out because a numeric side had zero variance.
    pub skipped_pairs: Vec<(String, String)>,
    pub column_shapes_mean: f64,
    pub pairwise_mean: f64,
    pub overall: f64,
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Audit("KS statistic of an empty column".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(d)
}

pub fn ks_complement(real: &[f64], synth: &[f64]) -> Result<f64> {
    Ok(1.0 - ks_statistic(real, synth)?)
}

/// `½ Σ |p − q|` between two count vectors over the same support.
pub fn total_variation(p: &[usize], q: &[usize]) -> f64 {
    let (sp, sq) = (p.iter().sum::<usize>() as f64, q.iter().sum::<usize>() as f64);
    let tv = 0.5
        * p.iter()
            .zip(q)
            .map(|(&a, &b)| (a as f64 / sp - b as f64 / sq).abs())
            .sum::<f64>();
    tv.clamp(0.0, 1.0)
}

/// `1 − TV` between category frequencies, matched by name.
pub fn tv_complement<S: AsRef<str>>(real: &[S], synth: &[S]) -> Result<f64> {
    if real.is_empty() || synth.is_empty() {
        return Err(Error::Audit("TV distance of an empty column".into()));
    }
    let mut dict = Dictionary::default();
    let r: Vec<u32> = real.iter().map(|s| dict.id(s.as_ref())).collect();
    let s: Vec<u32> = synth.iter().map(|s| dict.id(s.as_ref())).collect();
    Ok(1.0 - total_variation(&counts(&r, dict.len()), &counts(&s, dict.len())))
}

#[derive(Default)]
struct Dictionary {
    ids: HashMap<String, u32>,
}

impl Dictionary {
    fn id(&mut self, name: &str) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(name.to_string()).or_insert(next)
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

fn counts(labels: &[u32], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &l in labels {
        c[l as usize] += 1;
    }
    c
}

fn check_tables(real: &Table, synth: &Table) -> Result<()> {
    if !real.schema().is_compatible(synth.schema()) {
        return Err(Error::Audit(
            "real and synthetic tables have different schemas".into(),
        ));
    }
    if real.is_empty() || synth.is_empty() {
        return Err(Error::Audit("fidelity needs nonempty tables".into()));
    }
    Ok(())
}

fn names(table: &Table, col: usize) -> Vec<&str> {
    table
        .category_codes(col)
        .into_iter()
        .map(|c| table.category_name(col, c))
        .collect()
}

pub fn column_shape_score(real: &Table, synth: &Table, col: usize) -> Result<f64> {
    check_tables(real, synth)?;
    if real.schema().column(col).is_numeric() {
        ks_complement(&real.numeric_column(col), &synth.numeric_column(col))
    } else {
        tv_complement(&names(real, col), &names(synth, col))
    }
}

/// Interior decile edges (linear interpolation), duplicates removed.
pub fn decile_edges(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..10)
        .map(|k| {
            let num = k * (v.len() - 1);
            let (lo, rem) = (num / 10, num % 10);
            if rem == 0 {
                v[lo]
            } else {
                v[lo] + (v[lo + 1] - v[lo]) * (rem as f64 / 10.0)
            }
        })
        .collect();
    edges.dedup();
    edges
}

/// Bin index: the number of edges strictly below `v`.
pub fn decile_bin(edges: &[f64], v: f64) -> u32 {
    edges.partition_point(|&e| e < v) as u32
}

fn labels(real: &Table, synth: &Table, col: usize) -> (Vec<u32>, Vec<u32>, usize) {
    if real.schema().column(col).is_numeric() {
        let edges = decile_edges(&real.numeric_column(col));
        let bin = |t: &Table| {
            t.numeric_column(col)
                .into_iter()
                .map(|v| decile_bin(&edges, v))
                .collect::<Vec<_>>()
        };
        (bin(real), bin(synth), edges.len() + 1)
    } else {
        let mut dict = Dictionary::default();
        let r = names(real, col).into_iter().map(|s| dict.id(s)).collect();
        let s = names(synth, col).into_iter().map(|s| dict.id(s)).collect();
        (r, s, dict.len())
    }
}

fn has_variance(v: &[f64]) -> bool {
    v.iter().any(|x| *x != v[0])
}

/// `None` when a numeric side has zero variance in either table.
pub fn pairwise_correlation_score(
    real: &Table,
    synth: &Table,
    i: usize,
    j: usize,
) -> Result<Option<f64>> {
    check_tables(real, synth)?;
    let schema = real.schema();
    let (ci, cj) = (schema.column(i), schema.column(j));
    for (c, idx) in [(ci, i), (cj, j)] {
        if c.is_numeric()
            && !(has_variance(&real.numeric_column(idx)) && has_variance(&synth.numeric_column(idx)))
        {
            log::warn!("skipping pairs with zero-variance column `{}`", c.name);
            return Ok(None);
        }
    }
    if ci.is_numeric() && cj.is_numeric() {
        let rr = pearson(&real.numeric_column(i), &real.numeric_column(j));
        let rs = pearson(&synth.numeric_column(i), &synth.numeric_column(j));
        return Ok(Some(1.0 - (rr - rs).abs() / 2.0));
    }
    let (ri, si, ki) = labels(real, synth, i);
    let (rj, sj, kj) = labels(real, synth, j);
    let joint = |a: &[u32], b: &[u32]| {
        let mut c = vec![0usize; ki * kj];
        for (&x, &y) in a.iter().zip(b) {
            c[x as usize * kj + y as usize] += 1;
        }
        c
    };
    Ok(Some(1.0 - total_variation(&joint(&ri, &rj), &joint(&si, &sj))))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn fidelity(real: &Table, synth: &Table) -> Result<FidelityScores> {
    check_tables(real, synth)?;
    let schema = real.schema();
    let k = schema.len();
    let column_shapes = (0..k)
        .into_par_iter()
        .map(|c| {
            let col = schema.column(c);
            Ok(ColumnShape {
                column: col.name.clone(),
                metric: if col.is_numeric() { "KSComplement" } else { "TVComplement" }.into(),
                score: column_shape_score(real, synth, c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pair_idx: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let scored = pair_idx
        .par_iter()
        .map(|&(i, j)| pairwise_correlation_score(real, synth, i, j).map(|s| (i, j, s)))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut skipped_pairs = Vec::new();
    for (i, j, s) in scored {
        let (a, b) = (schema.column(i), schema.column(j));
        match s {
            Some(score) => pairs.push(PairTrend {
                first: a.name.clone(),
                second: b.name.clone(),
                metric: if a.is_numeric() && b.is_numeric() {
                    "CorrelationSimilarity"
                } else {
                    "ContingencySimilarity"
                }
                .into(),
                score,
            }),
            None => skipped_pairs.push((a.name.clone(), b.name.clone())),
        }
    }
    let column_shapes_mean = mean(column_shapes.iter().map(|c| c.score));
    let pairwise_mean = mean(pairs.iter().map(|p| p.score));
    Ok(FidelityScores {
        overall: (column_shapes_mean + pairwise_mean) / 2.0,
        column_shapes,
        pairs,
        skipped_pairs,
        column_shapes_mean,
        pairwise_mean,
    })
}
