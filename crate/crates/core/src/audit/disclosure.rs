use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::align_to;
use crate::codec::fit_codec;
use crate::diffusion::{stream, Purpose};
use crate::error::{Error, Result};
use crate::table::Table;

/// Real rows whose leave-one-out distance enters the reference median.
pub const LOO_REFERENCE_ROWS: usize = 1000;

pub const DISCLOSURE_DEFINITION: &str = "median synthetic DCR / median real leave-one-out \
nearest-neighbour distance, clipped to [0, 1]; Euclidean distance in the [0, 1] encoded \
feature space of a codec fitted on the real table";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisclosureReport {
    #[serde(default, skip_serializing)]
    pub dcr: Vec<f64>,
    pub min: f64,
    pub median: f64,
    pub real_loo_median: f64,
    pub real_loo_rows: usize,
    pub score: f64,
    pub definition: String,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Nearest squared distance from `q` to any row of `data`, skipping `skip`.
fn nearest(q: &[f64], data: &[f64], dim: usize, skip: Option<usize>) -> f64 {
    let mut best = f64::INFINITY;
    for (i, r) in data.chunks(dim).enumerate() {
        if Some(i) == skip {
            continue;
        }
        let mut d = 0.0;
        for (a, b) in q.iter().zip(r) {
            d += (a - b) * (a - b);
            if d >= best {
                break;
            }
        }
        if d < best {
            best = d;
            if d == 0.0 {
                break;
            }
        }
    }
    best
}

pub fn disclosure(real: &Table, synth: &Table, seed: u64) -> Result<DisclosureReport> {
    if real.len() < 2 {
        return Err(Error::Audit("disclosure needs at least 2 real rows".into()));
    }
    if synth.is_empty() {
        return Err(Error::Audit("disclosure needs synthetic rows".into()));
    }
    if !real.schema().is_compatible(synth.schema()) {
        return Err(Error::Audit(
            "real and synthetic tables have different schemas".into(),
        ));
    }
    let codec = fit_codec(real)?;
    let dim = codec.encoded_width();
    let real_x = codec.encode_table(real)?;
    let synth_x = codec.encode_table(&align_to(synth, real.schema())?)?;

    let dcr: Vec<f64> = synth_x
        .par_chunks(dim)
        .map(|q| nearest(q, &real_x, dim, None).sqrt())
        .collect();
    let k = LOO_REFERENCE_ROWS.min(real.len());
    let mut picks = index::sample(&mut stream(seed, Purpose::Sample, u64::MAX, 0, 0), real.len(), k)
        .into_vec();
    picks.sort_unstable();
    let loo: Vec<f64> = picks
        .par_iter()
        .map(|&i| nearest(&real_x[i * dim..(i + 1) * dim], &real_x, dim, Some(i)).sqrt())
        .collect();
    let (m_s, m_r) = (median(&dcr), median(&loo));
    let score = if m_r > 0.0 {
        (m_s / m_r).clamp(0.0, 1.0)
    } else if m_s == 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(DisclosureReport {
        min: dcr.iter().copied().fold(f64::INFINITY, f64::min),
        median: m_s,
        real_loo_median: m_r,
        real_loo_rows: k,
        score,
        definition: DISCLOSURE_DEFINITION.into(),
        dcr,
    })
}
