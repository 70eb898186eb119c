//! Two-column fixture: a bimodal numeric and a binary categorical.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::diffusion::{stream, Purpose};
use crate::error::Result;
use crate::schema::{ColumnSpec, Schema};
use crate::table::{Row, Table, Value};

pub const TOY_ROWS: usize = 500;
/// Share of rows with `flag = yes`.
pub const TOY_YES_SHARE: f64 = 0.3;

pub fn toy_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::numeric("x", false, None),
        ColumnSpec::categorical("flag", vec!["no".into(), "yes".into()]),
    ])
    .expect("toy schema is valid")
}

/// `x` ~ ½N(−2, 0.5²) + ½N(3, 0.5²); `flag` independent Bernoulli.
pub fn toy_table(rows: usize, seed: u64) -> Result<Table> {
    let mut rng = stream(seed, Purpose::Init, 0xA11CE, 0, 0);
    let lo = Normal::new(-2.0, 0.5).unwrap();
    let hi = Normal::new(3.0, 0.5).unwrap();
    let data: Vec<Row> = (0..rows)
        .map(|_| {
            let x: f64 = if rng.random_bool(0.5) {
                lo.sample(&mut rng)
            } else {
                hi.sample(&mut rng)
            };
            let flag = rng.random_bool(TOY_YES_SHARE) as u32;
            // rounded so the CSV round trip is exact
            vec![Value::Number((x * 1e4).round() / 1e4), Value::Category(flag)]
        })
        .collect();
    Table::new(toy_schema(), data)
}
