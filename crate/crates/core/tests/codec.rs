mod common;

use gridtab::codec::{
    decode_grid, dump_grids, encode_row, fit_codec, grid_to_row, vector_to_grid, BlockKind,
    GRID_HEIGHT, GRID_WIDTH,
};
use gridtab::layout::baseline_layout;
use gridtab::{ColumnSpec, DecodeOptions, Grid, Schema, Table, Value};
use proptest::prelude::*;

use common::*;

fn mixed_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::numeric("n", true, None),
        ColumnSpec::categorical("c", vec!["a".into(), "b".into(), "c".into()]),
        ColumnSpec::numeric("x", false, None),
    ])
    .unwrap()
}

fn mixed_table() -> impl Strategy<Value = Table> {
    proptest::collection::vec((-50i32..50, 0u32..3, -1e3f64..1e3), 2..30).prop_filter_map(
        "numeric columns need spread",
        |rows| {
            let rows: Vec<_> = rows
                .into_iter()
                .map(|(n, c, x)| vec![Value::Number(n as f64), Value::Category(c), Value::Number(x)])
                .collect();
            let t = Table::new(mixed_schema(), rows).ok()?;
            let spread = |c: usize| {
                let v = t.numeric_column(c);
                v.iter().any(|&a| a != v[0])
            };
            (spread(0) && spread(2)).then_some(t)
        },
    )
}

#[test]
fn adult_width_and_padding() {
    let spec = fit_codec(&adult_train()).unwrap();
    assert_eq!(spec.encoded_width(), 106);
    assert!(spec.encoded_width() <= GRID_HEIGHT * GRID_WIDTH);
    let sex = spec.block("sex").unwrap();
    assert_eq!((sex.width, sex.kind), (2, BlockKind::OneHot));
    let layout = baseline_layout(&spec, GRID_HEIGHT, GRID_WIDTH).unwrap();
    assert_eq!(layout.padding_cells().len(), 4);
}

#[test]
fn blocks_tile_the_vector() {
    let spec = fit_codec(&adult_train()).unwrap();
    let mut next = 0;
    for b in spec.blocks() {
        assert_eq!(b.offset, next);
        next += b.width;
    }
    assert_eq!(next, spec.encoded_width());
}

#[test]
fn adult_scaler_values() {
    let t = adult_train();
    let spec = fit_codec(&t).unwrap();
    let s = t.schema();
    let (age, hours) = (s.index_of("age").unwrap(), s.index_of("hours-per-week").unwrap());
    assert_eq!(spec.scale(age, 17.0), 0.0);
    assert_eq!(spec.scale(age, 90.0), 1.0);
    assert!((spec.scale(hours, 40.0) - 39.0 / 98.0).abs() < 1e-15);
    let sex = s.index_of("sex").unwrap();
    let mut row = t.rows()[0].clone();
    row[sex] = Value::Category(s.column(sex).category_index("Male").unwrap() as u32);
    let v = encode_row(&row, &spec).unwrap();
    let b = spec.block("sex").unwrap();
    assert_eq!(&v[b.slots()], &[0.0, 1.0]);
}

#[test]
fn negative_capital_gain_cell_decodes_to_minimum() {
    let t = adult_train();
    let spec = fit_codec(&t).unwrap();
    let layout = baseline_layout(&spec, GRID_HEIGHT, GRID_WIDTH).unwrap();
    let gain = t.schema().index_of("capital-gain").unwrap();
    assert_eq!(t.numeric_column(gain).iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    let mut grid = vector_to_grid(&encode_row(&t.rows()[0], &spec).unwrap(), &layout).unwrap();
    let slot = spec.block("capital-gain").unwrap().offset;
    let cell = layout.slot_cells()[slot];
    let mut values = grid.values.to_vec();
    values[cell] = -1.6;
    grid = Grid::from_values(GRID_HEIGHT, GRID_WIDTH, values).unwrap();
    assert_eq!(grid_to_row(&grid, &layout, &spec)[gain], Value::Number(0.0));
    let raw = decode_grid(&grid, &layout, &spec, DecodeOptions { clamp: false });
    assert!(raw[gain].as_number().unwrap() < 0.0);
}

#[test]
fn affine_endpoints_and_padding() {
    let t = adult_train();
    let spec = fit_codec(&t).unwrap();
    let layout = baseline_layout(&spec, GRID_HEIGHT, GRID_WIDTH).unwrap();
    let ones = vector_to_grid(&vec![1.0; spec.encoded_width()], &layout).unwrap();
    let half = vector_to_grid(&vec![0.5; spec.encoded_width()], &layout).unwrap();
    let zeros = vector_to_grid(&vec![0.0; spec.encoded_width()], &layout).unwrap();
    for &c in layout.slot_cells() {
        assert_eq!((ones.values[c], half.values[c], zeros.values[c]), (1.0, 0.0, -1.0));
    }
    for &c in layout.padding_cells() {
        assert_eq!((ones.values[c], zeros.values[c]), (0.0, 0.0));
    }
    assert!(vector_to_grid(&[0.0; 3], &layout).is_err());
}

#[test]
fn argmax_prefers_first_on_ties() {
    let schema = Schema::new(vec![
        ColumnSpec::numeric("n", false, None),
        ColumnSpec::categorical("c", vec!["p".into(), "q".into()]),
    ])
    .unwrap();
    let t = Table::new(schema, vec![vec![Value::Number(0.0), Value::Category(0)], vec![Value::Number(1.0), Value::Category(1)]]).unwrap();
    let spec = fit_codec(&t).unwrap();
    assert_eq!(spec.decode_vector(&[0.3, 0.2, 0.9], true)[1], Value::Category(1));
    assert_eq!(spec.decode_vector(&[0.3, 0.5, 0.5], true)[1], Value::Category(0));
}

#[test]
fn constant_and_empty_tables_are_rejected() {
    let schema = Schema::new(vec![ColumnSpec::numeric("n", false, None)]).unwrap();
    let t = Table::new(schema.clone(), vec![vec![Value::Number(2.0)]; 3]).unwrap();
    assert!(fit_codec(&t).is_err());
    assert!(fit_codec(&Table::new(schema, vec![]).unwrap()).is_err());
}

#[test]
fn dump_format_has_110_values_per_line() {
    let spec = fit_codec(&adult_train()).unwrap();
    let layout = baseline_layout(&spec, GRID_HEIGHT, GRID_WIDTH).unwrap();
    let g = vector_to_grid(&vec![1.0 / 3.0; spec.encoded_width()], &layout).unwrap();
    let text = dump_grids(&[g.clone(), g]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(' ').count(), 110);
    assert!(lines[0].split(' ').any(|v| v == "-0.333333"));
}

proptest! {
    #[test]
    fn roundtrip_and_range(t in mixed_table()) {
        let spec = fit_codec(&t).unwrap();
        let layout = baseline_layout(&spec, 2, 3).unwrap();
        for row in t.rows() {
            let v = encode_row(row, &spec).unwrap();
            prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
            let g = vector_to_grid(&v, &layout).unwrap();
            prop_assert!(g.values.iter().all(|x| (-1.0..=1.0).contains(x)));
            let back = grid_to_row(&g, &layout, &spec);
            prop_assert_eq!(&back[0], &row[0]);
            prop_assert_eq!(&back[1], &row[1]);
            let (a, b) = (back[2].as_number().unwrap(), row[2].as_number().unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn decode_is_total_and_idempotent(t in mixed_table(), cells in proptest::collection::vec(-3.0f64..3.0, 6)) {
        let spec = fit_codec(&t).unwrap();
        let layout = baseline_layout(&spec, 2, 3).unwrap();
        let g = Grid::from_values(2, 3, cells).unwrap();
        let once = grid_to_row(&g, &layout, &spec);
        let again = grid_to_row(&vector_to_grid(&encode_row(&once, &spec).unwrap(), &layout).unwrap(), &layout, &spec);
        prop_assert_eq!(&once[..2], &again[..2]);
        let (a, b) = (once[2].as_number().unwrap(), again[2].as_number().unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}
