mod common;

use gridtab::codec::{fit_codec, GRID_HEIGHT, GRID_WIDTH};
use gridtab::layout::{
    association, association_with, average_linkage_order, baseline_layout, clustered_layout,
    manual_layout, pearson, AssociationMatrix, MaxIndicatorPearson, Traversal,
};
use gridtab::{CodecSpec, ColumnSpec, Layout, PlacementPlan, Schema, Table, Value};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn manual_plan() -> PlacementPlan {
    PlacementPlan::from_path(&repo().join("layouts/adult_manual.toml")).unwrap()
}

fn adult_layouts() -> (CodecSpec, [Layout; 3]) {
    let t = adult_train();
    let spec = fit_codec(&t).unwrap();
    let b = baseline_layout(&spec, GRID_HEIGHT, GRID_WIDTH).unwrap();
    let c = clustered_layout(&spec, &association(&t).unwrap(), GRID_HEIGHT, GRID_WIDTH).unwrap();
    let m = manual_layout(&spec, &manual_plan(), GRID_HEIGHT, GRID_WIDTH).unwrap();
    (spec, [b, c, m])
}

fn chebyshev(l: &Layout, a: usize, b: usize) -> usize {
    let (ra, ca) = (a / l.width(), a % l.width());
    let (rb, cb) = (b / l.width(), b % l.width());
    ra.abs_diff(rb).max(ca.abs_diff(cb))
}

/// Spec with categorical blocks of the given widths (numeric when width is 1).
fn spec_from_widths(widths: &[usize]) -> CodecSpec {
    let columns: Vec<ColumnSpec> = widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if w == 1 {
                ColumnSpec::numeric(format!("c{i}"), false, None)
            } else {
                ColumnSpec::categorical(format!("c{i}"), (0..w).map(|k| format!("v{k}")).collect())
            }
        })
        .collect();
    let schema = Schema::new(columns).unwrap();
    let rows = (0..2)
        .map(|r| {
            widths
                .iter()
                .map(|&w| if w == 1 { Value::Number(r as f64) } else { Value::Category(0) })
                .collect()
        })
        .collect();
    fit_codec(&Table::new(schema, rows).unwrap()).unwrap()
}

#[test]
fn baseline_small_grid() {
    let spec = spec_from_widths(&[1, 2]);
    let l = baseline_layout(&spec, 1, 5).unwrap();
    assert_eq!(l.slot_cells(), [0, 1, 2]);
    assert_eq!(l.padding_cells(), [3, 4]);
    assert!(baseline_layout(&spec_from_widths(&[4, 3]), 2, 3).is_err());
}

#[test]
fn adult_layouts_are_valid_and_distinct() {
    let (spec, layouts) = adult_layouts();
    for l in &layouts {
        l.validate(&spec).unwrap();
        assert_eq!(l.padding_cells().len(), 4);
    }
    let [b, c, m] = &layouts;
    assert_eq!(b.column_order()[0], "age");
    assert_eq!(b.slot_cells()[0], 0);
    assert_ne!(m.slot_cells(), b.slot_cells());
    assert_ne!(m.slot_cells(), c.slot_cells());
    assert_ne!(b.slot_cells(), c.slot_cells());
}

#[test]
fn education_pairs_are_strongly_associated_and_neighbours() {
    let t = adult_train();
    let a = association(&t).unwrap();
    assert!(a.by_name("education", "education-num").unwrap() > 0.9);
    let (_, [_, c, _]) = adult_layouts();
    let order = c.column_order();
    let i = order.iter().position(|n| n == "education").unwrap();
    let j = order.iter().position(|n| n == "education-num").unwrap();
    assert_eq!(i.abs_diff(j), 1);
}

#[test]
fn indicator_measure_matches_direct_pearson() {
    let t = adult_train();
    let a = association_with(&t, &MaxIndicatorPearson).unwrap();
    let s = t.schema();
    let (sex, age) = (s.index_of("sex").unwrap(), s.index_of("age").unwrap());
    let ages = t.numeric_column(age);
    let best = (0..2)
        .map(|k| {
            let ind: Vec<f64> = t.category_codes(sex).iter().map(|&c| (c == k) as u8 as f64).collect();
            pearson(&ind, &ages).abs()
        })
        .fold(0.0, f64::max);
    assert!((a.by_name("sex", "age").unwrap() - best).abs() < 1e-12);
}

#[test]
fn independent_coins_are_unassociated() {
    let schema = Schema::new(vec![
        ColumnSpec::categorical("a", vec!["h".into(), "t".into()]),
        ColumnSpec::categorical("b", vec!["h".into(), "t".into()]),
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rows = (0..10_000)
        .map(|_| vec![Value::Category(rng.random_range(0..2)), Value::Category(rng.random_range(0..2))])
        .collect();
    let t = Table::new(schema, rows).unwrap();
    let a = association(&t).unwrap();
    assert_eq!(a.get(0, 0), 1.0);
    assert!(a.get(0, 1) < 0.05);
    assert_eq!(a.get(0, 1), a.get(1, 0));
}

#[test]
fn single_merge_dendrogram_keeps_pair_together() {
    let a = AssociationMatrix::from_values(
        vec!["A".into(), "C".into(), "B".into()],
        vec![1.0, 0.1, 0.9, 0.1, 1.0, 0.1, 0.9, 0.1, 1.0],
    )
    .unwrap();
    let (order, merges) = average_linkage_order(&a);
    let pa = order.iter().position(|&i| i == 0).unwrap();
    let pb = order.iter().position(|&i| i == 2).unwrap();
    assert_eq!(pa.abs_diff(pb), 1);
    assert_eq!(merges.len(), 2);
    assert_eq!(average_linkage_order(&a).0, order);
}

#[test]
fn manual_plan_places_sex_next_to_relationship() {
    let (spec, [_, _, m]) = adult_layouts();
    let sex = spec.block("sex").unwrap();
    let rel = spec.block("relationship").unwrap();
    let last_sex = m.slot_cells()[sex.offset + sex.width - 1];
    let first_rel = m.slot_cells()[rel.offset];
    assert_eq!(chebyshev(&m, last_sex, first_rel), 1);
}

#[test]
fn plan_must_list_every_column_once() {
    let spec = fit_codec(&adult_train()).unwrap();
    let mut plan = manual_plan();
    for g in &mut plan.groups {
        g.columns.retain(|c| c != "race");
    }
    assert!(manual_layout(&spec, &plan, GRID_HEIGHT, GRID_WIDTH).is_err());
    let mut plan = manual_plan();
    plan.groups[0].columns.push("age".into());
    assert!(manual_layout(&spec, &plan, GRID_HEIGHT, GRID_WIDTH).is_err());
    let roundtrip = PlacementPlan::parse(&manual_plan().to_toml()).unwrap();
    assert_eq!(roundtrip, manual_plan());
}

#[test]
fn snake_layouts_keep_block_cells_touching() {
    let (spec, [_, c, m]) = adult_layouts();
    for l in [&c, &m] {
        assert_eq!(l.traversal(), Traversal::Snake);
        for b in spec.blocks() {
            for s in b.offset + 1..b.offset + b.width {
                assert_eq!(chebyshev(l, l.slot_cells()[s - 1], l.slot_cells()[s]), 1, "{}", b.column_name);
            }
        }
    }
}

fn block_widths() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..6, 1..12)
}

proptest! {
    #[test]
    fn every_strategy_yields_a_valid_layout(widths in block_widths(), h in 3usize..8, w in 3usize..8, seed in any::<u64>()) {
        let spec = spec_from_widths(&widths);
        prop_assume!(spec.encoded_width() <= h * w);
        let n = widths.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![1.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(0.0..1.0);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        let names = (0..n).map(|i| format!("c{i}")).collect();
        let assoc = AssociationMatrix::from_values(names, values).unwrap();
        let clustered = clustered_layout(&spec, &assoc, h, w).unwrap();
        prop_assert_eq!(&clustered, &clustered_layout(&spec, &assoc, h, w).unwrap());
        let mut order: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        order.reverse();
        let plan = PlacementPlan::parse(&format!("[[group]]\nname = \"all\"\ncolumns = {order:?}\n")).unwrap();
        for l in [
            baseline_layout(&spec, h, w).unwrap(),
            clustered,
            manual_layout(&spec, &plan, h, w).unwrap(),
        ] {
            prop_assert!(l.validate(&spec).is_ok());
            let cells = l.traversal().cells(h, w);
            prop_assert_eq!(l.padding_cells(), &cells[spec.encoded_width()..]);
            if l.traversal() == Traversal::Snake {
                for b in spec.blocks() {
                    for s in b.offset + 1..b.offset + b.width {
                        prop_assert_eq!(chebyshev(&l, l.slot_cells()[s - 1], l.slot_cells()[s]), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn permuting_schema_permutes_baseline(widths in block_widths()) {
        let spec = spec_from_widths(&widths);
        prop_assume!(spec.encoded_width() <= 110);
        let mut rev = widths.clone();
        rev.reverse();
        let rspec = spec_from_widths(&rev);
        let a = baseline_layout(&spec, GRID_HEIGHT, GRID_WIDTH).unwrap();
        let b = baseline_layout(&rspec, GRID_HEIGHT, GRID_WIDTH).unwrap();
        let cells_of = |s: &CodecSpec, l: &Layout, i: usize| -> Vec<usize> {
            s.blocks()[i].slots().map(|k| l.slot_cells()[k]).collect()
        };
        let n = widths.len();
        let mut cursor = 0;
        for i in (0..n).rev() {
            let w = widths[i];
            let got = cells_of(&rspec, &b, n - 1 - i);
            prop_assert_eq!(got, (cursor..cursor + w).collect::<Vec<_>>());
            cursor += w;
        }
        prop_assert_eq!(cells_of(&spec, &a, 0), (0..widths[0]).collect::<Vec<_>>());
    }
}
