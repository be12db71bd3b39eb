mod common;

use argchat_core::analysis::{chi_square, chi_square_with, format_p, intention_change_significance, ContingencyTable};
use argchat_core::dialogue::Variant;
use argchat_core::stats::chi_square_sf;
use argchat_core::{fixtures, ConcernLabel};
use proptest::prelude::*;

const GRID_STATS: [f64; 5] = [0.5, 1.0, 4.0, 10.0, 25.0];
const GRID_DF: [u32; 3] = [1, 2, 5];

#[test]
fn tail_matches_quadrature_on_grid() {
    for &x in &GRID_STATS {
        for &k in &GRID_DF {
            let ours = chi_square_sf(x, k);
            let oracle = common::chi_square_tail_quadrature(x, k);
            assert!((ours - oracle).abs() < 1e-6, "x={x} df={k}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn quadrature_oracle_is_sane() {
    // df = 2 has the closed form exp(-x/2).
    for x in [0.5, 4.0, 25.0] {
        assert!((common::chi_square_tail_quadrature(x, 2) - (-x / 2.0f64).exp()).abs() < 1e-9);
    }
    assert!((common::chi_square_tail_quadrature(0.0, 5) - 1.0).abs() < 1e-9);
}

#[test]
fn published_intention_changes_reproduce() {
    let entries = intention_change_significance(&fixtures::study_counts()).unwrap();
    let got: Vec<(Variant, ConcernLabel, String)> =
        entries.iter().map(|e| (e.variant, e.group, format_p(e.result.as_ref().unwrap().p_value))).collect();
    use ConcernLabel::*;
    assert_eq!(
        got,
        vec![
            (Variant::I, Health, "<0.001".into()),
            (Variant::I, Environment, "0.278".into()),
            (Variant::I, Both, "0.001".into()),
            (Variant::II, Health, "0.022".into()),
            (Variant::II, Environment, "0.039".into()),
            (Variant::II, Both, "0.002".into()),
        ]
    );
    assert_eq!(entries[0].table, ContingencyTable::from_2x2(5, 22, 17, 9));
    assert_eq!(entries[2].table, ContingencyTable::from_2x2(12, 38, 28, 22));
}

#[test]
fn empty_arm_yields_no_test_instead_of_error() {
    let mut counts = fixtures::study_counts();
    for arm in &mut counts.arms {
        arm.better = 0;
    }
    let entries = intention_change_significance(&counts).unwrap();
    assert!(entries.iter().all(|e| e.result.is_none()));
}

#[test]
fn yates_correction_would_break_the_published_values() {
    // Corrected, Variant I Both would not round to 0.001.
    let t = ContingencyTable::from_2x2(12, 38, 28, 22);
    let p = chi_square_with(&t, true).unwrap().p_value;
    assert_ne!(format_p(p), "0.001");
}

#[test]
fn type_preference_groups_all_significant() {
    let table = common::type_evaluation_table();
    assert_eq!(table.contingency(ConcernLabel::Health).unwrap(), ContingencyTable::from_2x2(120, 48, 70, 266));
    for label in [ConcernLabel::Health, ConcernLabel::Environment, ConcernLabel::Both] {
        let r = chi_square(&table.contingency(label).unwrap()).unwrap();
        assert!(r.p_value < 0.001, "{label:?}: {}", r.p_value);
    }
    assert!(table.contingency(ConcernLabel::Unlabeled).is_none());
}

fn table_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..5, 2usize..5).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(1u64..60, c), r))
}

proptest! {
    #[test]
    fn statistic_matches_definition(rows in table_strategy()) {
        let t = ContingencyTable::new(rows.clone()).unwrap();
        let r = chi_square(&t).unwrap();
        let hand = common::pearson_by_hand(&rows);
        prop_assert!((r.statistic - hand).abs() <= 1e-9 * hand.max(1.0));
        prop_assert_eq!(r.df as usize, (rows.len() - 1) * (rows[0].len() - 1));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn transpose_and_scale_behave(rows in table_strategy(), k in 2u64..5) {
        let t = ContingencyTable::new(rows).unwrap();
        let r = chi_square(&t).unwrap();
        let rt = chi_square(&t.transposed()).unwrap();
        prop_assert!((r.statistic - rt.statistic).abs() <= 1e-9 * r.statistic.max(1.0));
        let rs = chi_square(&t.scaled(k)).unwrap();
        prop_assert!((rs.statistic - k as f64 * r.statistic).abs() <= 1e-8 * rs.statistic.max(1.0));
    }
}
