mod common;

use grand_core::classify::{Head, Mlp};
use grand_core::eval::{accuracy, macro_f1, micro_f1, weight_group_analysis};
use grand_core::represent::Segment;
use proptest::prelude::*;

#[test]
fn metrics_match_counting_oracle() {
    println!("{}", common::metric_oracle().unwrap());
}

#[test]
fn hand_counted_example() {
    let (a, b) = (0, 1);
    let pred = vec![vec![a], vec![a], vec![b], vec![b]];
    let gold = vec![vec![a], vec![b], vec![b], vec![b]];
    assert_eq!(accuracy(&pred, &gold), 0.75);
    assert_eq!(micro_f1(&pred, &gold, 2), 0.75);
    assert!((macro_f1(&pred, &gold, 2) - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
}

fn sets(k: usize) -> impl Strategy<Value = Vec<(Vec<usize>, Vec<usize>)>> {
    let set = prop::collection::btree_set(0..k, 0..=k).prop_map(|s| s.into_iter().collect::<Vec<_>>());
    prop::collection::vec((set.clone(), set), 0..60)
}

fn segments(widths: &[usize]) -> Vec<Segment> {
    let mut offset = 0;
    widths
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            let s = Segment { name: format!("s{i}"), offset, len };
            offset += len;
            s
        })
        .collect()
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_order_free(rows in sets(6), rot in 0usize..60) {
        let (pred, gold): (Vec<_>, Vec<_>) = rows.iter().cloned().unzip();
        let m = (accuracy(&pred, &gold), micro_f1(&pred, &gold, 6), macro_f1(&pred, &gold, 6));
        for v in [m.0, m.1, m.2] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let mut turned = rows.clone();
        if !turned.is_empty() {
            let r = rot % turned.len();
            turned.rotate_left(r);
        }
        let (p2, g2): (Vec<_>, Vec<_>) = turned.into_iter().unzip();
        prop_assert_eq!(m, (accuracy(&p2, &g2), micro_f1(&p2, &g2, 6), macro_f1(&p2, &g2, 6)));
        prop_assert_eq!(m, common::oracle_metrics(&pred, &gold, 6));
    }

    #[test]
    fn weight_shares_sum_to_one_and_ignore_scale(
        widths in prop::collection::vec(1usize..5, 1..5),
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
    ) {
        let segs = segments(&widths);
        let dim: usize = widths.iter().sum();
        let mut m = Mlp::new(dim, &[6], 3, Head::Softmax, seed, 1.0);
        let before = weight_group_analysis(&m, &segs, 1).unwrap();
        prop_assert!((before.fractions.values().sum::<f64>() - 1.0).abs() <= 1e-9);
        m.layers[0].weights.mapv_inplace(|w| w * scale);
        let after = weight_group_analysis(&m, &segs, 1).unwrap();
        for (k, v) in &before.fractions {
            prop_assert!((v - after.fractions[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn zeroed_segment_reports_nothing() {
    let segs = segments(&[2, 3]);
    let mut m = Mlp::new(5, &[4], 2, Head::Softmax, 1, 1.0);
    for r in 0..2 {
        m.layers[0].weights.row_mut(r).fill(0.0);
    }
    let w = weight_group_analysis(&m, &segs, 1).unwrap();
    assert_eq!(w.fraction("s0"), Some(0.0));
    assert_eq!(w.fraction("s1"), Some(1.0));
}
