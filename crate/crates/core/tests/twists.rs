use num_bigint::BigInt;
use proptest::prelude::*;

use twosel::curve::{twist, FullTwoTorsionModel};
use twosel::selmer::{selmer_group, SelmerSpec};
use twosel::twist_lab::{parity_check, rank_of_twist, scan, squarefree_range};
use twosel::zarith::is_squarefree;

fn model(e: [i64; 3]) -> FullTwoTorsionModel {
    FullTwoTorsionModel::from_i64(e).unwrap()
}

fn squarefree() -> impl Strategy<Value = BigInt> {
    (1i64..400, any::<bool>())
        .prop_map(|(n, neg)| BigInt::from(if neg { -n } else { n }))
        .prop_filter("squarefree", |d| is_squarefree(d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masked_base_matches_twisted_model(
        e in prop::sample::select(vec![[-1, 0, 1], [0, 1, 5], [-3, 0, 2], [0, 4, 7]]),
        d in squarefree(),
    ) {
        let m = model(e);
        let direct = selmer_group(&SelmerSpec::new(twist(&m, &d).unwrap())).unwrap().dim();
        prop_assert_eq!(rank_of_twist(&m, &d).unwrap(), direct);
    }

    #[test]
    fn parity_identity(
        e in prop::sample::select(vec![[-1, 0, 1], [0, 1, 5], [-2, 1, 6]]),
        d in squarefree(),
    ) {
        let p = parity_check(&model(e), &d).unwrap();
        prop_assert!(p.equal, "{:?}", p);
    }
}

#[test]
fn scan_summary_is_consistent() {
    let m = model([0, 1, 5]);
    let (records, summary) = scan(&m, 150, false).unwrap();
    assert_eq!(records.len(), squarefree_range(1, 150).len());
    assert_eq!(summary.records_count, records.len());
    assert_eq!(summary.rank_histogram.values().sum::<usize>(), records.len());
    assert!(summary.parity_failures.is_empty());
    assert!(summary.passed());
    let max = records.iter().map(|r| r.rank).max();
    assert_eq!(summary.r_max, max);
}

#[test]
fn twisting_twice_returns_base_rank() {
    let m = model([-1, 0, 1]);
    for d in [-7i64, 5, 17, 34] {
        let d = BigInt::from(d);
        let t = twist(&m, &d).unwrap();
        let back = selmer_group(&SelmerSpec::new(twist(&t, &d).unwrap())).unwrap().dim();
        assert_eq!(back, 2);
    }
}
