mod common;

use common::tables::{confusion_for, BACKBONE_ROWS, STREAM_ROWS};
use common::rng;
use proptest::prelude::*;
use rand::Rng;
use siamese_reid::eval::*;

/// Half-up rounding to tenths via quotient and remainder.
fn oracle_tenths(num: u64, den: u64) -> u32 {
    let (q, rem) = ((1000 * num) / den, (1000 * num) % den);
    (q + u64::from(2 * rem >= den)) as u32
}

#[test]
fn reference_f_values_follow_from_p_and_r() {
    for (model, _, _, p, r, f, a) in STREAM_ROWS.iter().chain(&BACKBONE_ROWS) {
        let m = metrics(&confusion_for(*p, *r, *a));
        assert_eq!((m.precision.tenths, m.recall.tenths), (*p, *r), "{model}");
        assert!(m.f_measure.tenths.abs_diff(*f) <= 1, "{model}: F {} vs {}", m.f_measure, f);
    }
}

#[test]
fn random_confusions_match_oracle() {
    let mut r = rng(0);
    for _ in 0..1000 {
        let c = Confusion {
            tp: r.random_range(0..5000),
            fp: r.random_range(0..5000),
            fn_: r.random_range(0..5000),
            tn: r.random_range(0..50_000),
        };
        let m = metrics(&c);
        let check = |p: Percent, num: u64, den: u64| {
            if den == 0 {
                assert!(p.degenerate && p.tenths == 0);
            } else {
                assert_eq!(p.tenths, oracle_tenths(num, den), "{c:?}");
            }
        };
        check(m.precision, c.tp, c.tp + c.fp);
        check(m.recall, c.tp, c.tp + c.fn_);
        check(m.accuracy, c.tp + c.tn, c.total());
        if c.tp == 0 {
            assert!(m.f_measure.degenerate);
        } else {
            check(m.f_measure, 2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        }
    }
}

#[test]
fn accuracy_grows_with_negatives_while_f_stays() {
    let base = Confusion { tp: 90, fp: 10, fn_: 15, tn: 100 };
    let mut last = metrics(&base);
    for extra in [500, 5000, 50_000] {
        let m = metrics(&Confusion { tn: base.tn + extra, ..base });
        assert_eq!(m.f_measure, last.f_measure);
        assert!(m.accuracy > last.accuracy);
        last = m;
    }
    assert!(last.accuracy > last.f_measure);
}

#[test]
fn reference_block_renders_in_order() {
    let reports: Vec<MetricsReport> = STREAM_ROWS[3..]
        .iter()
        .map(|(m, n, l, p, r, _, a)| MetricsReport::new(*m, *n, *l, confusion_for(*p, *r, *a)))
        .collect();
    let out = compare(&reports).unwrap();
    let lines: Vec<&str> = out.text.lines().collect();
    assert_eq!(lines[0], "N = 10, λ = 10");
    for (line, row) in lines[2..5].iter().zip(&STREAM_ROWS[3..]) {
        let cell = line.split_whitespace().nth(3).unwrap().trim_end_matches('%');
        let tenths: u32 = cell.replace('.', "").parse().unwrap();
        assert!(tenths.abs_diff(row.5) <= 1, "{line}");
    }
    assert_eq!(parse_records(&out.records).unwrap(), reports);

    let single = compare(&reports[..1]).unwrap();
    assert_eq!(single.text.lines().count(), 3);
}

proptest! {
    #[test]
    fn f_lies_between_p_and_r(tp in 1u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000, tn in 0u64..100_000) {
        let m = metrics(&Confusion { tp, fp, fn_, tn });
        let (lo, hi) = (m.precision.min(m.recall), m.precision.max(m.recall));
        // each side is rounded separately, so allow one tenth of slack
        prop_assert!(m.f_measure.tenths + 1 >= lo.tenths && m.f_measure.tenths <= hi.tenths + 1);
        prop_assert!(m.accuracy.tenths <= 1000);
    }

    #[test]
    fn records_roundtrip(rows in prop::collection::vec(("[a-z][a-z0-9 ,\"-]{0,12}", 1usize..20, 1usize..20, 0u64..500, 0u64..500, 0u64..500, 0u64..500), 1..6)) {
        let reports: Vec<MetricsReport> = rows
            .into_iter()
            .map(|(name, n, l, tp, fp, fn_, tn)| MetricsReport::new(name, n, l, Confusion { tp, fp, fn_, tn }))
            .filter(|r| r.confusion.total() > 0)
            .collect();
        prop_assert_eq!(parse_records(&report_records(&reports)).unwrap(), reports);
    }
}
