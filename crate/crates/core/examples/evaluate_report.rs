//! Metrics arithmetic on hand-made confusion counts: rounding, the
//! undefined-ratio flag, CSV records and the grouped comparison table.
//!
//! cargo run --example evaluate_report

use siamese_reid::eval::{compare, metrics, parse_records, Confusion, MetricsReport};

fn main() -> siamese_reid::Result<()> {
    let rows = [
        ("car", 3, 5, Confusion { tp: 858, fp: 142, fn_: 64, tn: 4500 }),
        ("plate", 3, 5, Confusion { tp: 759, fp: 241, fn_: 169, tn: 4400 }),
        ("two-stream", 3, 5, Confusion { tp: 927, fp: 73, fn_: 70, tn: 4600 }),
        ("untrained", 3, 5, Confusion { tp: 0, fp: 0, fn_: 997, tn: 4985 }),
    ];
    let reports: Vec<MetricsReport> = rows.iter().map(|(m, n, l, c)| MetricsReport::new(*m, *n, *l, *c)).collect();
    let cmp = compare(&reports)?;
    println!("{}", cmp.text);
    println!("{}", cmp.records);
    assert_eq!(parse_records(&cmp.records)?, reports);

    // more negatives raise accuracy but leave F alone
    let base = rows[2].3;
    for extra in [0, 10_000, 100_000] {
        let m = metrics(&Confusion { tn: base.tn + extra, ..base });
        println!("tn = {:>6}: F {}  A {}", base.tn + extra, m.f_measure, m.accuracy);
    }
    Ok(())
}
