//! Confusion counts and percentage metrics. Percentages are exact rationals
//! rounded half-up to tenths, so no floating point enters the reports.

use std::fmt;

use crate::error::{Error, Result};
use crate::siamese::{MatchLabel, PairSample, SiameseModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: MatchLabel, truth: MatchLabel) {
        match (predicted.is_matching(), truth.is_matching()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Count `(predicted, truth)` pairs with "matching" as the positive class.
pub fn confusion(decisions: impl IntoIterator<Item = (MatchLabel, MatchLabel)>) -> Result<Confusion> {
    let mut c = Confusion::default();
    for (predicted, truth) in decisions {
        c.record(predicted, truth);
    }
    if c.total() == 0 {
        return Err(Error::Parameter("cannot summarize an empty decision list".into()));
    }
    Ok(c)
}

/// Run inference over `samples` and tally the decisions.
pub fn evaluate(model: &SiameseModel, samples: &[PairSample]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for s in samples {
        c.record(model.predict(s)?.label, s.label);
    }
    if c.total() == 0 {
        return Err(Error::Parameter("cannot evaluate on an empty pair set".into()));
    }
    Ok(c)
}

/// A percentage held as integer tenths. `degenerate` marks an undefined
/// ratio that was reported as 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent {
    pub tenths: u32,
    pub degenerate: bool,
}

impl Percent {
    /// `num / den` as a percentage, rounded half-up to 0.1.
    pub fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            return Percent {
                tenths: 0,
                degenerate: true,
            };
        }
        let (num, den) = (num as u128, den as u128);
        Percent {
            tenths: ((2000 * num + den) / (2 * den)) as u32,
            degenerate: false,
        }
    }

    pub fn value(self) -> f64 {
        self.tenths as f64 / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.tenths / 10, self.tenths % 10)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Metrics {
    pub precision: Percent,
    pub recall: Percent,
    pub f_measure: Percent,
    pub accuracy: Percent,
}

impl Metrics {
    pub fn degenerate(&self) -> bool {
        self.precision.degenerate || self.recall.degenerate || self.f_measure.degenerate
    }
}

/// Precision, recall, F-measure and accuracy. F is the harmonic mean of the
/// unrounded P and R, i.e. `2tp / (2tp + fp + fn)`; it is degenerate when
/// `tp = 0` because then `P + R = 0`.
pub fn metrics(c: &Confusion) -> Metrics {
    let mut f_measure = Percent::ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    if c.tp == 0 {
        f_measure = Percent {
            tenths: 0,
            degenerate: true,
        };
    }
    Metrics {
        precision: Percent::ratio(c.tp, c.tp + c.fp),
        recall: Percent::ratio(c.tp, c.tp + c.fn_),
        f_measure,
        accuracy: Percent::ratio(c.tp + c.tn, c.total()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsReport {
    pub model: String,
    pub n: usize,
    pub lambda: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

impl MetricsReport {
    pub fn new(model: impl Into<String>, n: usize, lambda: usize, confusion: Confusion) -> Self {
        MetricsReport {
            model: model.into(),
            n,
            lambda,
            metrics: metrics(&confusion),
            confusion,
        }
    }
}

pub const REPORT_COLUMNS: [&str; 11] = ["model", "N", "lambda", "tp", "fp", "fn", "tn", "P", "R", "F", "A"];

/// Reports as CSV records with the [`REPORT_COLUMNS`] header.
pub fn report_records(reports: &[MetricsReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).expect("in-memory write");
    for r in reports {
        let c = &r.confusion;
        let m = &r.metrics;
        w.write_record([
            r.model.clone(),
            r.n.to_string(),
            r.lambda.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f_measure.to_string(),
            m.accuracy.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 records")
}

/// Parse records written by [`report_records`]. Metrics are recomputed from
/// the counts and must agree with the stored columns.
pub fn parse_records(text: &str) -> Result<Vec<MetricsReport>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let fmt_err = |e: csv::Error| Error::Format(e.to_string());
    if reader.headers().map_err(fmt_err)?.iter().ne(REPORT_COLUMNS) {
        return Err(Error::Format("unexpected report columns".into()));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let r = rec.map_err(fmt_err)?;
        let int = |i: usize| {
            r[i].parse::<u64>()
                .map_err(|_| Error::Format(format!("bad {} value {:?}", REPORT_COLUMNS[i], &r[i])))
        };
        let c = Confusion {
            tp: int(3)?,
            fp: int(4)?,
            fn_: int(5)?,
            tn: int(6)?,
        };
        let report = MetricsReport::new(&r[0], int(1)? as usize, int(2)? as usize, c);
        let m = &report.metrics;
        let stored = [&r[7], &r[8], &r[9], &r[10]];
        let computed = [m.precision, m.recall, m.f_measure, m.accuracy].map(|p| p.to_string());
        if stored.iter().zip(&computed).any(|(s, c)| *s != c) {
            return Err(Error::Format(format!("metrics of {} do not match its counts", report.model)));
        }
        out.push(report);
    }
    Ok(out)
}

/// Human-readable table grouped by `(N, λ)` in first-seen order; rows keep
/// input order within a group.
pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for r in reports {
        if !groups.contains(&(r.n, r.lambda)) {
            groups.push((r.n, r.lambda));
        }
    }
    let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    for (n, lambda) in groups {
        out.push_str(&format!("N = {n}, λ = {lambda}\n"));
        out.push_str(&format!("{:<width$}  {:>6} {:>6} {:>6} {:>6}\n", "model", "P", "R", "F", "A"));
        for r in reports.iter().filter(|r| (r.n, r.lambda) == (n, lambda)) {
            let m = &r.metrics;
            let cell = |p: Percent| format!("{p}{}", if p.degenerate { "*" } else { "%" });
            out.push_str(&format!(
                "{:<width$}  {:>6} {:>6} {:>6} {:>6}\n",
                r.model,
                cell(m.precision),
                cell(m.recall),
                cell(m.f_measure),
                cell(m.accuracy)
            ));
        }
    }
    if reports.iter().any(|r| r.metrics.degenerate()) {
        out.push_str("* undefined ratio reported as 0\n");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub text: String,
    pub records: String,
}

pub fn compare(reports: &[MetricsReport]) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::Parameter("nothing to compare".into()));
    }
    Ok(Comparison {
        text: comparison_table(reports),
        records: report_records(reports),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use MatchLabel::{Matching as M, NonMatching as X};

    #[test]
    fn hand_counted_confusion() {
        let decisions = [(M, M), (M, M), (M, X), (X, M), (X, X), (X, X), (X, X), (M, M), (X, M), (X, X)];
        let c = confusion(decisions).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 3,
                fp: 1,
                fn_: 2,
                tn: 4
            }
        );
        let flipped = confusion(decisions.map(|(p, t)| (p, if t == M { X } else { M }))).unwrap();
        assert_eq!((flipped.tp, flipped.fn_, flipped.fp, flipped.tn), (c.fp, c.tn, c.tp, c.fn_));
        assert!(confusion(std::iter::empty()).is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(Percent::ratio(1, 3).to_string(), "33.3");
        assert_eq!(Percent::ratio(2, 3).to_string(), "66.7");
        // 1/8 = 12.5% exactly; 1/16 = 6.25% rounds up
        assert_eq!(Percent::ratio(1, 8).to_string(), "12.5");
        assert_eq!(Percent::ratio(1, 16).to_string(), "6.3");
        assert_eq!(Percent::ratio(5, 5).to_string(), "100.0");
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = metrics(&Confusion {
            tp: 0,
            fp: 0,
            fn_: 4,
            tn: 6,
        });
        assert_eq!(m.precision.tenths, 0);
        assert!(m.precision.degenerate && m.f_measure.degenerate);
        assert!(!m.recall.degenerate);
        assert_eq!(m.accuracy.to_string(), "60.0");
    }

    #[test]
    fn records_roundtrip() {
        let reports = vec![
            MetricsReport::new("car", 3, 5, Confusion { tp: 9, fp: 2, fn_: 1, tn: 40 }),
            MetricsReport::new("plate, odd", 3, 5, Confusion { tp: 0, fp: 0, fn_: 3, tn: 7 }),
        ];
        let text = report_records(&reports);
        assert!(text.starts_with("model,N,lambda,tp,fp,fn,tn,P,R,F,A\n"));
        assert_eq!(parse_records(&text).unwrap(), reports);
        let tampered = text.replace("car,3,5,9,2,1,40,81.8", "car,3,5,9,2,1,40,81.9");
        assert!(parse_records(&tampered).is_err());
    }

    #[test]
    fn comparison_keeps_input_order() {
        let c = Confusion { tp: 5, fp: 1, fn_: 1, tn: 20 };
        let reports = ["car", "plate", "two-stream"].map(|m| MetricsReport::new(m, 3, 5, c));
        let out = compare(&reports).unwrap();
        let rows: Vec<&str> = out.text.lines().skip(2).map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(rows, vec!["car", "plate", "two-stream"]);
        assert_eq!(out.records.lines().count(), 4);
        assert!(compare(&[]).is_err());
    }
}
