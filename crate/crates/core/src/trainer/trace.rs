use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::matrix::MatrixError;

pub const TRACE_HEADER: [&str; 4] = ["iteration", "raw_estimate", "smoothed_estimate", "loss"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub raw_estimate: f64,
    pub smoothed_estimate: f64,
    pub loss: f64,
}

/// Estimates recorded during one run, in increasing iteration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Smoothed estimate at the last recorded iteration `<= iteration`.
    pub fn smoothed_at(&self, iteration: u64) -> Option<f64> {
        self.rows
            .iter()
            .take_while(|r| r.iteration <= iteration)
            .last()
            .map(|r| r.smoothed_estimate)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.iteration.to_string(),
                format!("{:?}", r.raw_estimate),
                format!("{:?}", r.smoothed_estimate),
                format!("{:?}", r.loss),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MatrixError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().ne(TRACE_HEADER) {
            return Err(MatrixError::HeaderMismatch {
                expected: TRACE_HEADER.len(),
                found: header.len(),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in r.deserialize().enumerate() {
            let row: TraceRow = rec.map_err(|e| MatrixError::Parse {
                row: i,
                value: e.to_string(),
            })?;
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

/// Exponential moving average: `out[0] = v[0]`,
/// `out[t] = (1 - rate) out[t-1] + rate v[t]`.
pub fn smooth(values: &[f64], rate: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let next = match out.last() {
            None => v,
            Some(&prev) => (1.0 - rate) * prev + rate * v,
        };
        out.push(next);
    }
    out
}

/// First recorded iteration from which the smoothed estimate stays within
/// `± tolerance_fraction · ground_truth` until the end of the trace.
pub fn convergence_iteration(trace: &Trace, ground_truth: f64, tolerance_fraction: f64) -> Option<u64> {
    let band = tolerance_fraction * ground_truth.abs();
    let mut first = None;
    for r in &trace.rows {
        if (r.smoothed_estimate - ground_truth).abs() <= band {
            first.get_or_insert(r.iteration);
        } else {
            first = None;
        }
    }
    first
}

/// Builds trace rows, smoothing as if the estimate were updated every
/// iteration and held constant between recorded points: a gap of `k`
/// iterations uses the rate `1 - (1 - rate)^k`.
#[derive(Debug, Clone)]
pub(crate) struct TraceRecorder {
    rate: f64,
    trace: Trace,
}

impl TraceRecorder {
    pub fn new(rate: f64) -> Self {
        Self {
            rate,
            trace: Trace::default(),
        }
    }

    pub fn push(&mut self, iteration: u64, raw_estimate: f64, loss: f64) {
        let smoothed_estimate = match self.trace.last() {
            None => raw_estimate,
            Some(prev) => {
                let gap = iteration - prev.iteration;
                let r = if gap == 1 {
                    self.rate
                } else {
                    1.0 - (1.0 - self.rate).powf(gap as f64)
                };
                (1.0 - r) * prev.smoothed_estimate + r * raw_estimate
            }
        };
        self.trace.rows.push(TraceRow {
            iteration,
            raw_estimate,
            smoothed_estimate,
            loss,
        });
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace_of(points: &[(u64, f64)]) -> Trace {
        Trace {
            rows: points
                .iter()
                .map(|&(iteration, v)| TraceRow {
                    iteration,
                    raw_estimate: v,
                    smoothed_estimate: v,
                    loss: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[3.0, -1.0, 2.0], 1.0), vec![3.0, -1.0, 2.0]);
        assert_eq!(smooth(&[2.5; 4], 0.01), vec![2.5; 4]);
        let s = smooth(&[0.0, 1.0], 0.01);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.01).abs() < 1e-15);
        assert!(smooth(&[], 0.5).is_empty());
    }

    #[test]
    fn recorder_matches_smooth_on_unit_gaps() {
        let raw = [1.0, 4.0, -2.0, 0.5];
        let mut rec = TraceRecorder::new(0.1);
        for (i, &v) in raw.iter().enumerate() {
            rec.push(i as u64 + 1, v, 0.0);
        }
        let got: Vec<f64> = rec.into_trace().rows.iter().map(|r| r.smoothed_estimate).collect();
        assert_eq!(got, smooth(&raw, 0.1));
    }

    #[test]
    fn recorder_compounds_rate_over_gaps() {
        // holding the raw value for k steps at rate r = one step at 1 - (1-r)^k
        let mut rec = TraceRecorder::new(0.01);
        rec.push(100, 0.0, 0.0);
        rec.push(200, 1.0, 0.0);
        let per_step = smooth(&std::iter::once(0.0).chain([1.0; 100]).collect::<Vec<_>>(), 0.01);
        let got = rec.into_trace().rows[1].smoothed_estimate;
        assert!((got - per_step[100]).abs() < 1e-12);
    }

    #[test]
    fn convergence_examples() {
        let flat = trace_of(&[(100, 2.0), (200, 2.0), (300, 2.0)]);
        assert_eq!(convergence_iteration(&flat, 2.0, 0.1), Some(100));
        let never = trace_of(&[(100, 0.0), (200, 0.5)]);
        assert_eq!(convergence_iteration(&never, 2.0, 0.1), None);
        assert_eq!(convergence_iteration(&Trace::default(), 2.0, 0.1), None);
        let mut pts = Vec::new();
        for t in (100..=2000).step_by(100) {
            let v = if (500..900).contains(&t) || t >= 1200 { 2.05 } else { 1.0 };
            pts.push((t, v));
        }
        assert_eq!(convergence_iteration(&trace_of(&pts), 2.0, 0.1), Some(1200));
    }

    #[test]
    fn smoothed_lookup() {
        let t = trace_of(&[(100, 1.0), (200, 2.0)]);
        assert_eq!(t.smoothed_at(50), None);
        assert_eq!(t.smoothed_at(150), Some(1.0));
        assert_eq!(t.smoothed_at(10_000), Some(2.0));
    }

    #[test]
    fn bad_header_rejected() {
        let csv = "iter,raw,smoothed,loss\n1,0,0,0\n";
        assert!(Trace::read_csv(csv.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(values in proptest::collection::vec((-1e9f64..1e9, -1e9f64..1e9, -1e3f64..1e3), 0..30)) {
            let trace = Trace {
                rows: values
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b, c))| TraceRow {
                        iteration: (i as u64 + 1) * 100,
                        raw_estimate: a,
                        smoothed_estimate: b,
                        loss: c,
                    })
                    .collect(),
            };
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).unwrap();
            prop_assert_eq!(Trace::read_csv(buf.as_slice()).unwrap(), trace);
        }
    }
}
