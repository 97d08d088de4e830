use std::io::{self, Write};

use crate::scalar::Scalar;

pub const TRACE_HEADER: &str = "t,comm_rounds,gap,grad_norm_sq,divergence,eta,k,stage";

/// One sample of a run, taken at the averaged iterate `x̂_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<F> {
    /// Global iteration index.
    pub t: u64,
    /// Cumulative averaging events up to and including `t`.
    pub comm_rounds: u64,
    pub gap: Option<F>,
    pub grad_norm_sq: Option<F>,
    pub divergence: Option<F>,
    pub eta: F,
    pub k: usize,
    /// 1-based stage index.
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace<F> {
    pub records: Vec<TraceRecord<F>>,
}

fn field<F: Scalar>(v: Option<F>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl<F: Scalar> RunTrace<F> {
    pub fn new() -> Self {
        Self { records: Vec::new() }
    }

    /// Appends a record; a record at the same `t` as the last one replaces it.
    pub fn push(&mut self, record: TraceRecord<F>) {
        match self.records.last_mut() {
            Some(last) if last.t == record.t => *last = record,
            Some(last) => {
                debug_assert!(record.t > last.t, "trace time must increase");
                self.records.push(record);
            }
            None => self.records.push(record),
        }
    }

    pub fn last(&self) -> Option<&TraceRecord<F>> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First cumulative round count at which the recorded gap is at most `target`.
    pub fn rounds_to_gap(&self, target: F) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.gap.is_some_and(|g| g <= target))
            .map(|r| r.comm_rounds)
    }

    /// Writes the trace as CSV with [`TRACE_HEADER`]; missing values are empty
    /// fields, reals use Rust's locale-free exponent notation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{:e},{},{}",
                r.t,
                r.comm_rounds,
                field(r.gap),
                field(r.grad_norm_sq),
                field(r.divergence),
                r.eta,
                r.k,
                r.stage
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, rounds: u64, gap: Option<f64>) -> TraceRecord<f64> {
        TraceRecord { t, comm_rounds: rounds, gap, grad_norm_sq: None, divergence: Some(0.0), eta: 0.5, k: 2, stage: 1 }
    }

    #[test]
    fn csv_layout() {
        let mut trace = RunTrace::new();
        trace.push(rec(0, 0, Some(1.25)));
        trace.push(rec(2, 1, None));
        assert_eq!(
            trace.to_csv_string(),
            "t,comm_rounds,gap,grad_norm_sq,divergence,eta,k,stage\n0,0,1.25e0,,0e0,5e-1,2,1\n2,1,,,0e0,5e-1,2,1\n"
        );
    }

    #[test]
    fn same_time_replaces() {
        let mut trace = RunTrace::new();
        trace.push(rec(4, 2, Some(1.0)));
        trace.push(rec(4, 2, Some(0.5)));
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.rounds_to_gap(0.75), Some(2));
        assert_eq!(trace.rounds_to_gap(0.1), None);
    }
}
