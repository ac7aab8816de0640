//! Trial logs and their CSV form (`run_id,trial,ax,by,a,b`).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, Context, OutcomeDist};
use crate::contextual::HiddenVariables;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["run_id", "trial", "ax", "by", "a", "b"];

/// Audit copy of the hidden state behind one trial. Not part of the CSV form.
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSnapshot {
    /// Index into a finite hidden-variable model's state list.
    Index(usize),
    Contextual(HiddenVariables),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub run_id: u64,
    pub trial: u64,
    pub context: Context,
    /// `-1`, `+1`, or `0` for a missing detection.
    pub a: i8,
    pub b: i8,
    pub lambda: Option<LambdaSnapshot>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    run_id: u64,
    trial: u64,
    ax: u8,
    by: u8,
    a: i8,
    b: i8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialLog {
    records: Vec<TrialRecord>,
    last_trial: BTreeMap<u64, u64>,
}

fn check_outcome(v: i8) -> Result<()> {
    if (-1..=1).contains(&v) {
        Ok(())
    } else {
        Err(Error::Parse(format!("outcome must be -1, 0 or 1, got {v}")))
    }
}

impl TrialLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        TrialLog {
            records: Vec::with_capacity(n),
            last_trial: BTreeMap::new(),
        }
    }

    /// Appends a record; trial indices must increase strictly within each run.
    pub fn push(&mut self, record: TrialRecord) -> Result<()> {
        check_outcome(record.a)?;
        check_outcome(record.b)?;
        if let Some(&last) = self.last_trial.get(&record.run_id) {
            if record.trial <= last {
                return Err(Error::Parse(format!(
                    "run {}: trial {} does not follow trial {last}",
                    record.run_id, record.trial
                )));
            }
        }
        self.last_trial.insert(record.run_id, record.trial);
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends every record of `other`, keeping the ordering checks.
    pub fn extend(&mut self, other: TrialLog) -> Result<()> {
        other.records.into_iter().try_for_each(|r| self.push(r))
    }

    /// Per-context counts of `(a, b)` over `{+1, -1}`, plus the number of trials with a zero outcome.
    pub fn counts(&self) -> ([[[u64; 2]; 2]; 4], [u64; 4]) {
        let mut counts = [[[0u64; 2]; 2]; 4];
        let mut zeros = [0u64; 4];
        for r in &self.records {
            let k = r.context.position();
            if r.a == 0 || r.b == 0 {
                zeros[k] += 1;
                continue;
            }
            let slot = |v: i8| usize::from(v < 0);
            counts[k][slot(r.a)][slot(r.b)] += 1;
        }
        (counts, zeros)
    }

    /// Empirical behavior from a log with only `±1` outcomes.
    pub fn estimate_behavior(&self) -> Result<Behavior<f64>> {
        let (counts, zeros) = self.counts();
        if let Some(k) = zeros.iter().position(|&z| z > 0) {
            return Err(Error::InvalidArgument(format!(
                "context {} has {} trials with a zero outcome; condition on coincidences first",
                Context::from_position(k),
                zeros[k]
            )));
        }
        let entries = Context::ALL
            .iter()
            .map(|&c| {
                OutcomeDist::from_counts(counts[c.position()])
                    .map(|d| (c, d))
                    .map_err(|_| Error::IncompleteBehavior(format!("no trials for context {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Behavior::from_contexts(entries)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
        if self.records.is_empty() {
            w.write_record(CSV_HEADER)?;
        }
        for r in &self.records {
            w.serialize(CsvRow {
                run_id: r.run_id,
                trial: r.trial,
                ax: r.context.alice.index(),
                by: r.context.bob.index(),
                a: r.a,
                b: r.b,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Parse(format!(
                "expected header {}, found {}",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut log = TrialLog::new();
        for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let context = Context::from_indices(i64::from(row.ax), i64::from(row.by))
                .map_err(|e| Error::Parse(format!("line {}: {e}", line + 2)))?;
            log.push(TrialRecord {
                run_id: row.run_id,
                trial: row.trial,
                context,
                a: row.a,
                b: row.b,
                lambda: None,
            })
            .map_err(|e| Error::Parse(format!("line {}: {e}", line + 2)))?;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(run_id: u64, trial: u64, k: usize, a: i8, b: i8) -> TrialRecord {
        TrialRecord {
            run_id,
            trial,
            context: Context::from_position(k),
            a,
            b,
            lambda: None,
        }
    }

    #[test]
    fn rejects_non_increasing_trials() {
        let mut log = TrialLog::new();
        log.push(rec(0, 1, 0, 1, 1)).unwrap();
        log.push(rec(1, 0, 0, 1, 1)).unwrap();
        assert!(log.push(rec(0, 1, 0, 1, 1)).is_err());
        assert!(log.push(rec(0, 2, 0, 2, 1)).is_err());
    }

    #[test]
    fn csv_round_trip_and_header() {
        let mut log = TrialLog::new();
        for t in 0..8 {
            log.push(rec(0, t, (t % 4) as usize, if t % 3 == 0 { 0 } else { 1 }, -1))
                .unwrap();
        }
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,trial,ax,by,a,b\n0,0,1,1,0,-1\n"));
        assert_eq!(TrialLog::read_csv(buf.as_slice()).unwrap().records(), log.records());

        assert!(TrialLog::read_csv("run,trial,ax,by,a,b\n".as_bytes()).is_err());
        assert!(TrialLog::read_csv("run_id,trial,ax,by,a,b\n0,0,3,1,1,1\n".as_bytes()).is_err());
        assert!(TrialLog::read_csv("run_id,trial,ax,by,a,b\n0,0,1,1,2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn estimation_requires_all_contexts() {
        let mut log = TrialLog::new();
        log.push(rec(0, 0, 0, 1, 1)).unwrap();
        assert!(log.estimate_behavior().is_err());
    }
}
