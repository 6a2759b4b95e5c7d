//! Per-stage timing breakdown, aggregated from live-mode stage timestamps.

use crate::error::{Error, Result};
use crate::ric::{DataPath, TimingRecord};

/// Mean per-stage durations (milliseconds) for one data path.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingBreakdown {
    pub path: DataPath,
    /// Items aggregated.
    pub count: usize,
    /// Mean payload bytes of the receive stage.
    pub receive_bytes: f64,
    pub receive_data_ms: f64,
    pub forward_to_processing_ms: f64,
    pub process_and_store_ms: f64,
    pub model_inference_ms: f64,
    pub control_to_ran_ms: f64,
    pub total_ms: f64,
}

impl TimingBreakdown {
    pub fn stage_sum_ms(&self) -> f64 {
        self.receive_data_ms
            + self.forward_to_processing_ms
            + self.process_and_store_ms
            + self.model_inference_ms
            + self.control_to_ran_ms
    }
}

/// Aggregate live-mode records into one breakdown per data path.
///
/// Deterministic-mode traces are rejected: virtual time is not wall time.
pub fn timing_report(records: &[TimingRecord], virtual_clock: bool) -> Result<Vec<TimingBreakdown>> {
    if virtual_clock {
        return Err(Error::Unsupported(
            "timing reports need a live-mode trace; virtual time is not wall time".into(),
        ));
    }
    let mut out = Vec::new();
    for path in [DataPath::Spec, DataPath::Kpm] {
        let complete: Vec<&TimingRecord> = records
            .iter()
            .filter(|r| {
                r.path == path
                    && r.inference_done_ms.is_some()
                    && r.control_sent_ms.is_some()
                    && r.ack_ms.is_some()
            })
            .collect();
        if complete.is_empty() {
            continue;
        }
        let n = complete.len() as f64;
        let mean = |f: &dyn Fn(&TimingRecord) -> f64| complete.iter().map(|r| f(r)).sum::<f64>() / n;
        out.push(TimingBreakdown {
            path,
            count: complete.len(),
            receive_bytes: mean(&|r| r.bytes_received as f64),
            receive_data_ms: mean(&|r| r.receive_done_ms - r.receive_start_ms),
            forward_to_processing_ms: mean(&|r| r.forward_done_ms - r.receive_done_ms),
            process_and_store_ms: mean(&|r| r.stored_ms - r.forward_done_ms),
            model_inference_ms: mean(&|r| r.inference_done_ms.unwrap() - r.stored_ms),
            control_to_ran_ms: mean(&|r| r.ack_ms.unwrap() - r.inference_done_ms.unwrap()),
            total_ms: mean(&|r| r.ack_ms.unwrap() - r.receive_start_ms),
        });
    }
    Ok(out)
}

/// Human-readable table, one block per path.
pub fn timing_table(breakdowns: &[TimingBreakdown]) -> String {
    let mut out = String::new();
    for b in breakdowns {
        let name = match b.path {
            DataPath::Spec => "spec",
            DataPath::Kpm => "kpm",
        };
        out.push_str(&format!(
            "path={name} items={} receive_bytes={:.0}\n\
             receive_data_ms={:.4}\nforward_to_processing_ms={:.4}\n\
             process_and_store_ms={:.4}\nmodel_inference_ms={:.4}\n\
             control_to_ran_ms={:.4}\ntotal_ms={:.4}\n\n",
            b.count,
            b.receive_bytes,
            b.receive_data_ms,
            b.forward_to_processing_ms,
            b.process_and_store_ms,
            b.model_inference_ms,
            b.control_to_ran_ms,
            b.total_ms
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(path: DataPath, base: f64) -> TimingRecord {
        TimingRecord {
            path,
            bytes_received: if path == DataPath::Spec { 614_400 } else { 20 },
            receive_start_ms: base,
            receive_done_ms: base + 2.0,
            forward_done_ms: base + 2.5,
            stored_ms: base + 4.0,
            inference_done_ms: Some(base + 7.0),
            control_sent_ms: Some(base + 7.2),
            ack_ms: Some(base + 7.5),
        }
    }

    #[test]
    fn rejects_virtual_traces() {
        let recs = vec![record(DataPath::Spec, 0.0)];
        assert!(matches!(timing_report(&recs, true), Err(Error::Unsupported(_))));
    }

    #[test]
    fn aggregates_means_per_path() {
        let recs = vec![
            record(DataPath::Spec, 0.0),
            record(DataPath::Spec, 100.0),
            record(DataPath::Kpm, 50.0),
        ];
        let breakdowns = timing_report(&recs, false).unwrap();
        assert_eq!(breakdowns.len(), 2);
        let spec = &breakdowns[0];
        assert_eq!(spec.path, DataPath::Spec);
        assert_eq!(spec.count, 2);
        assert!((spec.receive_data_ms - 2.0).abs() < 1e-12);
        assert!((spec.total_ms - 7.5).abs() < 1e-12);
        // stages sum exactly to the total by construction
        assert!((spec.stage_sum_ms() - spec.total_ms).abs() < 1e-9);
        let kpm = &breakdowns[1];
        assert_eq!(kpm.receive_bytes, 20.0);
    }

    #[test]
    fn incomplete_records_are_skipped() {
        let mut r = record(DataPath::Kpm, 0.0);
        r.ack_ms = None;
        let breakdowns = timing_report(&[r], false).unwrap();
        assert!(breakdowns.is_empty());
    }

    #[test]
    fn table_renders() {
        let t = timing_table(&timing_report(&[record(DataPath::Spec, 0.0)], false).unwrap());
        assert!(t.contains("path=spec"));
        assert!(t.contains("receive_bytes=614400"));
    }
}
