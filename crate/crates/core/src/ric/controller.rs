//! Internal messaging / policy controller.
//!
//! Receives indications from the RAN, forwards them through the data
//! processing step (I/Q to spectrogram, KPM windowing and normalization),
//! stores the result in the RIC database, and emits control messages toward
//! the RAN. Per-stage timestamps are recorded for the timing report.

use super::protocol::{E2LiteMessage, KpmReport, MsgType, IND_IQ_PAYLOAD_LEN};
use super::{ControlDecision, SdlHandle};
use crate::clock::Clock;
use crate::datagen::{gen_kpm_window, iq_to_spectrogram, IqFrame, KpmSample, Label, NormBounds};
use crate::error::{Error, Result};

/// Database key holding the most recent spectrogram.
pub const KEY_SPEC_LATEST: &str = "spec/latest";
/// Database key holding the most recent normalized KPM window.
pub const KEY_KPM_LATEST: &str = "kpm/latest";

/// Which ingest pipeline a message travelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataPath {
    Spec,
    Kpm,
}

/// Transport-level receive timing, supplied by whichever byte stream carried
/// the message (virtual timestamps in deterministic mode). `bytes` counts
/// the payload, the quantity the timing table reports.
#[derive(Debug, Clone, Copy)]
pub struct ReceiveStamps {
    pub start_ms: f64,
    pub done_ms: f64,
    pub bytes: usize,
}

/// Stage timestamps for one data item's trip through the loop.
#[derive(Debug, Clone)]
pub struct TimingRecord {
    pub path: DataPath,
    pub bytes_received: usize,
    pub receive_start_ms: f64,
    pub receive_done_ms: f64,
    /// Handed to the data processing step.
    pub forward_done_ms: f64,
    /// Processed value stored in the database.
    pub stored_ms: f64,
    /// Filled in by the xApp when it classifies this item.
    pub inference_done_ms: Option<f64>,
    /// Filled in when the control message leaves for the RAN.
    pub control_sent_ms: Option<f64>,
    /// Filled in when the RAN acknowledges.
    pub ack_ms: Option<f64>,
}

impl TimingRecord {
    /// receive -> forward -> process+store -> inference -> control must never
    /// go backward.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.receive_start_ms;
        for t in [Some(self.receive_done_ms), Some(self.forward_done_ms), Some(self.stored_ms), self.inference_done_ms, self.control_sent_ms, self.ack_ms].into_iter().flatten() {
            if t < prev {
                return false;
            }
            prev = t;
        }
        true
    }
}

/// Reference to a freshly stored database entry plus its timing record slot.
#[derive(Debug, Clone)]
pub struct StoredRef {
    pub key: &'static str,
    pub version: u64,
    pub record_idx: usize,
}

/// The controller owns a writing SDL handle and the KPM window buffer.
pub struct PolicyController {
    sdl: SdlHandle,
    clock: Clock,
    kpm_t: usize,
    kpm_m: usize,
    bounds: NormBounds,
    kpm_history: Vec<KpmSample>,
    records: Vec<TimingRecord>,
}

impl PolicyController {
    pub fn new(sdl: SdlHandle, clock: Clock, kpm_t: usize, kpm_m: usize, bounds: NormBounds) -> Self {
        PolicyController {
            sdl,
            clock,
            kpm_t,
            kpm_m,
            bounds,
            kpm_history: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Ingest an indication: process its payload, store the result, record
    /// stage timestamps. Returns `None` for KPM reports that have not yet
    /// filled a window of `t` reports.
    pub fn handle_indication(
        &mut self,
        msg: &E2LiteMessage,
        recv: ReceiveStamps,
    ) -> Result<Option<StoredRef>> {
        msg.validate()?;
        match msg.msg_type {
            MsgType::IndIq => {
                debug_assert_eq!(msg.payload.len(), IND_IQ_PAYLOAD_LEN);
                let forward_done_ms = self.clock.now_ms();
                let frame = IqFrame::from_bytes(&msg.payload)
                    .map_err(|e| Error::protocol(e.to_string()))?;
                let spec = iq_to_spectrogram(&frame);
                let version = self.sdl.put(KEY_SPEC_LATEST, spec.to_f32_bytes())?;
                let stored_ms = self.clock.now_ms();
                let record_idx = self.push_record(DataPath::Spec, recv, forward_done_ms, stored_ms);
                Ok(Some(StoredRef { key: KEY_SPEC_LATEST, version, record_idx }))
            }
            MsgType::IndKpm => {
                let forward_done_ms = self.clock.now_ms();
                let report = KpmReport::decode(&msg.payload)?;
                let sample = report.to_sample()?;
                self.kpm_history.push(sample);
                // keep only what windowing needs
                if self.kpm_history.len() > self.kpm_t {
                    let drop = self.kpm_history.len() - self.kpm_t;
                    self.kpm_history.drain(..drop);
                }
                if self.kpm_history.len() < self.kpm_t {
                    return Ok(None);
                }
                // the label here is bookkeeping only; stored bytes carry no label
                let window = gen_kpm_window(
                    &self.kpm_history,
                    self.kpm_t,
                    self.kpm_m,
                    &self.bounds,
                    Label::Soi,
                )?;
                let version = self.sdl.put(KEY_KPM_LATEST, window.to_f32_bytes())?;
                let stored_ms = self.clock.now_ms();
                let record_idx = self.push_record(DataPath::Kpm, recv, forward_done_ms, stored_ms);
                Ok(Some(StoredRef { key: KEY_KPM_LATEST, version, record_idx }))
            }
            other => Err(Error::protocol(format!("{other:?} is not an indication"))),
        }
    }

    /// Build the CONTROL message for a decision: one action byte.
    pub fn send_control(&mut self, decision: &ControlDecision, record_idx: Option<usize>) -> E2LiteMessage {
        let now = self.clock.now_ms();
        if let Some(idx) = record_idx {
            if let Some(r) = self.records.get_mut(idx) {
                r.control_sent_ms = Some(now);
            }
        }
        E2LiteMessage::new(MsgType::Control, vec![decision.action as u8])
    }

    /// Record the xApp's inference completion for a stored item.
    pub fn mark_inference(&mut self, record_idx: usize) {
        let now = self.clock.now_ms();
        if let Some(r) = self.records.get_mut(record_idx) {
            r.inference_done_ms = Some(now);
        }
    }

    /// Record the RAN's ACK for a control message.
    pub fn mark_ack(&mut self, record_idx: usize) {
        let now = self.clock.now_ms();
        if let Some(r) = self.records.get_mut(record_idx) {
            r.ack_ms = Some(now);
        }
    }

    pub fn records(&self) -> &[TimingRecord] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<TimingRecord> {
        std::mem::take(&mut self.records)
    }

    /// Reports accumulated so far toward the next window.
    pub fn kpm_buffered(&self) -> usize {
        self.kpm_history.len()
    }

    fn push_record(
        &mut self,
        path: DataPath,
        recv: ReceiveStamps,
        forward_done_ms: f64,
        stored_ms: f64,
    ) -> usize {
        self.records.push(TimingRecord {
            path,
            bytes_received: recv.bytes,
            receive_start_ms: recv.start_ms,
            receive_done_ms: recv.done_ms,
            forward_done_ms,
            stored_ms,
            inference_done_ms: None,
            control_sent_ms: None,
            ack_ms: None,
        });
        self.records.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synth_iq_frame, JammerProfile, Spectrogram};
    use crate::ric::{ControlAction, RicDb};

    fn setup() -> (Clock, PolicyController, SdlHandle) {
        let clock = Clock::virtual_clock();
        let db = RicDb::new(clock.clone());
        let controller_sdl = db.handle("controller", true, true);
        let reader = db.handle("xapp", true, false);
        let c = PolicyController::new(controller_sdl, clock.clone(), 3, 4, NormBounds::default());
        (clock, c, reader)
    }

    fn recv_now(clock: &Clock, bytes: usize) -> ReceiveStamps {
        let t = clock.now_ms();
        ReceiveStamps { start_ms: t, done_ms: t, bytes }
    }

    #[test]
    fn iq_indication_stores_spectrogram_with_ridge() {
        let (clock, mut c, reader) = setup();
        let jam = JammerProfile::on(40.0).unwrap();
        let frame = synth_iq_frame(Label::Cwi, &jam, 5).unwrap();
        let msg = E2LiteMessage::new(MsgType::IndIq, frame.to_bytes());
        let stored = c
            .handle_indication(&msg, recv_now(&clock, msg.payload.len()))
            .unwrap()
            .expect("IQ always stores");
        assert_eq!(stored.key, KEY_SPEC_LATEST);
        assert_eq!(stored.version, 1);
        let entry = reader.get_latest(KEY_SPEC_LATEST).unwrap();
        let spec = Spectrogram::from_f32_bytes(&entry.value).unwrap();
        let mut means = spec.row_means();
        let peak = means.iter().cloned().fold(0.0, f64::max);
        means.sort_by(f64::total_cmp);
        assert!(peak > 3.0 * means[means.len() / 2], "stored spectrogram lost the tone ridge");
    }

    #[test]
    fn kpm_window_accumulates_t_reports() {
        let (clock, mut c, reader) = setup();
        for seq in 0..5u32 {
            let sample = KpmSample {
                ul_sinr_db: 20.0 + f64::from(seq),
                bitrate_mbps: 10.0,
                bler: 0.05,
                mcs: 20,
            };
            let payload = KpmReport::from_sample(&sample, seq).encode().to_vec();
            let msg = E2LiteMessage::new(MsgType::IndKpm, payload);
            let out = c.handle_indication(&msg, recv_now(&clock, 20)).unwrap();
            if seq < 2 {
                assert!(out.is_none(), "window needs t=3 reports");
            } else {
                let stored = out.unwrap();
                assert_eq!(stored.key, KEY_KPM_LATEST);
            }
            clock.advance_ms(1000);
        }
        let entry = reader.get_latest(KEY_KPM_LATEST).unwrap();
        assert_eq!(entry.value.len(), 3 * 4 * 4, "window is t*m f32 values");
        assert_eq!(entry.version, 3, "three windows stored after five reports");
    }

    #[test]
    fn malformed_payloads_are_protocol_errors() {
        let (clock, mut c, _) = setup();
        let bad_iq = E2LiteMessage::new(MsgType::IndIq, vec![0u8; 100]);
        assert!(matches!(
            c.handle_indication(&bad_iq, recv_now(&clock, 100)),
            Err(Error::Protocol(_))
        ));
        let bad_kpm = E2LiteMessage::new(MsgType::IndKpm, vec![0u8; 7]);
        assert!(c.handle_indication(&bad_kpm, recv_now(&clock, 7)).is_err());
        let not_indication = E2LiteMessage::ack();
        assert!(c.handle_indication(&not_indication, recv_now(&clock, 0)).is_err());
    }

    #[test]
    fn control_messages_carry_action_byte() {
        let (_, mut c, _) = setup();
        let soi = ControlDecision::for_class(0).unwrap();
        let msg = c.send_control(&soi, None);
        assert_eq!(msg.msg_type, MsgType::Control);
        assert_eq!(msg.payload, vec![0]);
        let cwi = ControlDecision::for_class(1).unwrap();
        assert_eq!(c.send_control(&cwi, None).payload, vec![1]);
        assert_eq!(ControlAction::from_byte(1).unwrap(), ControlAction::AdaptiveMcs);
    }

    #[test]
    fn stage_timestamps_are_monotone() {
        let (clock, mut c, _) = setup();
        let frame = synth_iq_frame(Label::Soi, &JammerProfile::off(), 1).unwrap();
        let msg = E2LiteMessage::new(MsgType::IndIq, frame.to_bytes());
        let stored =
            c.handle_indication(&msg, recv_now(&clock, 614_400)).unwrap().unwrap();
        clock.advance_ms(3);
        c.mark_inference(stored.record_idx);
        clock.advance_ms(1);
        let d = ControlDecision::for_class(0).unwrap();
        c.send_control(&d, Some(stored.record_idx));
        c.mark_ack(stored.record_idx);
        let rec = &c.records()[stored.record_idx];
        assert!(rec.is_monotone());
        assert_eq!(rec.bytes_received, 614_400);
        assert_eq!(rec.inference_done_ms, Some(3.0));
        assert_eq!(rec.control_sent_ms, Some(4.0));
    }
}
