//! Live-mode closed loop over a loopback stream transport.
//!
//! The RIC side runs on its own thread behind an [`E2Listener`]; the caller
//! drives the RAN side. Wall-clock stage timestamps are recorded per
//! message, which is what the timing breakdown requires. Messages are
//! exchanged lock-step: every indication is answered either with a CONTROL
//! message (answered in turn by an ACK from the RAN) or with a plain ACK
//! while a KPM window is still filling.

use super::timing::{timing_report, TimingBreakdown};
use crate::clock::Clock;
use crate::datagen::{JammerProfile, NormBounds};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::ric::{
    E2LiteMessage, E2Listener, KpmReport, MsgType, PolicyController, RicDb, TimingRecord,
};
use crate::simnet::{LinkParams, LinkSim};
use crate::xapps::{InterClassXapp, XappStep, XappVariant};

pub use crate::ric::transport::{E2Listener as Listener, E2Stream};

/// Parameters of a live timing session.
#[derive(Debug, Clone)]
pub struct LiveRunConfig {
    /// Listen address, e.g. `127.0.0.1:0`.
    pub listen: String,
    pub seed: u64,
    /// I/Q frames to push through the spec path.
    pub n_spec_frames: usize,
    /// KPM reports to push through the kpm path.
    pub n_kpm_reports: usize,
    /// Stacked windows for the KPM path.
    pub kpm_t: usize,
}

impl Default for LiveRunConfig {
    fn default() -> Self {
        LiveRunConfig {
            listen: "127.0.0.1:0".into(),
            seed: 0,
            n_spec_frames: 10,
            n_kpm_reports: 20,
            kpm_t: 1,
        }
    }
}

/// Run both data paths over a real socket and aggregate wall-clock timing.
/// Returns the raw per-message records and the per-path breakdown.
pub fn run_live_timing(
    cfg: &LiveRunConfig,
    spec_model: Model,
    kpm_model: Model,
) -> Result<(Vec<TimingRecord>, Vec<TimingBreakdown>)> {
    if kpm_model.input_shape() != [4 * cfg.kpm_t] {
        return Err(Error::invalid("kpm model input does not match 4 * kpm_t"));
    }
    let clock = Clock::wall_clock();
    let listener = E2Listener::bind(&cfg.listen)?;
    let addr = listener.local_addr()?;

    let ric_clock = clock.clone();
    let kpm_t = cfg.kpm_t;
    let ric = std::thread::spawn(move || -> Result<Vec<TimingRecord>> {
        let mut peer = listener.accept(ric_clock.clone())?;
        let db = RicDb::new(ric_clock.clone());
        let mut controller = PolicyController::new(
            db.handle("controller", true, true),
            ric_clock.clone(),
            kpm_t,
            4,
            NormBounds::default(),
        );
        let mut spec_xapp = InterClassXapp::new(
            XappVariant::Spec,
            spec_model,
            db.handle("interclass-spec", true, false),
            ric_clock.clone(),
        );
        let mut kpm_xapp = InterClassXapp::new(
            XappVariant::Kpm,
            kpm_model,
            db.handle("interclass-kpm", true, false),
            ric_clock.clone(),
        );
        // SETUP handshake
        let (setup, _) = peer.recv()?;
        if setup.msg_type != MsgType::Setup {
            return Err(Error::protocol("expected SETUP first"));
        }
        peer.send(&E2LiteMessage::ack())?;

        loop {
            let (msg, stamps) = match peer.recv() {
                Ok(x) => x,
                // session ends when the RAN closes the stream
                Err(_) => break,
            };
            let stored = controller.handle_indication(&msg, stamps)?;
            match stored {
                Some(stored) => {
                    let xapp = match msg.msg_type {
                        MsgType::IndIq => &mut spec_xapp,
                        _ => &mut kpm_xapp,
                    };
                    match xapp.step()? {
                        XappStep::Decision { decision, .. } => {
                            controller.mark_inference(stored.record_idx);
                            let control =
                                controller.send_control(&decision, Some(stored.record_idx));
                            peer.send(&control)?;
                            let (ack, _) = peer.recv()?;
                            if ack.msg_type != MsgType::Ack {
                                return Err(Error::protocol("expected ACK for CONTROL"));
                            }
                            controller.mark_ack(stored.record_idx);
                        }
                        XappStep::NoNewData => {
                            peer.send(&E2LiteMessage::ack())?;
                        }
                    }
                }
                None => {
                    // window still filling
                    peer.send(&E2LiteMessage::ack())?;
                }
            }
        }
        Ok(controller.take_records())
    });

    // RAN side: drive the link without real-time pacing
    let ran_result = (|| -> Result<()> {
        let mut stream = E2Stream::connect(addr, clock.clone())?;
        stream.send(&E2LiteMessage::setup())?;
        let (ack, _) = stream.recv()?;
        if ack.msg_type != MsgType::Ack {
            return Err(Error::protocol("expected ACK for SETUP"));
        }
        let mut link = LinkSim::new(LinkParams::default(), cfg.seed, 1000, 2000)?;
        link.set_jammer(JammerProfile::off());
        let mut frames = 0usize;
        let mut reports = 0usize;
        let mut seq = 0u32;
        while frames < cfg.n_spec_frames || reports < cfg.n_kpm_reports {
            let (_, kpm, frame) = link.link_step(1000)?;
            if let Some(frame) = frame {
                if frames < cfg.n_spec_frames {
                    frames += 1;
                    stream.send(&E2LiteMessage::new(MsgType::IndIq, frame.to_bytes()))?;
                    exchange_response(&mut stream)?;
                }
            }
            if let Some(sample) = kpm {
                if reports < cfg.n_kpm_reports {
                    reports += 1;
                    let payload = KpmReport::from_sample(&sample, seq).encode().to_vec();
                    seq = seq.wrapping_add(1);
                    stream.send(&E2LiteMessage::new(MsgType::IndKpm, payload))?;
                    exchange_response(&mut stream)?;
                }
            }
        }
        Ok(())
        // stream drops here, closing the session
    })();

    let records = ric.join().map_err(|_| Error::protocol("RIC thread panicked"))??;
    ran_result?;
    let breakdowns = timing_report(&records, false)?;
    Ok((records, breakdowns))
}

fn exchange_response(stream: &mut E2Stream) -> Result<()> {
    let (resp, _) = stream.recv()?;
    match resp.msg_type {
        MsgType::Control => {
            // the RAN acknowledges every control message
            stream.send(&E2LiteMessage::ack())
        }
        MsgType::Ack => Ok(()),
        other => Err(Error::protocol(format!("unexpected response {other:?}"))),
    }
}
