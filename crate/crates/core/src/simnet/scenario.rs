//! Deterministic closed-loop scenario driver.
//!
//! Runs RAN, RIC, and xApps event-interleaved on a shared virtual clock.
//! The per-item pipeline order is fixed: receive -> process -> store ->
//! (optional attack) -> xApp read -> control. In racy mode the attacker has
//! a modeled compute latency (one gradient evaluation per attack step) and a
//! seeded read deadline decides whether the legitimate xApp sees the
//! perturbed or the clean version.

use super::{LinkParams, LinkSim};
use crate::attack::AttackKind;
use crate::clock::Clock;
use crate::datagen::{JammerProfile, Label, NormBounds};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::ric::{
    encode_message, ControlAction, E2LiteMessage, KpmReport, MsgType, PolicyController,
    ReceiveStamps, RicDb, TimingRecord,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::xapps::{InterClassXapp, MaliciousXapp, XappStep, XappVariant};
use rand::Rng as _;

/// The 180-second two-phase experiment timeline.
#[derive(Debug, Clone)]
pub struct ScenarioSchedule {
    pub total_s: u64,
    pub clean_s: u64,
    pub jam_gain_db: f64,
    pub kpm_interval_ms: u64,
    /// 0 disables the I/Q path.
    pub iq_interval_ms: u64,
}

impl Default for ScenarioSchedule {
    fn default() -> Self {
        ScenarioSchedule {
            total_s: 180,
            clean_s: 90,
            jam_gain_db: 40.0,
            kpm_interval_ms: 1000,
            iq_interval_ms: 2000,
        }
    }
}

impl ScenarioSchedule {
    pub fn jam_s(&self) -> u64 {
        self.total_s - self.clean_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.clean_s > self.total_s {
            return Err(Error::invalid("clean phase longer than the schedule"));
        }
        if self.kpm_interval_ms == 0 && self.iq_interval_ms == 0 {
            return Err(Error::invalid("at least one data path must be enabled"));
        }
        Ok(())
    }
}

/// Attacker latency model for racy mode.
#[derive(Debug, Clone)]
pub struct RacyAttackerParams {
    /// Fixed overhead before the attack starts, ms.
    pub base_cost_ms: f64,
    /// Cost of one gradient evaluation, ms; an N-step attack pays N of them.
    pub grad_eval_cost_ms: f64,
    /// The legitimate xApp reads at store time plus a uniform draw from this
    /// range, ms.
    pub read_deadline_ms: (f64, f64),
}

impl Default for RacyAttackerParams {
    fn default() -> Self {
        RacyAttackerParams {
            base_cost_ms: 3.0,
            grad_eval_cost_ms: 12.0,
            read_deadline_ms: (10.0, 70.0),
        }
    }
}

/// Everything one closed-loop run needs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub schedule: ScenarioSchedule,
    pub variant: XappVariant,
    pub seed: u64,
    pub attack_enabled: bool,
    pub attack_kind: AttackKind,
    pub attack_epsilon: f64,
    /// `None` pins the attacker between store and read (worst case).
    pub racy: Option<RacyAttackerParams>,
    /// Stacked windows for the KPM path.
    pub kpm_t: usize,
    pub tick_ms: u64,
    pub link: LinkParams,
    pub bounds: NormBounds,
}

impl ScenarioConfig {
    pub fn new(variant: XappVariant, seed: u64) -> ScenarioConfig {
        let schedule = match variant {
            XappVariant::Spec => ScenarioSchedule::default(),
            XappVariant::Kpm => ScenarioSchedule { iq_interval_ms: 0, ..Default::default() },
        };
        ScenarioConfig {
            schedule,
            variant,
            seed,
            attack_enabled: false,
            attack_kind: AttackKind::Pgd,
            attack_epsilon: 0.1,
            racy: None,
            kpm_t: 1,
            tick_ms: 100,
            link: LinkParams::default(),
            bounds: NormBounds::default(),
        }
    }

    pub fn with_attack(mut self, kind: AttackKind, epsilon: f64) -> ScenarioConfig {
        self.attack_enabled = true;
        self.attack_kind = kind;
        self.attack_epsilon = epsilon;
        self
    }
}

/// One per-tick sample of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRow {
    pub tick: u64,
    pub clock_ms: u64,
    pub sinr_db: f64,
    pub mcs: u8,
    pub bler: f64,
    pub throughput_mbps: f64,
    pub jam_phase: bool,
    pub decision: Option<ControlAction>,
}

/// One classification decision.
#[derive(Debug, Clone)]
pub struct DecisionRow {
    pub clock_ms: u64,
    pub version: u64,
    pub class: usize,
    pub truth: Label,
    pub action: ControlAction,
}

/// Complete record of a run.
#[derive(Debug, Clone, Default)]
pub struct ScenarioTrace {
    pub ticks: Vec<TickRow>,
    pub decisions: Vec<DecisionRow>,
    pub timing: Vec<TimingRecord>,
    /// Versions written by the malicious xApp.
    pub perturbed_versions: Vec<u64>,
    /// FNV-1a hash of each RAN-to-RIC message, in order.
    pub ran_msg_hashes: Vec<u64>,
    /// Tick index of the first decision made on perturbed data.
    pub first_perturbed_read_tick: Option<u64>,
    /// Racy mode: stored entries the attacker tried to beat, and won.
    pub attacker_attempts: u64,
    pub attacker_wins: u64,
}

impl ScenarioTrace {
    /// Fraction of decisions whose cause matches the ground-truth jammer
    /// state at read time.
    pub fn decision_accuracy(&self) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        let ok = self.decisions.iter().filter(|d| d.truth.class_index() == d.class).count();
        ok as f64 / self.decisions.len() as f64
    }

    pub fn jam_phase_rows(&self) -> impl Iterator<Item = &TickRow> {
        self.ticks.iter().filter(|r| r.jam_phase)
    }

    pub fn mean_jam_throughput(&self) -> f64 {
        let v: Vec<f64> = self.jam_phase_rows().map(|r| r.throughput_mbps).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Deterministic CSV: tick, clock_ms, sinr, mcs, bler, throughput,
    /// decision, phase.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,clock_ms,sinr_db,mcs,bler,throughput_mbps,decision,phase\n");
        for r in &self.ticks {
            let decision = match r.decision {
                Some(ControlAction::FixedMaxMcs) => "fixed_max_mcs",
                Some(ControlAction::AdaptiveMcs) => "adaptive_mcs",
                None => "",
            };
            out.push_str(&format!(
                "{},{},{:.6},{},{:.6},{:.6},{},{}\n",
                r.tick,
                r.clock_ms,
                r.sinr_db,
                r.mcs,
                r.bler,
                r.throughput_mbps,
                decision,
                if r.jam_phase { "jam" } else { "clean" }
            ));
        }
        out
    }
}

/// Drive the full closed loop on a virtual clock. Bit-reproducible for a
/// given (config, seed).
pub fn run_scenario(model: &Model, cfg: &ScenarioConfig) -> Result<ScenarioTrace> {
    cfg.schedule.validate()?;
    if cfg.tick_ms == 0 {
        return Err(Error::invalid("tick_ms must be positive"));
    }
    let clock = Clock::virtual_clock();
    let db = RicDb::new(clock.clone());
    let mut controller = PolicyController::new(
        db.handle("controller", true, true),
        clock.clone(),
        cfg.kpm_t,
        4,
        cfg.bounds,
    );
    let mut xapp = InterClassXapp::new(
        cfg.variant,
        model.clone(),
        db.handle("interclass", true, false),
        clock.clone(),
    );
    let mut malicious = cfg.attack_enabled.then(|| {
        MaliciousXapp::targeted_soi(
            cfg.variant,
            cfg.attack_kind,
            cfg.attack_epsilon,
            model.clone(),
            db.handle("malicious", true, true),
        )
    });
    let mut link = LinkSim::new(
        cfg.link.clone(),
        cfg.seed,
        if cfg.schedule.kpm_interval_ms == 0 { u64::MAX / 4 } else { cfg.schedule.kpm_interval_ms },
        if cfg.schedule.iq_interval_ms == 0 { u64::MAX / 4 } else { cfg.schedule.iq_interval_ms },
    )?;
    let mut racy_rng = rng_from_seed(derive_seed(cfg.seed, "racy-deadlines", 0));

    let mut trace = ScenarioTrace::default();
    let total_ticks = cfg.schedule.total_s * 1000 / cfg.tick_ms;
    let mut kpm_seq: u32 = 0;
    let attack_steps = match cfg.attack_kind {
        AttackKind::Fgsm => 1,
        AttackKind::Pgd => 5,
    };

    for tick in 0..total_ticks {
        let elapsed_ms = tick * cfg.tick_ms;
        let jam_phase = elapsed_ms >= cfg.schedule.clean_s * 1000;
        let jammer = if jam_phase {
            JammerProfile::on(cfg.schedule.jam_gain_db)?
        } else {
            JammerProfile::off()
        };
        link.set_jammer(jammer);
        clock.advance_ms(cfg.tick_ms);
        let (state, kpm, frame) = link.link_step(cfg.tick_ms)?;

        // RAN -> RIC indications for whatever the link emitted this tick
        let mut stored_refs = Vec::new();
        if let Some(frame) = frame {
            let msg = E2LiteMessage::new(MsgType::IndIq, frame.to_bytes());
            trace.ran_msg_hashes.push(fnv1a(&encode_message(&msg)?));
            let now = clock.now_ms();
            let stamps =
                ReceiveStamps { start_ms: now, done_ms: now, bytes: msg.payload.len() };
            if let Some(r) = controller.handle_indication(&msg, stamps)? {
                stored_refs.push(r);
            }
        }
        if let Some(sample) = kpm {
            let msg =
                E2LiteMessage::new(MsgType::IndKpm, KpmReport::from_sample(&sample, kpm_seq).encode().to_vec());
            kpm_seq = kpm_seq.wrapping_add(1);
            trace.ran_msg_hashes.push(fnv1a(&encode_message(&msg)?));
            let now = clock.now_ms();
            let stamps = ReceiveStamps { start_ms: now, done_ms: now, bytes: msg.payload.len() };
            if let Some(r) = controller.handle_indication(&msg, stamps)? {
                stored_refs.push(r);
            }
        }

        // the attacker runs between store and read; in racy mode a seeded
        // deadline decides whether it finishes in time
        for stored in &stored_refs {
            if stored.key != cfg.variant.data_key() {
                continue;
            }
            if let Some(mal) = malicious.as_mut() {
                let wins = match &cfg.racy {
                    None => true,
                    Some(racy) => {
                        trace.attacker_attempts += 1;
                        let finish = racy.base_cost_ms
                            + racy.grad_eval_cost_ms * attack_steps as f64;
                        let deadline = racy_rng
                            .gen_range(racy.read_deadline_ms.0..racy.read_deadline_ms.1);
                        finish <= deadline
                    }
                };
                if wins {
                    if cfg.racy.is_some() {
                        trace.attacker_wins += 1;
                    }
                    if let Some(v) = mal.step()? {
                        trace.perturbed_versions.push(v);
                    }
                }
            }
        }

        // the legitimate xApp reads after the attacker had its chance
        let mut tick_decision = None;
        if let XappStep::Decision { decision, class, version, .. } = xapp.step()? {
            let record_idx = stored_refs
                .iter()
                .find(|r| r.key == cfg.variant.data_key())
                .map(|r| r.record_idx);
            if let Some(idx) = record_idx {
                controller.mark_inference(idx);
            }
            let _control_msg = controller.send_control(&decision, record_idx);
            link.apply_control(&decision);
            if let Some(idx) = record_idx {
                controller.mark_ack(idx);
            }
            if trace.perturbed_versions.contains(&version)
                && trace.first_perturbed_read_tick.is_none()
            {
                trace.first_perturbed_read_tick = Some(tick);
            }
            trace.decisions.push(DecisionRow {
                clock_ms: state.clock_ms,
                version,
                class,
                truth: state.ground_truth(),
                action: decision.action,
            });
            tick_decision = Some(decision.action);
        }

        let post = link.state();
        trace.ticks.push(TickRow {
            tick,
            clock_ms: post.clock_ms,
            sinr_db: post.sinr_db,
            mcs: post.mcs,
            bler: post.bler,
            throughput_mbps: post.throughput_mbps,
            jam_phase,
            decision: tick_decision,
        });
    }
    trace.timing = controller.take_records();
    Ok(trace)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
