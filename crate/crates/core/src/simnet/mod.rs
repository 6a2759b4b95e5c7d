//! Simulated RAN/UE/jammer with a parametric uplink link model.
//!
//! The link produces I/Q buffers and KPM reports, applies MCS control
//! decisions, and yields throughput/BLER traces. All constants live in
//! [`LinkParams`]; they are calibration choices exercised only through
//! directional and ordering properties.

pub mod scenario;

pub use scenario::{
    run_scenario, DecisionRow, RacyAttackerParams, ScenarioConfig, ScenarioSchedule,
    ScenarioTrace, TickRow,
};

use crate::datagen::{IqFrame, JammerProfile, KpmSample, Label};
use crate::error::{Error, Result};
use crate::ric::{ControlAction, ControlDecision};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use rand_distr::{Distribution, Normal};

/// Highest MCS index.
pub const MAX_MCS: u8 = 28;

/// Per-MCS SINR thresholds and peak rates at 25 PRBs. Both columns are
/// strictly increasing in the MCS index.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    thresholds_db: Vec<f64>,
    peak_mbps: Vec<f64>,
}

impl Default for McsTable {
    fn default() -> Self {
        // threshold: -6 dB (MCS 0) rising 1 dB per index to 22 dB (MCS 28);
        // peak rate: 0.4 Mbps rising 0.77 Mbps per index to ~22 Mbps
        let thresholds_db = (0..=MAX_MCS).map(|m| -6.0 + f64::from(m)).collect();
        let peak_mbps = (0..=MAX_MCS).map(|m| 0.4 + 0.77 * f64::from(m)).collect();
        McsTable { thresholds_db, peak_mbps }
    }
}

impl McsTable {
    pub fn threshold_db(&self, mcs: u8) -> f64 {
        self.thresholds_db[usize::from(mcs.min(MAX_MCS))]
    }

    pub fn peak_mbps(&self, mcs: u8) -> f64 {
        self.peak_mbps[usize::from(mcs.min(MAX_MCS))]
    }

    /// Largest MCS whose threshold is at or below `sinr_db`; floors at 0.
    pub fn highest_supported(&self, sinr_db: f64) -> u8 {
        let mut best = 0u8;
        for m in 0..=MAX_MCS {
            if self.threshold_db(m) <= sinr_db {
                best = m;
            }
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.thresholds_db) || !increasing(&self.peak_mbps) {
            return Err(Error::invalid("MCS table columns must be strictly increasing"));
        }
        Ok(())
    }
}

/// All link-model constants in one place.
#[derive(Debug, Clone)]
pub struct LinkParams {
    /// Clean-condition mean SINR.
    pub base_sinr_db: f64,
    /// SINR penalty when jammed at 40 dB gain; scales linearly down to 30 dB.
    pub jam_penalty_at_40db: f64,
    /// Slope of the penalty in dB per dB of jammer gain.
    pub jam_penalty_slope: f64,
    /// Per-tick Gaussian SINR noise.
    pub noise_sigma_db: f64,
    /// Steepness of the BLER logistic.
    pub logistic_k: f64,
    /// Back-off below measured SINR when adapting the MCS.
    pub adaptive_margin_db: f64,
    pub mcs: McsTable,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            base_sinr_db: 25.0,
            jam_penalty_at_40db: 27.0,
            jam_penalty_slope: 1.0,
            noise_sigma_db: 1.5,
            logistic_k: 1.2,
            adaptive_margin_db: 3.0,
            mcs: McsTable::default(),
        }
    }
}

impl LinkParams {
    pub fn jam_penalty_db(&self, gain_db: f64) -> f64 {
        self.jam_penalty_at_40db - (40.0 - gain_db) * self.jam_penalty_slope
    }

    /// BLER from the logistic curve: 0.5 exactly at the MCS threshold,
    /// falling as SINR rises above it.
    pub fn bler(&self, sinr_db: f64, mcs: u8) -> f64 {
        1.0 / (1.0 + (self.logistic_k * (sinr_db - self.mcs.threshold_db(mcs))).exp())
    }
}

/// Instantaneous uplink condition.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub sinr_db: f64,
    pub mcs: u8,
    pub bler: f64,
    pub throughput_mbps: f64,
    pub jammer: JammerProfile,
    pub clock_ms: u64,
}

impl LinkState {
    /// The KPM report for this state: fields are exactly the state's, never
    /// stale.
    pub fn to_kpm_sample(&self) -> KpmSample {
        KpmSample {
            ul_sinr_db: self.sinr_db,
            bitrate_mbps: self.throughput_mbps,
            bler: self.bler,
            mcs: self.mcs,
        }
    }

    pub fn ground_truth(&self) -> Label {
        self.jammer.label()
    }
}

/// The simulated uplink. Owns its RNG so noise is seeded and reproducible.
pub struct LinkSim {
    params: LinkParams,
    state: LinkState,
    rng: Rng,
    noise: Normal<f64>,
    seed: u64,
    frame_counter: u64,
    kpm_interval_ms: u64,
    iq_interval_ms: u64,
    next_kpm_ms: u64,
    next_iq_ms: u64,
}

impl LinkSim {
    pub fn new(
        params: LinkParams,
        seed: u64,
        kpm_interval_ms: u64,
        iq_interval_ms: u64,
    ) -> Result<LinkSim> {
        params.mcs.validate()?;
        if kpm_interval_ms == 0 || iq_interval_ms == 0 {
            return Err(Error::invalid("emission intervals must be positive"));
        }
        let noise = Normal::new(0.0, params.noise_sigma_db)
            .map_err(|_| Error::invalid("bad noise sigma"))?;
        let state = LinkState {
            sinr_db: params.base_sinr_db,
            mcs: MAX_MCS,
            bler: params.bler(params.base_sinr_db, MAX_MCS),
            throughput_mbps: 0.0,
            jammer: JammerProfile::off(),
            clock_ms: 0,
        };
        let mut sim = LinkSim {
            params,
            state,
            rng: rng_from_seed(derive_seed(seed, "link-noise", 0)),
            noise,
            seed,
            frame_counter: 0,
            kpm_interval_ms,
            iq_interval_ms,
            next_kpm_ms: kpm_interval_ms,
            next_iq_ms: iq_interval_ms,
        };
        sim.refresh_derived();
        Ok(sim)
    }

    pub fn state(&self) -> &LinkState {
        &self.state
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    /// Switch the jammer on (at `gain_db`) or off.
    pub fn set_jammer(&mut self, jammer: JammerProfile) {
        self.state.jammer = jammer;
    }

    /// Advance the link by `dt_ms`: update SINR/BLER/throughput, and emit a
    /// KPM report and/or an I/Q frame when their intervals elapse.
    pub fn link_step(&mut self, dt_ms: u64) -> Result<(LinkState, Option<KpmSample>, Option<IqFrame>)> {
        if dt_ms == 0 {
            return Err(Error::invalid("dt_ms must be positive"));
        }
        self.state.clock_ms += dt_ms;
        let mut sinr = self.params.base_sinr_db + self.noise.sample(&mut self.rng);
        if self.state.jammer.on {
            sinr -= self.params.jam_penalty_db(self.state.jammer.gain_db);
        }
        self.state.sinr_db = sinr;
        self.refresh_derived();

        let kpm = if self.state.clock_ms >= self.next_kpm_ms {
            self.next_kpm_ms += self.kpm_interval_ms;
            Some(self.state.to_kpm_sample())
        } else {
            None
        };
        let frame = if self.state.clock_ms >= self.next_iq_ms {
            self.next_iq_ms += self.iq_interval_ms;
            self.frame_counter += 1;
            let label = self.state.ground_truth();
            Some(crate::datagen::synth_iq_frame(
                label,
                &self.state.jammer,
                derive_seed(self.seed, "iq-emission", self.frame_counter),
            )?)
        } else {
            None
        };
        Ok((self.state.clone(), kpm, frame))
    }

    /// Apply a control decision to the RAN.
    pub fn apply_control(&mut self, decision: &ControlDecision) {
        self.state.mcs = match decision.action {
            ControlAction::FixedMaxMcs => MAX_MCS,
            ControlAction::AdaptiveMcs => self
                .params
                .mcs
                .highest_supported(self.state.sinr_db - self.params.adaptive_margin_db),
        };
        self.refresh_derived();
    }

    fn refresh_derived(&mut self) {
        self.state.bler = self.params.bler(self.state.sinr_db, self.state.mcs);
        self.state.throughput_mbps =
            self.params.mcs.peak_mbps(self.state.mcs) * (1.0 - self.state.bler);
    }
}
