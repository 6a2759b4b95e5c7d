//! Near-RT RIC core: E2-lite framed protocol, the RIC database with its SDL
//! access layer, and the policy controller that routes indications and
//! control messages.

mod controller;
mod db;
mod protocol;
pub mod transport;

pub use controller::{
    DataPath, PolicyController, ReceiveStamps, StoredRef, TimingRecord, KEY_KPM_LATEST,
    KEY_SPEC_LATEST,
};
pub use db::{RicDb, RicDbEntry, SdlHandle, HISTORY_DEPTH};
pub use protocol::{
    decode_message, encode_message, E2LiteMessage, FrameDecoder, KpmReport, MsgType, HEADER_LEN,
    IND_IQ_PAYLOAD_LEN, IND_KPM_PAYLOAD_LEN,
};

use crate::datagen::Label;
use crate::error::{Error, Result};

/// RAN-side mitigation selected by the policy controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ControlAction {
    /// No jammer detected: run the highest achievable MCS.
    FixedMaxMcs = 0,
    /// Jammer detected: adapt the MCS to the measured SINR.
    AdaptiveMcs = 1,
}

impl ControlAction {
    pub fn from_byte(b: u8) -> Result<ControlAction> {
        match b {
            0 => Ok(ControlAction::FixedMaxMcs),
            1 => Ok(ControlAction::AdaptiveMcs),
            other => Err(Error::protocol(format!("unknown control action {other}"))),
        }
    }
}

/// A control decision, fully determined by the predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlDecision {
    pub action: ControlAction,
    pub cause: Label,
}

impl ControlDecision {
    /// SOI predictions run fixed max MCS; CWI predictions switch to
    /// adaptive MCS.
    pub fn for_class(class: usize) -> Result<ControlDecision> {
        let cause = Label::from_class_index(class)?;
        let action = match cause {
            Label::Soi => ControlAction::FixedMaxMcs,
            Label::Cwi => ControlAction::AdaptiveMcs,
        };
        Ok(ControlDecision { action, cause })
    }
}
