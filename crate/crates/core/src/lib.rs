//! Desk-scale closed-loop simulation of an O-RAN near-RT RIC under
//! adversarial machine-learning attack.
//!
//! A simulated RAN feeds I/Q spectrograms and key performance metrics (KPMs)
//! through a framed E2-lite protocol into an in-memory RIC database. A
//! legitimate interference-classification xApp and a malicious white-box
//! adversarial xApp contend over the stored test data; distillation-based
//! defenses restore classifier and network performance.
//!
//! Module map:
//! - [`tensor`] / [`nn`]: f64 tensors, the layer engine, SGD, input gradients;
//! - [`models`]: the spectrogram CNN and KPM DNN, plus `.orml` serialization;
//! - [`attack`]: targeted/untargeted FGSM and N-step PGD;
//! - [`distill`]: defensive distillation and the adversarial-training baseline;
//! - [`datagen`]: synthetic I/Q frames, spectrograms, KPM windows, datasets;
//! - [`ric`]: E2-lite codec, versioned RIC database with SDL handles, policy
//!   controller;
//! - [`xapps`]: the legitimate and malicious xApps;
//! - [`simnet`]: the parametric uplink link model and scenario driver;
//! - [`experiment`]: sweeps, closed-loop report bundles, timing breakdowns.

pub mod attack;
pub mod clock;
pub mod datagen;
pub mod distill;
pub mod error;
pub mod experiment;
pub mod models;
pub mod nn;
pub mod ric;
pub mod rng;
pub mod simnet;
pub mod tensor;
pub mod xapps;

pub use error::{Error, Result};
pub use nn::{Dataset, Model, TrainConfig};
pub use tensor::Tensor;
