//! Device-free occupancy sensing from Wi-Fi RSSI time series.
//!
//! Sessions of per-detector signal strength are split into fixed windows,
//! summarized into feature vectors and fed to noise-calibrated presence
//! detectors or supervised people-counting classifiers. A small scene
//! simulator generates labeled sessions for calibration and testing.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod counting;
pub mod error;
pub mod features;
pub mod presence;
pub mod session;
pub mod simulator;

pub use error::{Error, Result};
pub use session::{
    align_series, assemble_session, split_windows, DetectorId, DetectorSeries, Label, RssiRecord,
    Session, Window, WindowSet,
};
