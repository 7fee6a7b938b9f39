//! Simulation of rolling-shutter stripe triggers produced by a modulated LED,
//! black-box search over the LED drive parameters, an attack evaluation
//! harness for face verification, and a destriping defense.

// `!(a >= b)` comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defense;
pub mod error;
pub mod harness;
pub mod image;
pub mod optimizer;
pub mod oracle;
pub mod sensor;
pub mod trigger;
pub mod waveform;

pub use error::{Error, Result};
pub use image::{ImageBuffer, Mask};
pub use sensor::{Orientation, SensorConfig, StripeField};
pub use trigger::TriggerSpec;
pub use waveform::{ChannelWaveform, LedWaveform, WaveformKind};
