//! Metrics and experiments on reservoirs and predictions.

pub mod decay;
pub mod metrics;
pub mod plot;
pub mod spectrum;
pub mod sweep;

pub use decay::{measure_decay_time, DecayConfig, DecayResult};
pub use metrics::{fit_line, mean, median, nrmse, stderr, LineFit};
pub use spectrum::{delay_embed, power_spectrum, BoundingBox, SpectrumResult};
pub use sweep::{run_sweep, write_sweep_csv, SweepAxis, SweepGrid, SweepPoint};
