//! Synchronous layers around the reservoir: fixed-point input encoding, the
//! trained linear readout and closed-loop prediction.

pub mod closed_loop;
pub mod fixed_point;
pub mod readout;

pub use closed_loop::{design_matrix, run_closed_loop, ClockedReservoir, ClockedRun};
pub use fixed_point::{dequantize, expand_input_weights, quantize, FixedPointWord, InputScaling};
pub use readout::{default_ridge_grid, ridge_train, select_ridge_loo, TrainedReadout};
