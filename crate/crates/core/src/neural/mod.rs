//! Hand-derived building blocks for the fixed model graph: GCN layers with
//! an explicit tape, pooling readouts and the Adam optimizer.

mod adam;
mod gcn;
mod readout;

pub use adam::{adam_step, AdamState};
pub use gcn::{gcn_backward, gcn_forward, sigmoid, Activation, GcnLayer, Tape};
pub use readout::{readout, readout_backward, readout_rows, Readout, ReadoutTrace};
