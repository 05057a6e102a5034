//! Small CPU 3D U-Net with hand-written reverse-mode gradients, ADAM, and
//! the training loop.

mod kernels;
mod net;
mod state;
mod train;

pub use kernels::{FlushSubnormals, Real};
pub use net::{ConvLayer, NetConfig, Network, Pass};
pub use state::{AdamConfig, NetState, NET_MAGIC};
pub use train::{loss_trace_csv, predict, slice_plan, train, Supervision, TrainConfig, TrainOutcome, TrainSample, DESK_LEARNING_RATE};
