//! Behavioral model of a zero-skipping (Oz) multiply-accumulate unit.
//!
//! - [`encoder`]: one-hot encoding of an operand's set bits, MSB first
//! - [`macsim`]: cycle-level OzMAC and single-cycle bMAC simulation
//! - [`profiler`]: OZTD tensor files and weight bit-sparsity statistics
//! - [`ppamodel`]: calibrated area/power/latency/energy model
//! - [`cli`]: the `ozmac` command line
//!
//! Sweeps run on rayon when the `parallel` feature is enabled (the default)
//! and sequentially otherwise; results are identical.

pub mod cli;
pub mod encoder;
pub mod error;
pub mod macsim;
pub mod par;
pub mod ppamodel;
pub mod profiler;
pub mod types;

pub use encoder::{cycle_count, oz_decode, oz_encode, EncodedStream, OneHotTerm, OzEncoder};
pub use error::{Error, Result};
pub use macsim::{
    average_cycles, bmac_compute, dot_product, ozmac_compute, DotProduct, MacEvent, MacTrace, Unit,
};
pub use ppamodel::{
    crossover_sparsity, energy_per_mac, energy_vs_sparsity, improvement_pct, iso_latency_frequency,
    precision_sweep, scale_frequency, CalibrationTable, PpaRecord,
};
pub use profiler::{bit_sparsity, load_tensor, model_report, SparsityReport, TensorFile};
pub use types::{
    validate_operand, AccumulatorState, BitWidth, Operand, PrecisionConfig, Role, Signedness,
};
