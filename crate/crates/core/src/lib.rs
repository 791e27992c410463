//! Curve-constrained search for non-uniform per-layer quantization.
//!
//! A network's per-layer bit widths are drawn from a low-degree curve
//! ([`curvespace`]), so a search over `8^n` configurations becomes a search
//! over a handful of curve weights. Accuracy across training-epoch
//! fidelities is modelled with a multi-task Gaussian process ([`mtgp`]),
//! the space is explored by information gain per unit cost ([`explorer`]),
//! and candidate configurations are ranked by effective accuracy and
//! memory ([`decision`]). Weights are quantized blockwise ([`quant`]) and
//! accuracy oracles are pluggable ([`objective`]).
//!
//! The `curvequant` binary ([`cli`]) wires these together; the crate's
//! `examples/` directory has one runnable program per capability.

pub mod cli;
pub mod config;
pub mod curvespace;
pub mod decision;
pub mod error;
pub mod explorer;
pub mod mtgp;
pub mod objective;
pub mod quant;

mod linalg;
mod optim;
mod schema;

pub use curvespace::{BitConfig, CurveBasis, CurveParams, LayerGrid};
pub use error::{Error, Result};
