//! Minimal reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every forward operation as a node; [`Graph::backward`]
//! replays the tape in reverse. Only the handful of primitives the summarizer
//! needs are provided, and broadcasting is limited to [`Graph::add_row`] and
//! [`Graph::scale`].

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, ParamCheck};
pub use graph::{Graph, Var};
pub use params::{ParamId, ParamSet};
pub use tensor::Tensor;
