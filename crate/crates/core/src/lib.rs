//! Sequence-consistency evaluation (SCE) tests solved by naive networks.
//!
//! A test shows five gray-scale images whose one feature follows a simple
//! rule, plus four candidate continuations. A freshly initialized network
//! takes a single optimization step on the sequence and then picks the
//! candidate that keeps its loss lowest. The same machinery scores frames
//! of a video for anomalies.

pub mod anomaly;
pub mod autodiff;
pub mod gen;
pub mod models;
pub mod seed;
pub mod solver;
