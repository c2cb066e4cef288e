//! Multi-agent path finding with continuous time and geometric agents.

pub mod ccbs;
pub mod encoder;
pub mod geometry;
pub mod io;
pub mod model;
pub mod rdd;
pub mod report;
pub mod sat;
pub mod sipp;
pub mod smtcbs;
