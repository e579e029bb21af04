pub mod cli;
pub mod distortion;
pub mod image;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod tensor;
