pub mod calib;
pub mod camera;
pub mod fit;
pub mod ingest;
pub mod lm;
pub mod metrics;
pub mod physics;
pub mod pipeline;
pub mod synth;
