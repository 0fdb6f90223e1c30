pub mod audio_io;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod models;
pub mod pipeline;
