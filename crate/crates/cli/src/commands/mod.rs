pub mod compare;
pub mod generate;
pub mod prep;
pub mod synth;
pub mod train;
pub mod validate;
