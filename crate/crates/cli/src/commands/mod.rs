pub mod bench;
pub mod fastconv;
pub mod solve;
pub mod stability;
pub mod weights;
