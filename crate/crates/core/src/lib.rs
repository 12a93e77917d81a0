pub mod concepts;
pub mod exec_det;
pub mod evaluation;
pub mod exec_prob;
pub mod io;
pub mod perception;
pub mod program;
pub mod questions;
pub mod sampler;
pub mod scene;
pub mod seed;
