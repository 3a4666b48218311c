pub mod eval;
pub mod experiment;
pub mod fake_cond;
pub mod gen_dataset;
pub mod gen_rirs;
pub mod inspect;
pub mod train;
