pub mod bench;
pub mod data;
pub mod impute;
pub mod inspect;
pub mod train;
