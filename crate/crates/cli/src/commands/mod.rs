pub mod bench;
pub mod fetch;
pub mod reproduce;
pub mod sweep;
pub mod train;
