pub mod airlink;
pub mod complexla;
pub mod receivers;
pub mod chest;
pub mod analysis;
pub mod xpcli;
