pub mod agent;
pub mod decomposition;
pub mod interval;
pub mod lp;
