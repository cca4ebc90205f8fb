pub mod cli;
pub mod pcirc;
