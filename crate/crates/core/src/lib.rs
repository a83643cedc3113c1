pub mod cli;
pub mod dynamics;
pub mod measures;
pub mod oracle;
pub mod potentials;
pub mod reflectionless;
pub mod schrodinger;
pub mod weyl;
