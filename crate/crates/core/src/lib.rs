pub mod algorithms;
pub mod boolsys;
pub mod cli;
pub mod machine;
pub mod qsim;
