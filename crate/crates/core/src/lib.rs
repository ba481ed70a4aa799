pub mod baselines;
pub mod ibd;
pub mod master;
pub mod netmodel;
pub mod solvecore;
