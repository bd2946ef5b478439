pub mod freqdyn;
pub mod freqsec;
pub mod milp;
pub mod scheduler;
pub mod sysmodel;
