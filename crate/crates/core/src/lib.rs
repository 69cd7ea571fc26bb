pub mod bellstats;
pub mod cli;
pub mod lhv;
pub mod predictor;
pub mod report;
pub mod streamhub;
