pub mod batting_opt;
pub mod bowling_opt;
pub mod engine;
pub mod ingest;
pub mod outcome;
pub mod profiles;
pub mod report;
pub mod rng;
pub mod scenario;
