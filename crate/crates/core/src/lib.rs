pub mod anon;
pub mod assoc;
pub mod distfit;
pub mod ingest;
pub mod join;
pub mod dimstats;
pub mod report;
