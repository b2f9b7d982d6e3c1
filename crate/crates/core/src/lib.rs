pub mod inference;
pub mod series;
pub mod stl;
pub mod changepoint;
pub mod geo;
pub mod ingest;
pub mod segreg;
pub mod synthetic;
pub mod cli;
