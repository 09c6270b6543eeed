pub mod activation;
pub mod bias;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod reducibility;
pub mod report;
pub mod spectral;
