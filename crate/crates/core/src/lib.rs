pub mod access;
pub mod decomposition;
pub mod hypergraph;
pub mod oracle;
pub mod query;
pub mod storage;
pub mod wcoj;
