pub mod adapter;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod distill;
pub mod partition;
pub mod pubmed;
pub mod sim;
pub mod text;
