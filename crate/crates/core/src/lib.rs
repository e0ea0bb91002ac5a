pub mod expr;
pub mod linalg;
pub mod problem;
pub mod registry;
pub mod geometry;
pub mod cli;
pub mod firstorder;
pub mod oracle;
pub mod report;
pub mod secondorder;
mod serde_util;
