pub mod error;
pub mod lex;
pub mod poset;

pub use error::{Error, Result};
pub mod semilinear;
pub mod rexpr;
pub mod dgraph;
pub mod membership;
pub mod coloring;
pub mod pmso;
pub mod corpus;
pub mod crosscheck;
