//! Analysis toolkit for proper polynomial self-maps of C^k with block
//! lower-triangular degree structure: exact regularity certificates via
//! Newton polygons and resultants, escape-rate and Green-function dynamics
//! in log-scaled coordinates, preimage enumeration and equilibrium-measure
//! sampling by inverse iteration, and slice-based measure diagnostics.

pub mod corpus;
pub mod dynamics;
pub mod gaussian;
pub mod measures;
pub mod mp;
pub mod parser;
pub mod poly;
pub mod preimage;
pub mod regularity;
pub mod resultant;
pub mod scaled;
pub mod cli;
