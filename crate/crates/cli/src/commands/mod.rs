pub mod corpus;
pub mod eval;
pub mod model;
pub mod synth;
pub mod tokens;
