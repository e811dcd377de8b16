pub mod field;
pub mod circuit;
pub mod regex;
pub mod fixtures;
pub mod oracle;
pub mod transpiler;
pub mod inputgen;
pub mod mutator;
pub mod harness;
