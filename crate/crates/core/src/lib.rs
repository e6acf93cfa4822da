pub mod audit;
pub mod determinant;
pub mod error;
pub mod green;
pub mod lattice;
pub mod oracle;
pub mod registry;
pub mod spectral;
pub mod zeros;
