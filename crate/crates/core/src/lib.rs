//! Neural estimation of differential entropy and mutual information.
pub mod matrix;
pub mod nn;
pub mod distributions;
pub mod estimators;
pub mod trainer;
pub mod experiment;
