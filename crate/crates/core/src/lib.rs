//! Metalens design and single-atom tweezer simulation.

pub mod dynamics;
pub mod fit;
pub mod io;
pub mod lens;
pub mod polarization;
pub mod propagation;
pub mod tweezer;
