//! Quadrature, Lagrange spaces, form assembly and the sparse direct solver.

pub mod assembly;
pub mod element;
pub mod quadrature;
pub mod solver;
pub mod space;
