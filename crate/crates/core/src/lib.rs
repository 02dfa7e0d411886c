//! Exact homotopy invariants of finite bicomplexes over the rationals, and
//! linear Hirsch extensions of degree-truncated bigraded algebras.

pub mod bicomplex;
pub mod decomp;
pub mod exactq;
pub mod hirsch;
pub mod morphism;
pub mod par;
pub mod random;
