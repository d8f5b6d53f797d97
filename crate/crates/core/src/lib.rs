// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod chern_weil;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod maps;
pub mod quadrature;
pub mod spectral;
