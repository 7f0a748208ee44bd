//! Extension-closed subcategories of maximal Cohen–Macaulay modules over
//! hypersurface singularities of finite and countable representation type.

pub mod catalog;
pub mod closure;
pub mod lattice;
pub mod linalg;
pub mod matfac;
pub mod rules;
pub mod series_ring;

pub mod exec;
