//! Static detection of data races on array elements inside a single
//! OpenMP-style parallel `for` loop.
//!
//! The loop to analyze is marked with `#pragma drs`. For every pair of
//! array accesses that could conflict (write/write or write/read), the
//! detector builds a conjunction of integer constraints: the two accesses
//! come from distinct iterations of the parallel loop, both execute under
//! their branch conditions, they touch the same element, and variables
//! whose values are statically known hold those values. A satisfiable
//! system is a race.

pub mod analysis;
pub mod bench;
pub mod detector;
pub mod encoding;
pub mod expr;
pub mod frontend;
pub mod solver;
