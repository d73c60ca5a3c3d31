//! Tree dynamic programming on a simulated MPC cluster.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`]: round-synchronous cluster simulator with word budgets.
//! * [`khash`]: k-wise independent hashing onto machines.
//! * [`tree`]: trees, file formats, generators, sharding.
//! * [`binary_ext`]: bounded-degree and binary extensions of a tree.
//! * [`decomposition`]: randomized contraction into connected components.
//! * [`dp`]: plugin contracts for compressing and merging partial data.
//! * [`polylog`]: matching, independent set, vertex cover, longest path,
//!   dominating set.
//! * [`linear`]: minimum bisection and k-spanning tree.
//! * [`kmedian`]: k-median and k-center.
//! * [`geo`]: closest pair and minimum spanning trees.

pub mod binary_ext;
pub mod decomposition;
pub mod dp;
pub mod geo;
pub mod khash;
pub mod kmedian;
pub mod linear;
pub mod polylog;
pub mod sim;
pub mod tree;
pub mod value;
