//! Order-preserving data-parallel map, gated on the `parallel` feature.
//!
//! All call sites map independent work items (trees, test items) to results
//! and collect in index order, so the parallel and sequential builds produce
//! bit-identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps a fallible `f` over `0..n`, short-circuiting on the first error.
#[cfg(feature = "parallel")]
pub(crate) fn try_map_indices<U, E, F>(n: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps a fallible `f` over `0..n`, short-circuiting on the first error.
#[cfg(not(feature = "parallel"))]
pub(crate) fn try_map_indices<U, E, F>(n: usize, f: F) -> Result<Vec<U>, E>
where
    F: Fn(usize) -> Result<U, E>,
{
    (0..n).map(f).collect()
}
