//! Debug-build guard against accidentally materializing dense per-layer state.
//!
//! The training path must never allocate memory proportional to the dense
//! weight count of a layer. Code that is allowed to (the dense-gradient
//! baseline, benchmarks, test oracles) holds a [`DenseAllowance`] token while
//! it runs.

use std::cell::Cell;

thread_local! {
    static DENSE_ALLOWED: Cell<u32> = const { Cell::new(0) };
}

/// RAII token permitting dense-sized allocations on the current thread.
#[must_use = "the allowance lasts only while the token is alive"]
pub struct DenseAllowance(());

/// Permit dense-sized allocations until the returned token is dropped.
pub fn allow_dense() -> DenseAllowance {
    DENSE_ALLOWED.with(|c| c.set(c.get() + 1));
    DenseAllowance(())
}

impl Drop for DenseAllowance {
    fn drop(&mut self) {
        DENSE_ALLOWED.with(|c| c.set(c.get() - 1));
    }
}

/// Whether a dense allowance is currently held on this thread.
pub fn dense_allowed() -> bool {
    DENSE_ALLOWED.with(|c| c.get() > 0)
}

/// Debug assertion that a sparse-path allocation of `elems` elements stays
/// clearly below the dense element count of the owning layer. Layers too
/// small for the distinction to mean anything are exempt.
#[inline]
pub fn assert_sparse_alloc(elems: usize, dense_elems: usize) {
    debug_assert!(
        dense_allowed() || dense_elems < 4096 || elems < dense_elems / 2,
        "sparse path allocated {elems} elements on a layer with dense size {dense_elems}"
    );
}
