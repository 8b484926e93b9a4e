//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled (the default), loops fan out through
//! rayon when the caller asks for it; without the feature they always run
//! sequentially. Results are identical either way: every slot is a pure
//! function of its index.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fills `out[i] = f(i)` for every index, optionally in parallel.
pub fn fill_indexed<F>(out: &mut [f64], parallel: bool, f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = parallel;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}
