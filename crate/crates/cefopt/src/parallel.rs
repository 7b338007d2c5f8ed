//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan out over rayon;
//! without it they run plain sequential loops. Results are identical either
//! way: outputs are collected in input order and all floating-point
//! reductions happen downstream in fixed order.

/// Map `f` over mutable items, in parallel when `par` is set and the feature
/// is enabled. Output order matches input order.
#[cfg(feature = "parallel")]
pub fn map_workers<T, R, F>(items: &mut [T], par: bool, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync,
{
    use rayon::prelude::*;
    if par {
        items.par_iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    } else {
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_workers<T, R, F>(items: &mut [T], _par: bool, f: F) -> Vec<R>
where
    F: Fn(usize, &mut T) -> R,
{
    items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Map `f` over owned jobs, in parallel when the feature is enabled and
/// `jobs != 1`. Used for sweep execution where every run is independent.
/// `jobs = 0` ([`JOBS_AUTO`]) runs on the global pool, so callers that cap
/// concurrency once (e.g. a `--jobs` flag) govern every auto map; any other
/// value builds a dedicated pool of that size.
#[cfg(feature = "parallel")]
pub fn map_jobs<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match jobs {
        1 => items.into_iter().map(f).collect(),
        0 => items.into_par_iter().map(f).collect(),
        _ => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("rayon pool");
            pool.install(|| items.into_par_iter().map(f).collect())
        }
    }
}

/// Cap the global pool (first call wins; later calls are ignored). No-op
/// without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn limit_global_threads(jobs: usize) {
    if jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn limit_global_threads(_jobs: usize) {}

#[cfg(not(feature = "parallel"))]
pub fn map_jobs<T, R, F>(items: Vec<T>, _jobs: usize, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// `map_jobs` with `jobs = 0` meaning "let rayon pick".
pub const JOBS_AUTO: usize = 0;
