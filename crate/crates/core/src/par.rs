//! Order-preserving map over a batch, on a rayon pool when the `parallel`
//! feature is on and sequentially otherwise.

#[cfg(feature = "parallel")]
pub(crate) struct Pool {
    inner: Option<rayon::ThreadPool>,
}

#[cfg(feature = "parallel")]
impl Pool {
    pub(crate) fn new(workers: usize) -> Pool {
        let inner = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
        });
        Pool { inner }
    }

    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        match &self.inner {
            Some(pool) if items.len() > 1 => pool.install(|| items.par_iter().map(f).collect()),
            _ => items.iter().map(f).collect(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) struct Pool;

#[cfg(not(feature = "parallel"))]
impl Pool {
    pub(crate) fn new(_workers: usize) -> Pool {
        Pool
    }

    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }
}
