//! Data-parallel helpers.
//!
//! Every analysis that fans out over a frontier or a batch of inputs goes
//! through [`Parallelism`]. With the `parallel` feature disabled, or with
//! [`Parallelism::Sequential`], the same closures run on the calling thread
//! and produce identical results in identical order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch work is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Run on a rayon pool with this many workers; `0` uses the global pool.
    Threads(usize),
}

impl Parallelism {
    /// Maps `threads` as given on a command line: `1` is sequential.
    pub fn from_threads(threads: usize) -> Self {
        if threads == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Threads(threads)
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Parallelism::Sequential)
    }

    /// Runs `f` inside the configured pool.
    pub fn install<R, F>(&self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        #[cfg(feature = "parallel")]
        if let Parallelism::Threads(n) = *self {
            if n > 0 {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    return pool.install(f);
                }
            }
        }
        f()
    }

    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && items.len() > 1 {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// True iff `pred` holds for every item. Short-circuits in both modes.
    pub fn all<T, F>(&self, items: &[T], pred: F) -> bool
    where
        T: Sync,
        F: Fn(&T) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && items.len() > 1 {
            return items.par_iter().all(pred);
        }
        items.iter().all(pred)
    }

    /// Index of the first item (in slice order) satisfying `pred`.
    pub fn position_first<T, F>(&self, items: &[T], pred: F) -> Option<usize>
    where
        T: Sync,
        F: Fn(&T) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && items.len() > 1 {
            return items.par_iter().position_first(pred);
        }
        items.iter().position(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Parallelism::Sequential.map(&items, |x| x * x);
        let par = Parallelism::Threads(4).install(|| Parallelism::Threads(4).map(&items, |x| x * x));
        assert_eq!(seq, par);
        assert_eq!(
            Parallelism::Sequential.position_first(&items, |x| *x > 500),
            Parallelism::Threads(0).position_first(&items, |x| *x > 500)
        );
        assert!(Parallelism::Threads(0).all(&items, |x| *x < 1000));
    }
}
