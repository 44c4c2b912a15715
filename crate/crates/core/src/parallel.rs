//! Order-preserving fan-out over a stream.

use rayon::prelude::*;

const CHUNK: usize = 8192;

/// Applies `map` to every item, possibly on `jobs` worker threads, and
/// feeds `(index, item, result)` to `sink` in the original stream order.
pub(crate) fn map_ordered<I, T, R, E, M, S>(
    items: I,
    jobs: usize,
    map: M,
    mut sink: S,
) -> Result<(), E>
where
    I: Iterator<Item = T>,
    T: Send + Sync,
    R: Send,
    M: Fn(&T) -> R + Sync,
    S: FnMut(usize, T, R) -> Result<(), E>,
{
    let mut index = 0usize;
    if jobs <= 1 {
        for item in items {
            let r = map(&item);
            sink(index, item, r)?;
            index += 1;
        }
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("worker pool");
    let mut items = items.peekable();
    while items.peek().is_some() {
        let chunk: Vec<T> = items.by_ref().take(CHUNK).collect();
        let results: Vec<R> = pool.install(|| chunk.par_iter().map(&map).collect());
        for (item, r) in chunk.into_iter().zip(results) {
            sink(index, item, r)?;
            index += 1;
        }
    }
    Ok(())
}

/// `GVERIFY_JOBS`-style default: all available cores.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_across_worker_counts() {
        for jobs in [1, 2, 7] {
            let mut seen = Vec::new();
            map_ordered(
                0..20_000u32,
                jobs,
                |x| x * 2,
                |i, x, r| {
                    assert_eq!(i as u32, x);
                    seen.push(r);
                    Ok::<_, ()>(())
                },
            )
            .unwrap();
            assert_eq!(seen, (0..20_000u32).map(|x| x * 2).collect::<Vec<_>>());
        }
    }
}
