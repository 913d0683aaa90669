//! Internal parallelism, capped by the `CM_NETCERT_THREADS` environment
//! variable. All callers aggregate per-chunk results in chunk order, so
//! results are independent of the thread count.

use std::sync::OnceLock;

static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

fn pool() -> &'static Option<rayon::ThreadPool> {
    POOL.get_or_init(|| {
        let threads = std::env::var("CM_NETCERT_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .ok()
    })
}

/// Run a rayon-using closure inside the capped pool (or the global one).
pub fn run<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match pool() {
        Some(p) => p.install(f),
        None => f(),
    }
}

/// Split `0..len` into at most `max_chunks` contiguous ranges.
pub fn chunk_ranges(len: u128, target_chunks: usize) -> Vec<std::ops::Range<u128>> {
    if len == 0 {
        return Vec::new();
    }
    let chunks = (target_chunks.max(1) as u128).min(len);
    let base = len / chunks;
    let extra = len % chunks;
    let mut out = Vec::with_capacity(chunks as usize);
    let mut start = 0u128;
    for i in 0..chunks {
        let size = base + u128::from(i < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}
