//! Replicate-parallel execution with a fixed reduction order.
//!
//! Replicates are grouped into consecutive fixed-size batches. Each batch is
//! accumulated sequentially in replicate order, batches may run on any number
//! of worker threads, and batch results are merged in batch order. The result
//! is therefore bit-identical across thread counts, and identical to the
//! sequential fallback compiled without the `parallel` feature.

use rand_chacha::ChaCha8Rng;

use crate::rng::replicate_stream;

/// Default replicates per work item, suited to light per-replicate work.
/// Batch size is part of an experiment's definition: it is fixed per call
/// site and must never depend on thread count.
pub const BATCH_SIZE: u64 = 4096;

/// Runs `step` once per replicate and merges per-batch accumulators in batch
/// order. `step` receives the replicate index and that replicate's RNG stream.
pub fn run_batched<A, New, Step, Merge>(
    seed: u64,
    replicates: u64,
    new_acc: New,
    step: Step,
    merge: Merge,
) -> A
where
    A: Send,
    New: Fn() -> A + Sync,
    Step: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
    Merge: Fn(&mut A, A),
{
    run_batched_sized(seed, replicates, BATCH_SIZE, new_acc, step, merge)
}

/// [`run_batched`] with an explicit batch size; use small batches when a
/// single replicate is expensive (e.g. whole-genealogy runs).
pub fn run_batched_sized<A, New, Step, Merge>(
    seed: u64,
    replicates: u64,
    batch_size: u64,
    new_acc: New,
    step: Step,
    merge: Merge,
) -> A
where
    A: Send,
    New: Fn() -> A + Sync,
    Step: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
    Merge: Fn(&mut A, A),
{
    assert!(batch_size >= 1);
    let batch_results = batch_map(seed, replicates, batch_size, &new_acc, &step);
    let mut out = new_acc();
    for acc in batch_results {
        merge(&mut out, acc);
    }
    out
}

/// Sequential twin of [`run_batched`]; always available, used by the bench
/// suite to compare against the parallel path. Produces identical results.
pub fn run_batched_sequential<A, New, Step, Merge>(
    seed: u64,
    replicates: u64,
    new_acc: New,
    step: Step,
    merge: Merge,
) -> A
where
    New: Fn() -> A,
    Step: Fn(&mut A, u64, &mut ChaCha8Rng),
    Merge: Fn(&mut A, A),
{
    run_batched_sequential_sized(seed, replicates, BATCH_SIZE, new_acc, step, merge)
}

/// Sequential twin of [`run_batched_sized`].
pub fn run_batched_sequential_sized<A, New, Step, Merge>(
    seed: u64,
    replicates: u64,
    batch_size: u64,
    new_acc: New,
    step: Step,
    merge: Merge,
) -> A
where
    New: Fn() -> A,
    Step: Fn(&mut A, u64, &mut ChaCha8Rng),
    Merge: Fn(&mut A, A),
{
    assert!(batch_size >= 1);
    let mut out = new_acc();
    for batch in 0..n_batches(replicates, batch_size) {
        let mut acc = new_acc();
        run_batch(seed, batch, replicates, batch_size, &mut acc, &step);
        merge(&mut out, acc);
    }
    out
}

fn n_batches(replicates: u64, batch_size: u64) -> u64 {
    replicates.div_ceil(batch_size)
}

fn run_batch<A, Step>(
    seed: u64,
    batch: u64,
    replicates: u64,
    batch_size: u64,
    acc: &mut A,
    step: &Step,
) where
    Step: Fn(&mut A, u64, &mut ChaCha8Rng),
{
    let lo = batch * batch_size;
    let hi = (lo + batch_size).min(replicates);
    for replicate in lo..hi {
        let mut rng = replicate_stream(seed, replicate);
        step(acc, replicate, &mut rng);
    }
}

#[cfg(feature = "parallel")]
fn batch_map<A, New, Step>(
    seed: u64,
    replicates: u64,
    batch_size: u64,
    new_acc: &New,
    step: &Step,
) -> Vec<A>
where
    A: Send,
    New: Fn() -> A + Sync,
    Step: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
{
    use rayon::prelude::*;
    (0..n_batches(replicates, batch_size))
        .into_par_iter()
        .map(|batch| {
            let mut acc = new_acc();
            run_batch(seed, batch, replicates, batch_size, &mut acc, step);
            acc
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn batch_map<A, New, Step>(
    seed: u64,
    replicates: u64,
    batch_size: u64,
    new_acc: &New,
    step: &Step,
) -> Vec<A>
where
    A: Send,
    New: Fn() -> A + Sync,
    Step: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
{
    (0..n_batches(replicates, batch_size))
        .map(|batch| {
            let mut acc = new_acc();
            run_batch(seed, batch, replicates, batch_size, &mut acc, step);
            acc
        })
        .collect()
}

/// Sizes the global worker pool. `None` keeps the library default. Without
/// the `parallel` feature this is a no-op. Calling it twice is an error.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: Option<usize>) -> crate::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| crate::Error::Input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: Option<usize>) -> crate::Result<()> {
    Ok(())
}

/// Whether this build executes batches on a worker pool.
pub fn parallelism_enabled() -> bool {
    cfg!(feature = "parallel")
}
