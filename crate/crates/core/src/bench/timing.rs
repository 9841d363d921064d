use std::hint::black_box;
use std::time::Instant;

const BATCHES: usize = 101;

/// Median time per call in nanoseconds over `reps` calls, measured in
/// batches so timer overhead is amortized.
pub fn median_ns<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    let per_batch = (reps / BATCHES).max(1);
    let mut samples = Vec::with_capacity(BATCHES);
    f();
    for _ in 0..BATCHES {
        let start = Instant::now();
        for _ in 0..per_batch {
            f();
            black_box(());
        }
        samples.push(start.elapsed().as_nanos() as f64 / per_batch as f64);
    }
    samples.sort_by(f64::total_cmp);
    samples[BATCHES / 2]
}
