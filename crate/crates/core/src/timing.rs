use std::time::Instant;

/// Median wall time in nanoseconds of `trials` runs of `f`.
pub fn median_ns(trials: usize, mut f: impl FnMut()) -> u64 {
    let times: Vec<u64> = (0..trials.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_nanos() as u64
        })
        .collect();
    median(times)
}

/// Medians of `a` and `b` timed in alternation, so slow drift in machine
/// load affects both alike.
pub fn median_pair_ns(trials: usize, mut a: impl FnMut(), mut b: impl FnMut()) -> (u64, u64) {
    let (mut ta, mut tb) = (Vec::new(), Vec::new());
    for _ in 0..trials.max(1) {
        let t = Instant::now();
        a();
        ta.push(t.elapsed().as_nanos() as u64);
        let t = Instant::now();
        b();
        tb.push(t.elapsed().as_nanos() as u64);
    }
    (median(ta), median(tb))
}

/// Median of every job, timed in rounds that run each job once. Load
/// changes during the measurement then touch every job, not just the
/// ones that happened to run at the time.
pub fn median_rounds_ns(trials: usize, jobs: &mut [&mut dyn FnMut()]) -> Vec<u64> {
    let mut times = vec![Vec::new(); jobs.len()];
    for _ in 0..trials.max(1) {
        for (job, t) in jobs.iter_mut().zip(&mut times) {
            let start = Instant::now();
            job();
            t.push(start.elapsed().as_nanos() as u64);
        }
    }
    times.into_iter().map(median).collect()
}

fn median(mut times: Vec<u64>) -> u64 {
    times.sort_unstable();
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        (times[n / 2 - 1] + times[n / 2]) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_each_trial() {
        let mut calls = 0;
        median_ns(5, || calls += 1);
        assert_eq!(calls, 5);
        median_ns(0, || calls += 1);
        assert_eq!(calls, 6);
        assert_eq!(median(vec![5, 1, 3, 2]), 2);
        let (mut a, mut b) = (0, 0);
        let t = median_rounds_ns(3, &mut [&mut || a += 1, &mut || b += 2]);
        assert_eq!((t.len(), a, b), (2, 3, 6));
    }
}
