//! Worker pool for independent experiment jobs.
//!
//! Parallelism in this crate enters only at the level of whole jobs (sweep
//! points, replicate runs): each job is deterministic and owns its output
//! slot, so results are bit-identical for every worker count. The inner
//! numerical reductions always run in one fixed serial order.

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "STEINFLOW_THREADS";

/// Worker cap: `STEINFLOW_THREADS` if set and positive, otherwise the
/// available parallelism (1 if unknown).
pub fn worker_cap() -> usize {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs the jobs on at most [`worker_cap`] scoped threads and returns their
/// results in job order.
pub fn run_jobs<T, F>(jobs: Vec<F>) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let workers = worker_cap().min(jobs.len()).max(1);
    if workers <= 1 {
        return jobs.into_iter().map(|j| j()).collect();
    }
    let n = jobs.len();
    let mut slots: Vec<Option<T>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    let queue: Vec<(usize, F)> = jobs.into_iter().enumerate().collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let queue = std::sync::Mutex::new(
        queue
            .into_iter()
            .map(|(i, f)| Some((i, f)))
            .collect::<Vec<_>>(),
    );
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let job = {
                    let mut q = queue.lock().unwrap();
                    if idx >= q.len() {
                        return;
                    }
                    q[idx].take()
                };
                let Some((i, f)) = job else { return };
                let value = f();
                let mut guard = slots_mutex.lock().unwrap();
                guard[i] = Some(value);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("job completed")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_arrive_in_job_order() {
        let jobs: Vec<_> = (0..17)
            .map(|i| move || i * i)
            .collect();
        let out = run_jobs(jobs);
        assert_eq!(out, (0..17).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn worker_cap_is_positive() {
        assert!(worker_cap() >= 1);
    }
}
