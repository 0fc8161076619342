//! Trial-level worker pool. Each trial runs single-threaded; results come
//! back ordered by trial index whatever the scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// Pool size: `EIG_THREADS` if set and positive, else the available
/// parallelism, never more than `jobs`.
pub fn thread_count(jobs: usize) -> usize {
    let cap = std::env::var("EIG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.min(jobs).max(1)
}

pub fn run_trials<T, F>(jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    run_trials_with(thread_count(jobs), jobs, f)
}

pub fn run_trials_with<T, F>(threads: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if threads <= 1 || jobs <= 1 {
        return (0..jobs).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..threads.min(jobs) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = f(i);
                slots.lock().expect("pool mutex")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("pool mutex")
        .into_iter()
        .map(|o| o.expect("every trial ran"))
        .collect()
}
