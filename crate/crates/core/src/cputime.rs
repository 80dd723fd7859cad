//! CPU time consumed by the calling thread.

use std::time::Duration;

pub(crate) fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Accumulates the thread CPU time spent inside `measure` calls.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct BusyClock {
    total: Duration,
}

impl BusyClock {
    pub(crate) fn measure<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = thread_cpu_time();
        let out = f();
        self.total += thread_cpu_time().saturating_sub(start);
        out
    }

    pub(crate) fn total(&self) -> Duration {
        self.total
    }
}
