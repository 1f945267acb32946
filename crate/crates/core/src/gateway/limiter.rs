use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

/// Time source for the limiter and the retry loop.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// A clock that only moves when slept on. Records every sleep.
#[derive(Debug, Default)]
pub struct FakeClock {
    state: Mutex<(Duration, Vec<Duration>)>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().expect("clock lock").1.clone()
    }

    pub fn advance(&self, d: Duration) {
        self.state.lock().expect("clock lock").0 += d;
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        self.state.lock().expect("clock lock").0
    }

    fn sleep(&self, d: Duration) {
        let mut s = self.state.lock().expect("clock lock");
        s.0 += d;
        s.1.push(d);
    }
}

const WINDOW: Duration = Duration::from_secs(60);

/// Sliding-window limiter: at most `per_minute` grants in any 60 s window.
pub struct RateLimiter {
    per_minute: usize,
    grants: Mutex<VecDeque<Duration>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(per_minute: usize, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            per_minute: per_minute.max(1),
            grants: Mutex::new(VecDeque::new()),
            clock,
        }
    }

    /// Blocks until a request may be sent and returns the grant time.
    pub fn acquire(&self) -> Duration {
        loop {
            let wait = {
                let mut g = self.grants.lock().expect("limiter lock");
                let now = self.clock.now();
                while g.front().is_some_and(|&t| now >= t + WINDOW) {
                    g.pop_front();
                }
                if g.len() < self.per_minute {
                    g.push_back(now);
                    return now;
                }
                *g.front().expect("window is full") + WINDOW - now
            };
            self.clock.sleep(wait);
        }
    }
}

/// Counting semaphore bounding in-flight requests.
pub struct ConcurrencyLimit {
    max: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limit: &'a ConcurrencyLimit,
}

impl ConcurrencyLimit {
    pub fn new(max: usize) -> Self {
        ConcurrencyLimit {
            max: max.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().expect("semaphore lock");
        while *used >= self.max {
            used = self.freed.wait(used).expect("semaphore lock");
        }
        *used += 1;
        Permit { limit: self }
    }

    pub fn in_use(&self) -> usize {
        *self.used.lock().expect("semaphore lock")
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limit.used.lock().expect("semaphore lock") -= 1;
        self.limit.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn never_exceeds_rate_under_fake_clock() {
        let clock = Arc::new(FakeClock::new());
        let limiter = RateLimiter::new(10, clock.clone());
        let mut grants = Vec::new();
        for k in 0..95 {
            if k % 7 == 0 {
                clock.advance(Duration::from_millis(1300));
            }
            grants.push(limiter.acquire());
        }
        for (i, &t) in grants.iter().enumerate() {
            let in_window = grants[i..].iter().filter(|&&u| u < t + WINDOW).count();
            assert!(in_window <= 10, "{in_window} grants within a minute of {t:?}");
        }
        // 95 grants at 10/min need at least 9 full windows.
        assert!(*grants.last().unwrap() >= Duration::from_secs(9 * 60));
    }

    #[test]
    fn bounds_in_flight_requests() {
        let limit = ConcurrencyLimit::new(3);
        let peak = AtomicUsize::new(0);
        let current = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..12 {
                s.spawn(|| {
                    let _p = limit.acquire();
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    current.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 3);
        assert_eq!(limit.in_use(), 0);
    }
}
