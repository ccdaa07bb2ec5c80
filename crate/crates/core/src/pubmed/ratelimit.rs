//! Sliding-window request limiter with an injectable clock.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Time source; tests swap in [`FakeClock`].
pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's origin.
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
        std::thread::sleep(d);
    }
}

/// Virtual clock: `sleep` advances time instantly.
#[derive(Debug, Clone, Default)]
pub struct FakeClock {
    now: Arc<Mutex<Duration>>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Admits at most `burst` requests in any window of `window` length.
///
/// For a rate `r` requests/second, `burst = max(1, floor(r))` and
/// `window = max(1 s, burst / r)`: no 1-second window sees more than `r`
/// grants and the long-run rate stays at or below `r`.
#[derive(Debug)]
pub struct RateLimiter {
    burst: usize,
    window: Duration,
    state: Mutex<LimiterState>,
}

#[derive(Debug, Default)]
struct LimiterState {
    recent: VecDeque<Duration>,
    log: Vec<Duration>,
}

impl RateLimiter {
    /// Panics unless `max_per_second` is finite and positive.
    pub fn per_second(max_per_second: f64) -> Self {
        assert!(
            max_per_second.is_finite() && max_per_second > 0.0,
            "rate must be positive, got {max_per_second}"
        );
        let burst = (max_per_second.floor() as usize).max(1);
        RateLimiter {
            burst,
            window: Duration::from_secs_f64((burst as f64 / max_per_second).max(1.0)),
            state: Mutex::new(LimiterState::default()),
        }
    }

    /// Blocks (via `clock.sleep`) until a request may go out, then records it.
    ///
    /// The lock is held across the wait so concurrent callers queue in order.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        let mut state = self.state.lock().unwrap();
        loop {
            let now = clock.now();
            while state.recent.len() >= self.burst {
                let oldest = state.recent[0];
                if now >= oldest + self.window {
                    state.recent.pop_front();
                } else {
                    break;
                }
            }
            if state.recent.len() < self.burst {
                state.recent.push_back(now);
                state.log.push(now);
                return now;
            }
            let wait = state.recent[0] + self.window - now;
            clock.sleep(wait);
        }
    }

    /// Every grant time so far, in order.
    pub fn grants(&self) -> Vec<Duration> {
        self.state.lock().unwrap().log.clone()
    }
}

/// Largest number of timestamps inside any half-open window `[t, t + width)`.
pub fn max_in_window(times: &[Duration], width: Duration) -> usize {
    let mut sorted = times.to_vec();
    sorted.sort();
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] >= sorted[lo] + width {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}
