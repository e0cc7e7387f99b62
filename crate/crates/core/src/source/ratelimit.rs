use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Monotonic time source, abstracted so rate limiting can be tested without
/// sleeping.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// A clock that only moves when slept on. Records every sleep.
#[derive(Default)]
pub struct ManualClock {
    state: Mutex<(Duration, Vec<Duration>)>,
}

impl ManualClock {
    pub fn new() -> Self {
        ManualClock::default()
    }

    pub fn advance(&self, by: Duration) {
        self.state.lock().unwrap().0 += by;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().1.clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        self.state.lock().unwrap().0
    }

    fn sleep(&self, duration: Duration) {
        let mut state = self.state.lock().unwrap();
        state.0 += duration;
        state.1.push(duration);
    }
}

/// Spaces admissions at least `1/per_second` apart, so any one-second window
/// holds at most `ceil(per_second)` requests (exactly `per_second` for whole
/// rates).
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Duration>,
}

impl RateLimiter {
    /// # Panics
    /// If `per_second` is not positive and finite.
    pub fn new(per_second: f64) -> Self {
        assert!(per_second.is_finite() && per_second > 0.0, "rate must be positive");
        // Round up so that `per_second` intervals never fit inside one second.
        let interval = Duration::from_nanos((1e9 / per_second).ceil() as u64);
        RateLimiter { interval, next_slot: Mutex::new(Duration::ZERO) }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until the caller may issue one request; returns the admission
    /// time on `clock`.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        let (slot, wait) = {
            let mut next = self.next_slot.lock().unwrap();
            let now = clock.now();
            let slot = now.max(*next);
            *next = slot + self.interval;
            (slot, slot - now)
        };
        if !wait.is_zero() {
            clock.sleep(wait);
        }
        slot
    }
}

/// Exponential backoff schedule for throttled or failing requests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub max_delay: Duration,
    pub max_retries: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { base: Duration::from_millis(500), max_delay: Duration::from_secs(30), max_retries: 4 }
    }
}

impl Backoff {
    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.base.saturating_mul(factor).min(self.max_delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_never_exceeds_rate() {
        for rate in [1.0, 3.0, 5.0, 7.5] {
            let clock = ManualClock::new();
            let limiter = RateLimiter::new(rate);
            let times: Vec<Duration> = (0..40).map(|_| limiter.acquire(&clock)).collect();
            for (i, &t) in times.iter().enumerate() {
                let in_window = times[i..].iter().take_while(|&&u| u < t + Duration::from_secs(1)).count();
                assert!(in_window as f64 <= rate.ceil(), "rate {rate}: {in_window} requests in one second");
            }
            let span = (times[39] - times[0]).as_secs_f64();
            assert!(39.0 / span <= rate);
        }
    }

    #[test]
    fn idle_time_is_not_banked() {
        let clock = ManualClock::new();
        let limiter = RateLimiter::new(2.0);
        limiter.acquire(&clock);
        clock.advance(Duration::from_secs(10));
        let a = limiter.acquire(&clock);
        let b = limiter.acquire(&clock);
        assert_eq!(b - a, limiter.interval());
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let b = Backoff::default();
        assert_eq!(b.delay(0), Duration::from_millis(500));
        assert_eq!(b.delay(1), Duration::from_secs(1));
        assert_eq!(b.delay(3), Duration::from_secs(4));
        assert_eq!(b.delay(20), Duration::from_secs(30));
    }
}
