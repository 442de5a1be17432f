use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

/// Exponential backoff with optional jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: false,
        }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(retry.min(16)))
            .min(self.max_delay);
        if self.jitter && !exp.is_zero() {
            // full range [exp/2, exp]
            exp.mul_f64(rand::rng().random_range(0.5..=1.0))
        } else {
            exp
        }
    }
}

/// Token bucket limiting requests per minute. Burst capacity equals the
/// per-minute rate.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: u32,
    state: Mutex<Bucket>,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Instant,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        assert!(per_minute > 0, "rate must be positive");
        RateLimiter {
            per_minute,
            state: Mutex::new(Bucket {
                tokens: per_minute as f64,
                last: Instant::now(),
            }),
        }
    }

    fn refill_rate(&self) -> f64 {
        self.per_minute as f64 / 60.0
    }

    /// Block until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut bucket = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let elapsed = now.duration_since(bucket.last).as_secs_f64();
                bucket.tokens =
                    (bucket.tokens + elapsed * self.refill_rate()).min(self.per_minute as f64);
                bucket.last = now;
                if bucket.tokens >= 1.0 {
                    bucket.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - bucket.tokens) / self.refill_rate())
            };
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let policy = RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(3),
            jitter: false,
        };
        assert_eq!(policy.delay(0), Duration::from_millis(500));
        assert_eq!(policy.delay(1), Duration::from_millis(1000));
        assert_eq!(policy.delay(2), Duration::from_millis(2000));
        assert_eq!(policy.delay(3), Duration::from_secs(3));
    }

    #[test]
    fn jitter_stays_in_range() {
        let policy = RetryPolicy::default();
        for _ in 0..50 {
            let d = policy.delay(1);
            assert!(d >= Duration::from_millis(500) && d <= Duration::from_millis(1000));
        }
    }

    #[test]
    fn burst_then_throttle() {
        let limiter = RateLimiter::per_minute(600); // 10 per second
        let start = Instant::now();
        for _ in 0..600 {
            limiter.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(200));
        limiter.acquire();
        limiter.acquire();
        assert!(start.elapsed() >= Duration::from_millis(100));
    }
}
