use chrono::{DateTime, Duration, Utc};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permit {
    Allow,
    WaitUntil(DateTime<Utc>),
}

/// Minimum-spacing gate for upstream requests: one permit per
/// `min_interval`, globally.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    min_interval: Duration,
    last_permit: Option<DateTime<Utc>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        Self { min_interval, last_permit: None }
    }

    pub fn min_interval(&self) -> Duration {
        self.min_interval
    }

    pub fn last_permit(&self) -> Option<DateTime<Utc>> {
        self.last_permit
    }

    pub fn acquire(&mut self, now: DateTime<Utc>) -> Permit {
        match self.last_permit {
            Some(last) if now - last < self.min_interval => Permit::WaitUntil(last + self.min_interval),
            _ => {
                self.last_permit = Some(now);
                Permit::Allow
            }
        }
    }
}
