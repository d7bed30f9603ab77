use std::time::Duration;

use crate::error::{Error, Result};

/// Bounded exponential backoff. Only transport errors are retried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
            factor: 2,
        }
    }
}

pub trait Sleeper {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    pub delays: std::sync::Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, duration: Duration) {
        self.delays.lock().expect("sleeper lock").push(duration);
    }
}

impl RetryPolicy {
    pub fn run<T>(&self, sleeper: &dyn Sleeper, mut op: impl FnMut(u32) -> Result<T>) -> Result<T> {
        let mut delay = self.initial_backoff;
        let attempts = self.attempts.max(1);
        for attempt in 1..=attempts {
            match op(attempt) {
                Err(Error::Transport(msg)) if attempt < attempts => {
                    tracing::warn!(attempt, error = %msg, ?delay, "transport failure, retrying");
                    sleeper.sleep(delay);
                    delay *= self.factor;
                }
                Err(Error::Transport(msg)) => {
                    return Err(Error::Transport(format!("{msg} (after {attempts} attempts)")))
                }
                other => return other,
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}
