use std::sync::{Condvar, Mutex};

pub const DEFAULT_CONCURRENCY: usize = 4;

/// FIFO counting semaphore: waiters are admitted in arrival order.
#[derive(Debug)]
pub struct ConcurrencyLimit {
    limit: usize,
    state: Mutex<State>,
    cv: Condvar,
}

#[derive(Debug, Default)]
struct State {
    next_ticket: u64,
    now_serving: u64,
    active: usize,
}

pub struct Permit<'a> {
    owner: &'a ConcurrencyLimit,
}

impl ConcurrencyLimit {
    pub fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), state: Mutex::new(State::default()), cv: Condvar::new() }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().expect("limiter poisoned");
        let ticket = st.next_ticket;
        st.next_ticket += 1;
        while st.now_serving != ticket || st.active >= self.limit {
            st = self.cv.wait(st).expect("limiter poisoned");
        }
        st.now_serving += 1;
        st.active += 1;
        self.cv.notify_all();
        Permit { owner: self }
    }
}

impl Default for ConcurrencyLimit {
    fn default() -> Self {
        Self::new(DEFAULT_CONCURRENCY)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.owner.state.lock().expect("limiter poisoned");
        st.active -= 1;
        self.owner.cv.notify_all();
    }
}
