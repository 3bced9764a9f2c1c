use std::collections::VecDeque;

use crate::registers::{Direction, TriState};

pub const DEFAULT_WINDOW: u32 = 1024;
pub const DEFAULT_ERROR_THRESHOLD: f64 = 0.01;

/// Receive-side self-test for one link port.
///
/// CRC error statistics cover a sliding window of the most recent
/// `window` received packets, kept run-length encoded so bulk traffic
/// costs O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMonitor {
    pub dir: Direction,
    pub error_ratio_threshold: f64,
    pub handshake_alive: bool,
    window: u32,
    runs: VecDeque<(u32, bool)>,
    packets_received: u32,
    crc_errors: u32,
}

impl LinkMonitor {
    pub fn new(dir: Direction) -> Self {
        LinkMonitor::with_window(dir, DEFAULT_ERROR_THRESHOLD, DEFAULT_WINDOW)
    }

    pub fn with_window(dir: Direction, error_ratio_threshold: f64, window: u32) -> Self {
        assert!(window > 0, "link window must hold at least one packet");
        LinkMonitor {
            dir,
            error_ratio_threshold,
            handshake_alive: true,
            window,
            runs: VecDeque::new(),
            packets_received: 0,
            crc_errors: 0,
        }
    }

    pub fn packets_received(&self) -> u32 {
        self.packets_received
    }

    pub fn crc_errors(&self) -> u32 {
        self.crc_errors
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn record(&mut self, count: u32, crc_error: bool) {
        if count == 0 {
            return;
        }
        // anything older than one full window falls out anyway
        let count = count.min(self.window);
        match self.runs.back_mut() {
            Some((n, e)) if *e == crc_error => *n += count,
            _ => self.runs.push_back((count, crc_error)),
        }
        self.packets_received += count;
        if crc_error {
            self.crc_errors += count;
        }
        self.trim();
    }

    pub fn record_good(&mut self, count: u32) {
        self.record(count, false);
    }

    pub fn record_errors(&mut self, count: u32) {
        self.record(count, true);
    }

    fn trim(&mut self) {
        while self.packets_received > self.window {
            let excess = self.packets_received - self.window;
            let front = self.runs.front_mut().expect("non-empty window");
            let drop = excess.min(front.0);
            front.0 -= drop;
            self.packets_received -= drop;
            if front.1 {
                self.crc_errors -= drop;
            }
            if front.0 == 0 {
                self.runs.pop_front();
            }
        }
    }

    pub fn error_ratio(&self) -> f64 {
        self.crc_errors as f64 / self.packets_received.max(1) as f64
    }

    pub fn status(&self) -> TriState {
        if !self.handshake_alive {
            TriState::Broken
        } else if self.error_ratio() > self.error_ratio_threshold {
            TriState::Sick
        } else {
            TriState::Normal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transitions() {
        let mut m = LinkMonitor::new(Direction::YPlus);
        assert_eq!(m.status(), TriState::Normal);
        m.record_good(1000);
        m.record_errors(10);
        // 10 / 1010 < 0.01
        assert_eq!(m.status(), TriState::Normal);
        m.record_errors(1);
        assert!(m.error_ratio() > 0.01);
        assert_eq!(m.status(), TriState::Sick);
        m.handshake_alive = false;
        assert_eq!(m.status(), TriState::Broken);
    }

    #[test]
    fn empty_window_ratio_is_zero() {
        let m = LinkMonitor::new(Direction::XPlus);
        assert_eq!(m.error_ratio(), 0.0);
    }

    #[test]
    fn sliding_window_forgets_old_errors() {
        let mut m = LinkMonitor::with_window(Direction::XPlus, 0.01, 100);
        m.record_errors(50);
        assert_eq!(m.status(), TriState::Sick);
        m.record_good(100);
        assert_eq!(m.crc_errors(), 0);
        assert_eq!(m.packets_received(), 100);
        assert_eq!(m.status(), TriState::Normal);
    }

    #[test]
    fn partial_run_eviction() {
        let mut m = LinkMonitor::with_window(Direction::XPlus, 0.5, 10);
        m.record_errors(6);
        m.record_good(7);
        assert_eq!(m.packets_received(), 10);
        assert_eq!(m.crc_errors(), 3);
    }

    /// Plain per-packet reference window.
    fn reference(seq: &[(u32, bool)], window: usize) -> (u32, u32) {
        let mut flat = Vec::new();
        for &(n, e) in seq {
            flat.extend(std::iter::repeat_n(e, n as usize));
        }
        let tail = &flat[flat.len().saturating_sub(window)..];
        (tail.len() as u32, tail.iter().filter(|e| **e).count() as u32)
    }

    proptest! {
        #[test]
        fn matches_reference_window(seq in prop::collection::vec((0u32..300, any::<bool>()), 0..40)) {
            let mut m = LinkMonitor::with_window(Direction::ZMinus, 0.01, 256);
            for &(n, e) in &seq {
                m.record(n, e);
            }
            let (received, errors) = reference(&seq, 256);
            prop_assert_eq!(m.packets_received(), received);
            prop_assert_eq!(m.crc_errors(), errors);
        }

        /// Once sick within a window, further CRC errors never make it normal.
        #[test]
        fn errors_keep_sick_link_sick(good in 0u32..500, bad in 1u32..50, more in prop::collection::vec(1u32..20, 1..20)) {
            let mut m = LinkMonitor::new(Direction::XMinus);
            m.record_good(good);
            m.record_errors(bad);
            prop_assume!(m.status() == TriState::Sick);
            for n in more {
                m.record_errors(n);
                prop_assert_eq!(m.status(), TriState::Sick);
            }
        }
    }
}
