use serde::{Deserialize, Serialize};

/// Bits a session may send in one hub tick before it is flagged.
pub const MAX_BITS_PER_TICK: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSession {
    pub user_id: String,
    /// Bits received in the current tick.
    pub window_count: usize,
    pub flagged: bool,
    pub flagged_at_tick: Option<u64>,
    /// Bits received, accepted or not.
    pub total_bits: u64,
    pub accepted_bits: u64,
    /// Hub clock (ms) of the last message.
    pub last_seen: u64,
}

/// Health-check verdict on one batch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Screened {
    pub accepted: Vec<u8>,
    pub dropped: Vec<u8>,
    pub newly_flagged: bool,
}

impl UserSession {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            window_count: 0,
            flagged: false,
            flagged_at_tick: None,
            total_bits: 0,
            accepted_bits: 0,
            last_seen: 0,
        }
    }

    /// Keeps bits until the tick total would pass `limit`; the session is
    /// then flagged, the excess dropped, and all later input dropped.
    pub fn screen(&mut self, bits: &[u8], tick: u64, now_ms: u64, limit: usize) -> Screened {
        self.total_bits += bits.len() as u64;
        self.last_seen = now_ms;
        if self.flagged {
            return Screened {
                dropped: bits.to_vec(),
                ..Default::default()
            };
        }
        let room = limit.saturating_sub(self.window_count);
        let keep = room.min(bits.len());
        self.window_count += bits.len();
        self.accepted_bits += keep as u64;
        let mut out = Screened {
            accepted: bits[..keep].to_vec(),
            dropped: bits[keep..].to_vec(),
            newly_flagged: false,
        };
        if self.window_count > limit {
            self.flagged = true;
            self.flagged_at_tick = Some(tick);
            out.newly_flagged = true;
        }
        out
    }

    pub fn end_tick(&mut self) {
        self.window_count = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_bits_pass() {
        let mut s = UserSession::new("u");
        let r = s.screen(&[0; 10], 0, 0, MAX_BITS_PER_TICK);
        assert_eq!(r.accepted.len(), 10);
        assert!(!s.flagged);
    }

    #[test]
    fn eleven_bits_flag_forever() {
        let mut s = UserSession::new("u");
        let r = s.screen(&[1; 6], 0, 0, MAX_BITS_PER_TICK);
        assert_eq!(r.accepted.len(), 6);
        let r = s.screen(&[0; 5], 0, 0, MAX_BITS_PER_TICK);
        assert_eq!((r.accepted.len(), r.dropped.len()), (4, 1));
        assert!(r.newly_flagged && s.flagged);
        s.end_tick();
        let r = s.screen(&[0], 1, 0, MAX_BITS_PER_TICK);
        assert!(r.accepted.is_empty() && !r.newly_flagged);
        assert_eq!(s.flagged_at_tick, Some(0));
    }

    #[test]
    fn sustained_three_per_tick() {
        let mut s = UserSession::new("u");
        let mut total = 0;
        for t in 0..100 {
            total += s.screen(&[0, 1, 1], t, 0, MAX_BITS_PER_TICK).accepted.len();
            s.end_tick();
        }
        assert_eq!(total, 300);
        assert!(!s.flagged);
    }
}
