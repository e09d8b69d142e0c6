use super::message::CoefficientMessage;
use crate::error::{usage, Result};

/// Cumulative traffic on one agent's link to the hub.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelCounters {
    pub sent_bytes: u64,
    pub received_bytes: u64,
    pub sent_messages: u64,
    pub received_messages: u64,
}

/// What one agent receives at a step boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    /// The other agents' latest messages, ordered by agent id.
    pub messages: Vec<CoefficientMessage>,
    /// Ids of peers whose message is a re-delivery from an earlier step.
    pub stale: Vec<u32>,
    pub bytes: usize,
}

/// Star-topology relay: every agent uploads one message per step and
/// downloads the latest message of every peer.
#[derive(Debug, Clone)]
pub struct Hub {
    n: usize,
    latest: Vec<Option<Vec<u8>>>,
    channels: Vec<ChannelCounters>,
    stale_events: u64,
    exchanges: u64,
}

impl Hub {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            latest: vec![None; n],
            channels: vec![ChannelCounters::default(); n],
            stale_events: 0,
            exchanges: 0,
        }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn channel(&self, agent: usize) -> &ChannelCounters {
        &self.channels[agent]
    }

    pub fn stale_events(&self) -> u64 {
        self.stale_events
    }

    pub fn exchanges(&self) -> u64 {
        self.exchanges
    }

    /// Synchronous exchange for one step. `outgoing[j]` is agent `j`'s
    /// message or `None` if it missed the step, in which case its previous
    /// message is re-delivered.
    pub fn exchange(&mut self, step: u64, outgoing: &[Option<CoefficientMessage>]) -> Result<Vec<Delivery>> {
        if outgoing.len() != self.n {
            return usage(format!("hub expects {} agents, got {} slots", self.n, outgoing.len()));
        }
        let mut fresh = vec![false; self.n];
        for (j, msg) in outgoing.iter().enumerate() {
            let Some(msg) = msg else { continue };
            if msg.agent_id as usize != j || msg.step_index != step {
                return usage(format!(
                    "slot {j} at step {step} holds agent {} step {}",
                    msg.agent_id, msg.step_index
                ));
            }
            let bytes = msg.to_bytes();
            let ch = &mut self.channels[j];
            ch.sent_bytes += bytes.len() as u64;
            ch.sent_messages += 1;
            self.latest[j] = Some(bytes);
            fresh[j] = true;
        }
        for j in 0..self.n {
            if self.latest[j].is_none() {
                return usage(format!("agent {j} has not sent any message by step {step}"));
            }
            if !fresh[j] {
                self.stale_events += 1;
                log::warn!("agent {j} missed step {step}; peers get its previous message");
            }
        }
        let decoded = self
            .latest
            .iter()
            .map(|b| CoefficientMessage::from_bytes(b.as_deref().unwrap()))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let mut d = Delivery {
                messages: Vec::with_capacity(self.n - 1),
                stale: Vec::new(),
                bytes: 0,
            };
            for (p, msg) in decoded.iter().enumerate() {
                if p == j {
                    continue;
                }
                d.bytes += msg.encoded_len();
                if !fresh[p] {
                    d.stale.push(p as u32);
                }
                d.messages.push(msg.clone());
            }
            let ch = &mut self.channels[j];
            ch.received_bytes += d.bytes as u64;
            ch.received_messages += d.messages.len() as u64;
            out.push(d);
        }
        self.exchanges += 1;
        Ok(out)
    }
}

/// Per-agent receive bit rate implied by the coefficient payload alone:
/// `(N - 1) * coeffs * 64 / t_s`.
pub fn payload_bit_rate(n: usize, coeffs: usize, sample_time: f64) -> f64 {
    (n.saturating_sub(1) * coeffs * 64) as f64 / sample_time
}
