//! Coefficient sharing between agents exploring one distribution.
//!
//! Agents step in lockstep. At every step boundary each agent uploads the
//! coefficients of its latest plan to a [`Hub`], downloads its peers'
//! and folds them into its own objective before the next step.

mod hub;
mod message;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hub::{payload_bit_rate, ChannelCounters, Delivery, Hub};
pub use message::{CoefficientMessage, UdpTransport, HEADER_LEN};

use crate::controller::{ErgodicController, RunOutput, StepOutcome};
use crate::error::{check_dim, usage, Result};
use crate::fourier::{CoefficientVector, FourierBasis, TrajectorySegment};

/// `own + (1 / (N - 1)) * sum(others)`. The weights sum to two.
pub fn combine_coeffs(own: &[f64], others: &[&[f64]], n: usize) -> Result<CoefficientVector> {
    if n < 2 || others.len() != n - 1 {
        return usage(format!("expected {} peer vectors for {n} agents, got {}", n.saturating_sub(1), others.len()));
    }
    let mut out = own.to_vec();
    let w = 1.0 / (n - 1) as f64;
    for o in others {
        check_dim("peer coefficients", own.len(), o.len())?;
        for (c, v) in out.iter_mut().zip(o.iter()) {
            *c += w * v;
        }
    }
    Ok(out.into())
}

/// `(1 / N) * (own + sum(others))`.
pub fn normalized_average(own: &[f64], others: &[&[f64]], n: usize) -> Result<CoefficientVector> {
    if n < 1 || others.len() != n - 1 {
        return usage(format!("expected {} peer vectors for {n} agents, got {}", n.saturating_sub(1), others.len()));
    }
    let mut out = own.to_vec();
    for o in others {
        check_dim("peer coefficients", own.len(), o.len())?;
        for (c, v) in out.iter_mut().zip(o.iter()) {
            *c += v;
        }
    }
    Ok(out.iter().map(|c| c / n as f64).collect::<Vec<_>>().into())
}

/// How an agent folds its peers' coefficients into its own.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// [`combine_coeffs`].
    #[default]
    OwnPlusPeerMean,
    /// [`normalized_average`].
    NormalizedAverage,
}

impl CombineRule {
    /// `(own_weight, offset)` such that the combined vector is
    /// `own_weight * own + offset`.
    pub fn blend(self, others: &[&[f64]], n: usize) -> Result<(f64, CoefficientVector)> {
        let len = others.first().map_or(0, |o| o.len());
        let zero = vec![0.0; len];
        match self {
            Self::OwnPlusPeerMean => Ok((1.0, combine_coeffs(&zero, others, n)?)),
            Self::NormalizedAverage => Ok((1.0 / n as f64, normalized_average(&zero, others, n)?)),
        }
    }
}

/// Ergodic metric of the agents' averaged statistics over `window`:
/// `sum_k Lambda_k ((1/N) sum_j c_k^j - phi_k)^2`.
pub fn collective_ergodicity(
    segments: &[TrajectorySegment],
    phi: &[f64],
    basis: &FourierBasis,
    window: (f64, f64),
) -> Result<f64> {
    if segments.is_empty() {
        return usage("collective ergodicity of zero agents");
    }
    let mut avg = vec![0.0; basis.len()];
    for seg in segments {
        let c = basis.trajectory_coeffs(seg, window.0, window.1)?;
        for (a, v) in avg.iter_mut().zip(c.iter()) {
            *a += v / segments.len() as f64;
        }
    }
    check_dim("target coefficients", basis.len(), phi.len())?;
    Ok(basis.ergodic_metric(&avg, phi))
}

/// Collective metric from the agents' executed history integrals.
fn collective_from_histories(agents: &[ErgodicController]) -> Option<f64> {
    let first = agents.first()?;
    let mut avg = vec![0.0; first.basis().len()];
    for a in agents {
        let c = a.executed_coeffs()?;
        for (s, v) in avg.iter_mut().zip(c.iter()) {
            *s += v / agents.len() as f64;
        }
    }
    Some(first.basis().ergodic_metric(&avg, first.phi()))
}

/// Closed-loop output of a team run.
#[derive(Debug, Clone)]
pub struct TeamOutput {
    pub runs: Vec<RunOutput>,
    /// End time of every step.
    pub times: Vec<f64>,
    /// `individual[j][i]`: agent `j`'s executed ergodicity after step `i`.
    pub individual: Vec<Vec<f64>>,
    pub collective: Vec<f64>,
    /// `received_bytes[i][j]`: bytes agent `j` downloaded before step `i`.
    pub received_bytes: Vec<Vec<usize>>,
    /// `(step, agent)` pairs whose message was re-delivered.
    pub stale: Vec<(u64, u32)>,
}

/// Outcome of [`Team::step`].
#[derive(Debug)]
pub struct TeamStep {
    pub outcomes: Vec<StepOutcome>,
    /// Bytes each agent downloaded before stepping.
    pub received_bytes: Vec<usize>,
    /// Agents whose previous message was re-delivered.
    pub stale: Vec<u32>,
}

/// Agents sharing one target distribution through a hub.
pub struct Team {
    agents: Vec<ErgodicController>,
    hub: Hub,
    rule: CombineRule,
}

impl Team {
    pub fn new(agents: Vec<ErgodicController>, rule: CombineRule) -> Result<Self> {
        let Some(first) = agents.first() else {
            return usage("a team needs at least one agent");
        };
        let (len, t0, t_s) = (first.basis().len(), first.time(), first.config().sample_time);
        for a in &agents {
            check_dim("agent coefficient count", len, a.basis().len())?;
            if a.time() != t0 || a.config().sample_time != t_s {
                return usage("team agents must share start time and sample time");
            }
        }
        Ok(Self {
            hub: Hub::new(agents.len()),
            agents,
            rule,
        })
    }

    pub fn agents(&self) -> &[ErgodicController] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [ErgodicController] {
        &mut self.agents
    }

    pub fn hub(&self) -> &Hub {
        &self.hub
    }

    pub fn into_agents(self) -> Vec<ErgodicController> {
        self.agents
    }

    pub fn run(&mut self, duration: f64) -> Result<TeamOutput> {
        self.run_with_drops(duration, &|_, _| false)
    }

    /// Like [`Team::run`]; `dropped(agent, step)` suppresses that agent's
    /// upload after `step`. Peers then reuse its previous message, so the
    /// first upload cannot be dropped.
    pub fn run_with_drops(&mut self, duration: f64, dropped: &dyn Fn(usize, u64) -> bool) -> Result<TeamOutput> {
        if !(duration >= 0.0) {
            return usage(format!("run duration must be nonnegative, got {duration}"));
        }
        let n = self.agents.len();
        let t_s = self.agents[0].config().sample_time;
        let steps = (duration / t_s - 1e-9).ceil().max(0.0) as usize;
        let mut out = TeamOutput {
            runs: self
                .agents
                .iter()
                .map(|a| RunOutput::new(a.time(), a.state(), a.system().input_dim()))
                .collect(),
            times: Vec::with_capacity(steps),
            individual: vec![Vec::with_capacity(steps); n],
            collective: Vec::with_capacity(steps),
            received_bytes: Vec::with_capacity(steps),
            stale: Vec::new(),
        };
        for _ in 0..steps {
            let st = self.step_with_drops(dropped)?;
            let step = self.agents[0].steps_taken() - 1;
            out.stale.extend(st.stale.iter().map(|&j| (step.saturating_sub(1), j)));
            out.received_bytes.push(st.received_bytes);
            for (run, o) in out.runs.iter_mut().zip(st.outcomes) {
                run.push(o)?;
            }
            out.times.push(self.agents[0].time());
            for (series, e) in out.individual.iter_mut().zip(self.individual_ergodicity()) {
                series.push(e);
            }
            out.collective.push(self.collective_ergodicity());
        }
        Ok(out)
    }

    /// One synchronized step: exchange the previous plans, then step every
    /// agent in parallel.
    pub fn step(&mut self) -> Result<TeamStep> {
        self.step_with_drops(&|_, _| false)
    }

    pub fn step_with_drops(&mut self, dropped: &dyn Fn(usize, u64) -> bool) -> Result<TeamStep> {
        let n = self.agents.len();
        let step = self.agents[0].steps_taken();
        let (received_bytes, stale) = if n > 1 && step > 0 {
            self.share(step - 1, dropped)?
        } else {
            (vec![0; n], Vec::new())
        };
        let outcomes = self.agents.par_iter_mut().map(|a| a.step()).collect::<Result<Vec<_>>>()?;
        Ok(TeamStep {
            outcomes,
            received_bytes,
            stale,
        })
    }

    /// Each agent's executed ergodicity against its own target.
    pub fn individual_ergodicity(&self) -> Vec<f64> {
        self.agents
            .iter()
            .map(|a| {
                let c = a.executed_coeffs().unwrap_or_else(|| a.history_coeffs());
                a.basis().ergodic_metric(&c, a.phi())
            })
            .collect()
    }

    pub fn collective_ergodicity(&self) -> f64 {
        collective_from_histories(&self.agents).unwrap_or(f64::NAN)
    }

    fn share(&mut self, step: u64, dropped: &dyn Fn(usize, u64) -> bool) -> Result<(Vec<usize>, Vec<u32>)> {
        let n = self.agents.len();
        let outgoing: Vec<_> = self
            .agents
            .iter()
            .enumerate()
            .map(|(j, a)| {
                (!dropped(j, step)).then(|| CoefficientMessage {
                    agent_id: j as u32,
                    step_index: step,
                    t0erg: a.t0erg(),
                    t_end: a.time() - a.config().sample_time + a.config().horizon,
                    coefficients: a.shared_coeffs().clone(),
                })
            })
            .collect();
        let deliveries = self.hub.exchange(step, &outgoing)?;
        let stale = outgoing
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_none())
            .map(|(j, _)| j as u32)
            .collect();
        let mut bytes = Vec::with_capacity(n);
        for (a, d) in self.agents.iter_mut().zip(&deliveries) {
            let others: Vec<&[f64]> = d.messages.iter().map(|m| m.coefficients.as_slice()).collect();
            let (w, offset) = self.rule.blend(&others, n)?;
            a.set_blend(w, Some(offset))?;
            bytes.push(d.bytes);
        }
        Ok((bytes, stale))
    }
}
