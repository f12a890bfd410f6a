//! Slotted random access: each of `n` contenders transmits in a slot with
//! probability `p`, and the slot succeeds when exactly one does.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot cap for the literal slot-by-slot simulation.
pub const DEFAULT_SLOT_CAP: u64 = 1_000_000_000;

/// Result of one observation's contention phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionOutcome {
    /// Slots used, including the successful one.
    pub slots: u64,
    /// 0-based index of the single successful contender.
    pub winner: usize,
    /// `slots * slot_duration`.
    pub elapsed: f64,
}

/// Which contention sampler the simulator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentionMode {
    #[default]
    FastGeometric,
    LiteralSlots,
}

impl ContentionMode {
    pub fn sample<R: Rng + ?Sized>(
        self,
        rng: &mut R,
        n: usize,
        p: f64,
        slot: f64,
    ) -> Result<ContentionOutcome> {
        match self {
            ContentionMode::FastGeometric => sample_contention(rng, n, p, slot),
            ContentionMode::LiteralSlots => simulate_contention_slots(rng, n, p, slot),
        }
    }
}

/// `n p (1-p)^(n-1)`.
pub fn success_prob(n: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "need at least one contender"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1], got {p}")));
    }
    Ok(n as f64 * p * (1.0 - p).powi(n as i32 - 1))
}

fn check_slot(slot: f64) -> Result<()> {
    if slot.is_finite() && slot > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "slot_duration",
            format!("must be > 0, got {slot}"),
        ))
    }
}

/// Draws the slot count directly from its geometric law.
pub fn sample_contention<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: f64,
    slot: f64,
) -> Result<ContentionOutcome> {
    check_slot(slot)?;
    let ps = success_prob(n, p)?;
    if ps <= 0.0 {
        return Err(Error::NonTerminatingContention(format!(
            "{n} contenders with p = {p} never produce a lone transmitter"
        )));
    }
    let slots = if ps >= 1.0 {
        1
    } else {
        // rand_distr counts failures before the first success.
        let geo = Geometric::new(ps).map_err(|e| Error::param("p", e.to_string()))?;
        geo.sample(rng).saturating_add(1)
    };
    let winner = if n == 1 { 0 } else { rng.random_range(0..n) };
    Ok(ContentionOutcome {
        slots,
        winner,
        elapsed: slots as f64 * slot,
    })
}

/// Runs contention slot by slot with independent Bernoulli transmit choices.
pub fn simulate_contention_slots<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: f64,
    slot: f64,
) -> Result<ContentionOutcome> {
    simulate_contention_slots_capped(rng, n, p, slot, DEFAULT_SLOT_CAP)
}

pub fn simulate_contention_slots_capped<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: f64,
    slot: f64,
    cap: u64,
) -> Result<ContentionOutcome> {
    check_slot(slot)?;
    if success_prob(n, p)? <= 0.0 {
        return Err(Error::NonTerminatingContention(format!(
            "{n} contenders with p = {p} never produce a lone transmitter"
        )));
    }
    for slots in 1..=cap {
        let mut winner = None;
        let mut count = 0usize;
        for i in 0..n {
            if p >= 1.0 || rng.random_bool(p) {
                count += 1;
                winner = Some(i);
            }
        }
        if count == 1 {
            return Ok(ContentionOutcome {
                slots,
                winner: winner.unwrap_or(0),
                elapsed: slots as f64 * slot,
            });
        }
    }
    Err(Error::NonTerminatingContention(format!(
        "no success within {cap} slots"
    )))
}
