//! Slot-level TDMA on the 2 x 2 X network where propagation delays do the
//! aligning: with delays T_11 ≡ 0, T_21 ≡ 0, T_12 ≡ 1, T_22 ≡ 2 (mod 3)
//! and the fixed transmit phases, both cross messages land in a single
//! residue class at each receiver while the four desired messages arrive
//! clean, 4/3 symbols per slot in total.
//!
//! Symbols are abstract tokens; the claim is purely combinatorial, so the
//! simulation only tracks which message occupies which slot at which
//! receiver.

use num::rational::Ratio;
use std::collections::BTreeMap;
use thiserror::Error;

/// Transmit slot residue (mod 3) of message (j, i), indexed [j-1][i-1].
pub const TX_PHASE: [[u64; 2]; 2] = [[0, 1], [1, 0]];

pub const PERIOD: u64 = 3;

#[derive(Debug, Error)]
pub enum DelayError {
    #[error("delays {0:?} break the residue conditions (need 0,1,0,2 mod 3 row-major)")]
    InvalidDelays([[u64; 2]; 2]),
    #[error("horizon {0} is not a positive multiple of 3")]
    BadHorizon(u64),
}

/// Propagation delays and the measurement window. `delays[j-1][i-1]` is
/// the integer delay from transmitter i to receiver j in symbol slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelaySchedule {
    pub delays: [[u64; 2]; 2],
    pub horizon: u64,
}

impl DelaySchedule {
    pub fn new(delays: [[u64; 2]; 2], horizon: u64) -> Result<DelaySchedule, DelayError> {
        if !validate_delays(&delays) {
            return Err(DelayError::InvalidDelays(delays));
        }
        if horizon == 0 || horizon % PERIOD != 0 {
            return Err(DelayError::BadHorizon(horizon));
        }
        Ok(DelaySchedule { delays, horizon })
    }
}

/// True iff T_11 ≡ 0, T_12 ≡ 1, T_21 ≡ 0, T_22 ≡ 2 (mod 3).
pub fn validate_delays(delays: &[[u64; 2]; 2]) -> bool {
    delays[0][0] % 3 == 0
        && delays[0][1] % 3 == 1
        && delays[1][0] % 3 == 0
        && delays[1][1] % 3 == 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Desired,
    Interference,
}

/// One symbol landing at a receiver: which message it carries and whether
/// that receiver wanted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    /// (target receiver, transmitter) of the carried message.
    pub message: (usize, usize),
    pub role: Role,
}

/// Everything a run produced: per-receiver slot occupancy and the window
/// it was produced over. Arrival slots may exceed the horizon; a symbol
/// transmitted inside the window is tracked to wherever it lands.
#[derive(Debug, Clone)]
pub struct DelaySim {
    pub schedule: DelaySchedule,
    /// `arrivals[j-1][slot]` lists what reaches receiver j in that slot.
    pub arrivals: [BTreeMap<u64, Vec<Arrival>>; 2],
    /// Symbols transmitted per message inside the window, [j-1][i-1].
    pub transmitted: [[u64; 2]; 2],
}

/// Run the schedule: each message (j, i) sends one symbol in every slot
/// matching its phase, and every transmission propagates to both
/// receivers with the per-path delay.
pub fn simulate(schedule: &DelaySchedule) -> Result<DelaySim, DelayError> {
    if !validate_delays(&schedule.delays) {
        return Err(DelayError::InvalidDelays(schedule.delays));
    }
    if schedule.horizon == 0 || schedule.horizon % PERIOD != 0 {
        return Err(DelayError::BadHorizon(schedule.horizon));
    }
    Ok(simulate_unchecked(schedule))
}

fn simulate_unchecked(schedule: &DelaySchedule) -> DelaySim {
    let mut arrivals: [BTreeMap<u64, Vec<Arrival>>; 2] = [BTreeMap::new(), BTreeMap::new()];
    let mut transmitted = [[0u64; 2]; 2];
    for t in 0..schedule.horizon {
        for j in 1..=2usize {
            for i in 1..=2usize {
                if t % PERIOD != TX_PHASE[j - 1][i - 1] {
                    continue;
                }
                transmitted[j - 1][i - 1] += 1;
                for rx in 1..=2usize {
                    let slot = t + schedule.delays[rx - 1][i - 1];
                    let role = if rx == j {
                        Role::Desired
                    } else {
                        Role::Interference
                    };
                    arrivals[rx - 1].entry(slot).or_default().push(Arrival {
                        message: (j, i),
                        role,
                    });
                }
            }
        }
    }
    DelaySim {
        schedule: *schedule,
        arrivals,
        transmitted,
    }
}

/// Symbols of message (j, i) that reached receiver j alone in their slot.
pub fn delivered(sim: &DelaySim) -> [[u64; 2]; 2] {
    let mut out = [[0u64; 2]; 2];
    for rx in 1..=2usize {
        for slot_arrivals in sim.arrivals[rx - 1].values() {
            if slot_arrivals.len() != 1 {
                continue;
            }
            let a = slot_arrivals[0];
            if a.role == Role::Desired {
                out[a.message.0 - 1][a.message.1 - 1] += 1;
            }
        }
    }
    out
}

/// Collision-free desired symbols across both receivers per slot of the
/// window, exactly.
pub fn throughput(sim: &DelaySim) -> Ratio<u64> {
    let d = delivered(sim);
    let total: u64 = d.iter().flatten().sum();
    Ratio::new(total, sim.schedule.horizon)
}

/// Per-message delivery rate over the window, [j-1][i-1].
pub fn per_message_throughput(sim: &DelaySim) -> [[Ratio<u64>; 2]; 2] {
    let d = delivered(sim);
    let mut out = [[Ratio::new(0, 1); 2]; 2];
    for j in 0..2 {
        for i in 0..2 {
            out[j][i] = Ratio::new(d[j][i], sim.schedule.horizon);
        }
    }
    out
}

/// Slots at receiver j (1-based) where at least one desired and at least
/// one interference symbol overlap, or two desired symbols collide.
pub fn collision_slots(sim: &DelaySim, j: usize) -> Vec<u64> {
    sim.arrivals[j - 1]
        .iter()
        .filter(|(_, arrs)| {
            let desired = arrs.iter().filter(|a| a.role == Role::Desired).count();
            let interference = arrs.len() - desired;
            (desired > 0 && interference > 0) || desired > 1
        })
        .map(|(&slot, _)| slot)
        .collect()
}

/// Residue classes (mod 3) that carry each role at receiver j.
pub fn residue_classes(sim: &DelaySim, j: usize, role: Role) -> Vec<u64> {
    let mut classes: Vec<u64> = sim.arrivals[j - 1]
        .iter()
        .filter(|(_, arrs)| arrs.iter().any(|a| a.role == role))
        .map(|(&slot, _)| slot % PERIOD)
        .collect();
    classes.sort_unstable();
    classes.dedup();
    classes
}
