//! Exact event-driven simulation of the age-dependent branching process.
//!
//! Two independent samplers are implemented on purpose. The aggregate
//! fertility-state walk is the fast path for sampling population sizes; the
//! per-individual queue produces full genealogies. Both realize the same
//! population law, and the test suites compare them against each other.
//!
//! Between births the total birth rate decays as `F e^{-theta s}`, so the
//! waiting time solves `Int_0^D F e^{-theta s} ds = E` for a standard
//! exponential draw `E`. The inversions below use `ln_1p` so small
//! `theta E / F` keeps full precision, and detect "no further birth, ever"
//! analytically (the integrated rate to infinity is `F / theta` for
//! `theta > 0`), never by timeout.

use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::full_precision;
use crate::params::ModelParams;

/// Aggregate state of the population between birth events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FertilityState {
    /// Current time.
    pub time: f64,
    /// Current total birth rate, `sum of e^{-theta * age}` over individuals.
    pub fertility: f64,
    /// Current population size.
    pub population: u64,
}

impl FertilityState {
    /// The single ancestor at time zero, fertility 1.
    pub fn initial() -> Self {
        Self {
            time: 0.0,
            fertility: 1.0,
            population: 1,
        }
    }
}

impl Default for FertilityState {
    fn default() -> Self {
        Self::initial()
    }
}

/// Advances the aggregate state to its next birth given a standard
/// exponential draw. Returns `None` when no further birth can ever occur
/// (possible only for `theta > 0`, when `theta * draw >= fertility`).
///
/// On a birth the waiting time is `-(1/theta) ln(1 - theta draw / F)`
/// (`draw / F` if `theta = 0`), the decayed fertility gains the newborn's
/// unit rate, and the population increments by one.
pub fn step_next_birth(
    theta: f64,
    state: FertilityState,
    draw: f64,
) -> Option<(f64, FertilityState)> {
    debug_assert!(draw > 0.0);
    let f = state.fertility;
    let delta = if theta == 0.0 {
        draw / f
    } else {
        let z = theta * draw / f;
        if theta > 0.0 && z >= 1.0 {
            return None;
        }
        -(-z).ln_1p() / theta
    };
    let next = FertilityState {
        time: state.time + delta,
        fertility: f * (-theta * delta).exp() + 1.0,
        population: state.population + 1,
    };
    Some((delta, next))
}

/// Draws one exact sample of `X(theta, rho)`: the population size at an
/// independent `Exponential(rho)` time. No time discretization is involved.
pub fn sample_x(params: &ModelParams, rng: &mut impl Rng) -> u64 {
    sample_x_capped(params, u64::MAX - 1, rng)
}

/// Like [`sample_x`] but stops as soon as the population exceeds `cap`,
/// returning `cap + 1`. Survival indicators `X > n` for `n <= cap` are exact,
/// which is all the tail estimators need; the heavy-tailed regimes make the
/// uncapped walk prohibitively long.
pub fn sample_x_capped(params: &ModelParams, cap: u64, rng: &mut impl Rng) -> u64 {
    let horizon: f64 = rng.sample::<f64, _>(Exp1) / params.rho;
    let mut state = FertilityState::initial();
    while state.population <= cap {
        let draw: f64 = rng.sample(Exp1);
        match step_next_birth(params.theta, state, draw) {
            None => return state.population,
            Some((_, next)) => {
                if next.time > horizon {
                    return state.population;
                }
                state = next;
            }
        }
    }
    state.population
}

/// Outcome of a total-progeny run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProgenyOutcome {
    /// The line went extinct with this many individuals ever born.
    Finite(u64),
    /// The population reached the cap while still fertile.
    ExceededCap,
}

/// Default event cap for total-progeny runs: for `theta` in (0,1) the
/// progeny is infinite with positive probability, so a cap is mandatory.
pub const DEFAULT_PROGENY_CAP: u64 = 100_000_000;

/// Samples the total progeny `Y(inf)` for `theta > 0` (Borel-distributed),
/// stopping with [`ProgenyOutcome::ExceededCap`] if the population reaches
/// `cap` first.
pub fn sample_total_progeny(theta: f64, cap: u64, rng: &mut impl Rng) -> Result<ProgenyOutcome> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!(
            "total progeny is a.s. infinite for theta <= 0 (got {theta})"
        )));
    }
    if cap == 0 {
        return Err(Error::Domain("cap must be >= 1".into()));
    }
    let mut state = FertilityState::initial();
    loop {
        let draw: f64 = rng.sample(Exp1);
        match step_next_birth(theta, state, draw) {
            None => return Ok(ProgenyOutcome::Finite(state.population)),
            Some((_, next)) => {
                if next.population >= cap {
                    return Ok(ProgenyOutcome::ExceededCap);
                }
                state = next;
            }
        }
    }
}

/// Why a [`PathSample`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathTermination {
    HorizonReached,
    /// No further births are possible (only for `theta > 0`).
    Extinction,
    TargetPopulation,
}

/// One recorded jump of the population trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEvent {
    pub time: f64,
    pub population: u64,
}

/// A population trajectory, exact between events. The first record is the
/// ancestor at time zero, so `events[i].population == i + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub events: Vec<PathEvent>,
    pub terminal_time: f64,
    pub terminated_by: PathTermination,
}

impl PathSample {
    /// Population size at the terminal time.
    pub fn final_population(&self) -> u64 {
        self.events.last().map_or(1, |e| e.population)
    }
}

enum PathStop {
    Horizon(f64),
    Target(u64),
}

fn simulate_path_inner(theta: f64, stop: PathStop, rng: &mut impl Rng) -> PathSample {
    let mut events = vec![PathEvent {
        time: 0.0,
        population: 1,
    }];
    let mut state = FertilityState::initial();
    if let PathStop::Target(1) = stop {
        return PathSample {
            events,
            terminal_time: 0.0,
            terminated_by: PathTermination::TargetPopulation,
        };
    }
    loop {
        let draw: f64 = rng.sample(Exp1);
        match step_next_birth(theta, state, draw) {
            None => {
                return PathSample {
                    terminal_time: state.time,
                    events,
                    terminated_by: PathTermination::Extinction,
                }
            }
            Some((_, next)) => {
                if let PathStop::Horizon(h) = stop {
                    if next.time > h {
                        return PathSample {
                            events,
                            terminal_time: h,
                            terminated_by: PathTermination::HorizonReached,
                        };
                    }
                }
                events.push(PathEvent {
                    time: next.time,
                    population: next.population,
                });
                if let PathStop::Target(n) = stop {
                    if next.population == n {
                        return PathSample {
                            terminal_time: next.time,
                            events,
                            terminated_by: PathTermination::TargetPopulation,
                        };
                    }
                }
                state = next;
            }
        }
    }
}

/// Simulates the population trajectory up to a time horizon.
pub fn simulate_path(theta: f64, horizon: f64, rng: &mut impl Rng) -> Result<PathSample> {
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon must be >= 0, got {horizon}")));
    }
    Ok(simulate_path_inner(theta, PathStop::Horizon(horizon), rng))
}

/// Simulates until the population first reaches `target` (or goes extinct,
/// possible only for `theta > 0`). The terminal time of a completed run is
/// the first-passage time of the population to `target`.
pub fn simulate_path_to_target(theta: f64, target: u64, rng: &mut impl Rng) -> Result<PathSample> {
    if target == 0 {
        return Err(Error::Domain("target population must be >= 1".into()));
    }
    Ok(simulate_path_inner(theta, PathStop::Target(target), rng))
}

/// Population size at `horizon` plus whether the line had already lost all
/// fertility by then. Allocation-free variant of [`simulate_path`] for
/// replicate-heavy moment checks.
pub fn population_at_horizon(theta: f64, horizon: f64, rng: &mut impl Rng) -> (u64, bool) {
    let mut state = FertilityState::initial();
    loop {
        let draw: f64 = rng.sample(Exp1);
        match step_next_birth(theta, state, draw) {
            None => return (state.population, true),
            Some((_, next)) => {
                if next.time > horizon {
                    return (state.population, false);
                }
                state = next;
            }
        }
    }
}

/// One individual of a simulated genealogy. Ids are assigned in birth order
/// starting from 1; the ancestor has `parent == 0` and `birth_time == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenealogyRecord {
    pub id: u64,
    pub parent: u64,
    pub birth_time: f64,
}

/// Result of a target-size genealogy simulation: for `theta > 0` the line can
/// die out before reaching the target, in which case the partial genealogy is
/// still returned.
#[derive(Debug, Clone)]
pub enum GenealogyOutcome {
    Complete(Vec<GenealogyRecord>),
    ExtinctBeforeTarget(Vec<GenealogyRecord>),
}

impl GenealogyOutcome {
    pub fn records(&self) -> &[GenealogyRecord] {
        match self {
            GenealogyOutcome::Complete(r) | GenealogyOutcome::ExtinctBeforeTarget(r) => r,
        }
    }

    pub fn into_records(self) -> Vec<GenealogyRecord> {
        match self {
            GenealogyOutcome::Complete(r) | GenealogyOutcome::ExtinctBeforeTarget(r) => r,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, GenealogyOutcome::Complete(_))
    }
}

/// A scheduled next birth; the heap pops the earliest event.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PendingBirth {
    time: f64,
    parent: u64,
}

impl Eq for PendingBirth {}

impl Ord for PendingBirth {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // reversed: BinaryHeap is a max-heap, we need the earliest event
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.parent.cmp(&self.parent))
    }
}

impl PartialOrd for PendingBirth {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Next birth age of one individual currently of age `age`, given a standard
/// exponential draw: its birth ages form a Poisson process with intensity
/// `e^{-theta a} da`. `None` when the individual will never reproduce again.
fn next_birth_age(theta: f64, age: f64, draw: f64) -> Option<f64> {
    debug_assert!(draw > 0.0 && age >= 0.0);
    if theta == 0.0 {
        return Some(age + draw);
    }
    let z = theta * draw * (theta * age).exp();
    if theta > 0.0 && z >= 1.0 {
        return None;
    }
    Some(age - (-z).ln_1p() / theta)
}

enum GenealogyStop {
    Target(u64),
    Horizon(f64),
}

fn simulate_genealogy_inner(
    theta: f64,
    stop: GenealogyStop,
    rng: &mut impl Rng,
) -> (Vec<GenealogyRecord>, bool) {
    let mut records = vec![GenealogyRecord {
        id: 1,
        parent: 0,
        birth_time: 0.0,
    }];
    if let GenealogyStop::Target(1) = stop {
        return (records, true);
    }
    let mut birth_times = vec![0.0f64];
    if let GenealogyStop::Target(n) = stop {
        records.reserve(n as usize);
        birth_times.reserve(n as usize);
    }
    let mut queue = BinaryHeap::new();
    if let Some(age) = next_birth_age(theta, 0.0, rng.sample(Exp1)) {
        queue.push(PendingBirth {
            time: age,
            parent: 1,
        });
    }
    while let Some(event) = queue.pop() {
        if let GenealogyStop::Horizon(h) = stop {
            if event.time > h {
                return (records, true);
            }
        }
        let child = records.len() as u64 + 1;
        records.push(GenealogyRecord {
            id: child,
            parent: event.parent,
            birth_time: event.time,
        });
        birth_times.push(event.time);
        // reschedule the parent from its current age
        let parent_birth = birth_times[event.parent as usize - 1];
        if let Some(age) = next_birth_age(theta, event.time - parent_birth, rng.sample(Exp1)) {
            queue.push(PendingBirth {
                time: parent_birth + age,
                parent: event.parent,
            });
        }
        // schedule the newborn's first birth
        if let Some(age) = next_birth_age(theta, 0.0, rng.sample(Exp1)) {
            queue.push(PendingBirth {
                time: event.time + age,
                parent: child,
            });
        }
        if let GenealogyStop::Target(n) = stop {
            if records.len() as u64 == n {
                return (records, true);
            }
        }
    }
    // queue exhausted: the whole population lost its fertility
    let complete = matches!(stop, GenealogyStop::Horizon(_));
    (records, complete)
}

/// Simulates a genealogy until the population reaches size `n`, maintaining a
/// priority queue of per-individual next-birth times. Returns exactly `n`
/// records in birth order with correct parent attribution, or the partial
/// genealogy if the line dies out first (`theta > 0` only).
pub fn simulate_genealogy(theta: f64, n: u64, rng: &mut impl Rng) -> Result<GenealogyOutcome> {
    if n == 0 {
        return Err(Error::Domain("population target must be >= 1".into()));
    }
    let (records, complete) = simulate_genealogy_inner(theta, GenealogyStop::Target(n), rng);
    Ok(if complete {
        GenealogyOutcome::Complete(records)
    } else {
        GenealogyOutcome::ExtinctBeforeTarget(records)
    })
}

/// Simulates a genealogy of every birth up to a time horizon.
pub fn simulate_genealogy_to_horizon(
    theta: f64,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<Vec<GenealogyRecord>> {
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon must be >= 0, got {horizon}")));
    }
    let (records, _) = simulate_genealogy_inner(theta, GenealogyStop::Horizon(horizon), rng);
    Ok(records)
}

/// Writes a genealogy as an edge-list CSV (`id,parent,birth_time`) with
/// full round-trip float precision.
pub fn write_genealogy_csv<W: Write>(records: &[GenealogyRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "id,parent,birth_time")?;
    for r in records {
        writeln!(w, "{},{},{}", r.id, r.parent, full_precision(r.birth_time))?;
    }
    Ok(())
}
