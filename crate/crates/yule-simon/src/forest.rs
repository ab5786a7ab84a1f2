//! Population model with neutral mutations and its allelic partition.
//!
//! Every individual of a simulated genealogy is either a clone of its parent
//! or a mutant founding a new genetic type; cutting the parent edge of every
//! mutant decomposes the population into same-type components. The
//! experiment driver measures the proportion `Q(k)` of components of size
//! `k` and compares it against the limiting Yule-Simon law selected by the
//! mutation regime.
//!
//! The root always counts as a mutant (it founds the original type), so the
//! number of components equals the number of mutants.

use std::io::{self, Write};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cmj::{sample_x_capped, simulate_genealogy, GenealogyRecord};
use crate::distributions::yule_simon_pmf_theta0;
use crate::error::{Error, Result};
use crate::exec::{run_batched, run_batched_sized};
use crate::full_precision;
use crate::params::ModelParams;
use crate::rng::derive_seed;
use crate::summary::MeanAccumulator;

/// How mutation marks are assigned to individuals `2, 3, ...` (the root is
/// always a mutant). The three regimes realize the three asymptotic behaviors
/// of the clone count: proportional, barely sublinear, and power-law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MutationRegime {
    /// Regime (a): each individual is a clone of its parent independently
    /// with probability `clone_prob`; the classical model with
    /// `rho = 1 / clone_prob > 1`.
    IidBernoulli { clone_prob: f64 },
    /// Regime (b): mutant probability `1 / ln(l + 1)` — mutant counts grow
    /// regularly varying of index 1 but sublinearly.
    LogRare,
    /// Regime (c): mutant probability `l^{rho - 1}` for `rho` in (0,1) —
    /// mutant counts grow like `n^rho / rho`.
    PowerRare { rho: f64 },
}

impl MutationRegime {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MutationRegime::IidBernoulli { clone_prob } => {
                if !(clone_prob > 0.0 && clone_prob < 1.0) {
                    return Err(Error::Domain(format!(
                        "clone probability must lie in (0,1), got {clone_prob}"
                    )));
                }
            }
            MutationRegime::LogRare => {}
            MutationRegime::PowerRare { rho } => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::Domain(format!(
                        "regime (c) requires rho in (0,1), got {rho}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Probability that individual `id >= 2` is a mutant.
    pub fn mutant_probability(&self, id: u64) -> f64 {
        debug_assert!(id >= 2);
        match *self {
            MutationRegime::IidBernoulli { clone_prob } => 1.0 - clone_prob,
            MutationRegime::LogRare => 1.0 / ((id + 1) as f64).ln(),
            MutationRegime::PowerRare { rho } => (id as f64).powf(rho - 1.0),
        }
    }

    /// Regime letter used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            MutationRegime::IidBernoulli { .. } => "a",
            MutationRegime::LogRare => "b",
            MutationRegime::PowerRare { .. } => "c",
        }
    }
}

/// Draws the mutation marks for individuals `1..=n` (index `l - 1` holds
/// individual `l`). Marks are independent across individuals and independent
/// of any genealogy; the root is always marked.
pub fn draw_marks(regime: MutationRegime, n: u64, rng: &mut impl Rng) -> Vec<bool> {
    let mut marks = Vec::with_capacity(n as usize);
    if n >= 1 {
        marks.push(true);
    }
    for id in 2..=n {
        marks.push(rng.random::<f64>() < regime.mutant_probability(id));
    }
    marks
}

/// Assigns mutation marks to a genealogy: one boolean per record, aligned
/// with ids. Individual 1 is always a mutant.
pub fn mark_mutations(
    genealogy: &[GenealogyRecord],
    regime: MutationRegime,
    rng: &mut impl Rng,
) -> Result<Vec<bool>> {
    regime.validate()?;
    if genealogy.is_empty() || genealogy[0].id != 1 {
        return Err(Error::Input("genealogy must start at individual 1".into()));
    }
    Ok(draw_marks(regime, genealogy.len() as u64, rng))
}

/// The decomposition of a population into maximal same-type groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AllelicPartition {
    /// Component sizes in ascending order.
    pub component_sizes: Vec<u64>,
    pub mutant_count: u64,
    pub population: u64,
}

/// Cuts the parent edge of every mutant and collects component sizes in one
/// pass over ids in decreasing order (each clone merges into its parent's
/// component; parents always precede children in id order).
pub fn allelic_partition(
    genealogy: &[GenealogyRecord],
    marks: &[bool],
) -> Result<AllelicPartition> {
    if genealogy.len() != marks.len() {
        return Err(Error::Input(format!(
            "marks length {} does not match genealogy length {}",
            marks.len(),
            genealogy.len()
        )));
    }
    if genealogy.is_empty() {
        return Err(Error::Input("genealogy must be nonempty".into()));
    }
    let n = genealogy.len();
    let mut sizes = vec![1u64; n];
    for idx in (1..n).rev() {
        let record = &genealogy[idx];
        debug_assert_eq!(record.id as usize, idx + 1);
        if !marks[idx] {
            let parent = record.parent as usize - 1;
            debug_assert!(parent < idx);
            sizes[parent] += sizes[idx];
        }
    }
    let mut component_sizes: Vec<u64> = marks
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(idx, _)| sizes[idx])
        .collect();
    component_sizes.sort_unstable();
    debug_assert_eq!(component_sizes.iter().sum::<u64>(), n as u64);
    Ok(AllelicPartition {
        mutant_count: component_sizes.len() as u64,
        population: n as u64,
        component_sizes,
    })
}

/// Proportions `Q(k) = (#components of size k) / mutant_count` for
/// `k = 1..=k_max`.
pub fn empirical_q(partition: &AllelicPartition, k_max: u64) -> Vec<(u64, f64)> {
    let mut counts = vec![0u64; k_max as usize + 1];
    for &size in &partition.component_sizes {
        if size <= k_max {
            counts[size as usize] += 1;
        }
    }
    let m = partition.mutant_count as f64;
    (1..=k_max)
        .map(|k| (k, counts[k as usize] as f64 / m))
        .collect()
}

/// The parameters of the limiting Yule-Simon law for sub-population size
/// frequencies: `(theta rho, (1-theta) rho)` in regime (a), `(theta,
/// 1-theta)` in (b), `(theta, (1-theta) rho)` in (c). Only `theta <= 0` is
/// supported (positive decay would require conditioning on non-extinction).
pub fn regime_target(theta: f64, regime: MutationRegime) -> Result<ModelParams> {
    if theta > 0.0 {
        return Err(Error::Domain(format!(
            "forest limits require theta <= 0 (conditioning on survival is out of scope), got {theta}"
        )));
    }
    regime.validate()?;
    match regime {
        MutationRegime::IidBernoulli { clone_prob } => {
            let rho = 1.0 / clone_prob;
            ModelParams::new(theta * rho, (1.0 - theta) * rho)
        }
        MutationRegime::LogRare => ModelParams::new(theta, 1.0 - theta),
        MutationRegime::PowerRare { rho } => ModelParams::new(theta, (1.0 - theta) * rho),
    }
}

/// How the target pmf of a [`ForestExperiment`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Closed form, available when the limiting theta is 0.
    Analytic,
    /// Estimated by exact sampling of the limiting law.
    MonteCarlo,
}

/// One `k` row of a forest experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ForestRow {
    pub k: u64,
    pub q_emp: f64,
    pub q_emp_stderr: f64,
    pub q_target: f64,
    pub q_target_stderr: f64,
}

/// Averaged sub-population size frequencies over independent forest runs,
/// side by side with the limiting pmf.
#[derive(Debug, Clone, Serialize)]
pub struct ForestExperiment {
    pub theta: f64,
    pub regime: MutationRegime,
    pub n: u64,
    pub runs: u64,
    pub k_max: u64,
    pub seed: u64,
    pub target: ModelParams,
    pub target_kind: TargetKind,
    pub target_replicates: u64,
    pub rows: Vec<ForestRow>,
    /// Mean over runs of the mutant count.
    pub mean_mutant_count: f64,
    /// Mean over runs of the average component size `n / m(n)`.
    pub mean_component_size: f64,
    pub wall_time_seconds: f64,
}

impl ForestExperiment {
    /// CSV rows `k,Q_emp,Q_target,stderr`, where `stderr` is the combined
    /// standard error of the difference (empirical and target errors in
    /// quadrature). The JSON document carries both errors separately.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,Q_emp,Q_target,stderr")?;
        for row in &self.rows {
            let combined = row.q_emp_stderr.hypot(row.q_target_stderr);
            writeln!(
                w,
                "{},{},{},{}",
                row.k,
                full_precision(row.q_emp),
                full_precision(row.q_target),
                full_precision(combined)
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("experiment serialization cannot fail")
    }
}

struct RunAcc {
    q: Vec<MeanAccumulator>,
    mutants: MeanAccumulator,
    component_size: MeanAccumulator,
}

/// Simulates `runs` genealogies of size `n`, marks and partitions them, and
/// averages the `Q(k)` table for `k <= k_max`. The target pmf is analytic
/// when the limiting theta is 0, otherwise estimated from `target_replicates`
/// exact samples of the limiting law (with its own standard errors).
pub fn run_forest_experiment(
    theta: f64,
    regime: MutationRegime,
    n: u64,
    runs: u64,
    k_max: u64,
    target_replicates: u64,
    seed: u64,
) -> Result<ForestExperiment> {
    let target = regime_target(theta, regime)?;
    if n < 10 {
        return Err(Error::Domain(format!("population size must be >= 10, got {n}")));
    }
    if runs == 0 || k_max == 0 {
        return Err(Error::Domain("runs and k_max must be >= 1".into()));
    }
    let start = Instant::now();

    // one replicate = one full genealogy run, so batches of one
    let acc = run_batched_sized(
        derive_seed(seed, 1),
        runs,
        1,
        || RunAcc {
            q: vec![MeanAccumulator::default(); k_max as usize],
            mutants: MeanAccumulator::default(),
            component_size: MeanAccumulator::default(),
        },
        |acc, _run, rng| {
            let genealogy = simulate_genealogy(theta, n, rng)
                .expect("n >= 1")
                .into_records();
            debug_assert_eq!(genealogy.len() as u64, n);
            let marks = draw_marks(regime, n, rng);
            let partition = allelic_partition(&genealogy, &marks).expect("aligned marks");
            for (slot, (_, q)) in acc.q.iter_mut().zip(empirical_q(&partition, k_max)) {
                slot.add(q);
            }
            acc.mutants.add(partition.mutant_count as f64);
            acc.component_size
                .add(partition.population as f64 / partition.mutant_count as f64);
        },
        |a, b| {
            for (x, y) in a.q.iter_mut().zip(b.q.iter()) {
                x.merge(y);
            }
            a.mutants.merge(&b.mutants);
            a.component_size.merge(&b.component_size);
        },
    );

    let (target_kind, target_rows) = if target.theta == 0.0 {
        let rows: Vec<(f64, f64)> = (1..=k_max)
            .map(|k| Ok((yule_simon_pmf_theta0(target.rho, k)?, 0.0)))
            .collect::<Result<_>>()?;
        (TargetKind::Analytic, rows)
    } else {
        if target_replicates < 2 {
            return Err(Error::Input(
                "a Monte Carlo target needs at least 2 replicates".into(),
            ));
        }
        let counts = run_batched(
            derive_seed(seed, 2),
            target_replicates,
            || vec![0u64; k_max as usize + 2],
            |counts, _replicate, rng| {
                let x = sample_x_capped(&target, k_max, rng);
                counts[x as usize] += 1;
            },
            |a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
            },
        );
        let r = target_replicates as f64;
        let rows = (1..=k_max)
            .map(|k| {
                let p = counts[k as usize] as f64 / r;
                (p, (p * (1.0 - p) / r).sqrt())
            })
            .collect();
        (TargetKind::MonteCarlo, rows)
    };

    let rows = acc
        .q
        .iter()
        .zip(target_rows)
        .enumerate()
        .map(|(i, (stat, (q_target, q_target_stderr)))| ForestRow {
            k: i as u64 + 1,
            q_emp: stat.mean(),
            q_emp_stderr: stat.stderr(),
            q_target,
            q_target_stderr,
        })
        .collect();

    Ok(ForestExperiment {
        theta,
        regime,
        n,
        runs,
        k_max,
        seed,
        target,
        target_kind,
        target_replicates: if target_kind == TargetKind::MonteCarlo {
            target_replicates
        } else {
            0
        },
        rows,
        mean_mutant_count: acc.mutants.mean(),
        mean_component_size: acc.component_size.mean(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}
