//! Shared statistical helpers for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_pvalue(stat: f64, dof: f64) -> f64 {
    assert!(dof >= 1.0);
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Goodness-of-fit test of observed counts against expected counts.
/// Returns (statistic, p-value); bins with expected < 5 must be merged by
/// the caller beforehand.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2);
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            assert!(e > 0.0);
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    (stat, chi_square_pvalue(stat, dof))
}

/// Two-sample chi-square homogeneity test on aligned histograms.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let ka: f64 = a.iter().sum::<u64>() as f64;
    let kb: f64 = b.iter().sum::<u64>() as f64;
    assert!(ka > 0.0 && kb > 0.0);
    let (ra, rb) = ((kb / ka).sqrt(), (ka / kb).sqrt());
    let mut stat = 0.0;
    let mut dof = -1.0f64;
    for (&oa, &ob) in a.iter().zip(b) {
        let total = oa + ob;
        if total == 0 {
            continue;
        }
        let d = ra * oa as f64 - rb * ob as f64;
        stat += d * d / total as f64;
        dof += 1.0;
    }
    assert!(dof >= 1.0, "not enough occupied bins");
    (stat, chi_square_pvalue(stat, dof))
}

/// Collapses a histogram's sparse upper tail into the last kept bin so that
/// every expected count stays above `min_expected`.
pub fn merge_tail(observed: &mut Vec<u64>, expected: &mut Vec<f64>, min_expected: f64) {
    while expected.len() > 2 && *expected.last().unwrap() < min_expected {
        let o = observed.pop().unwrap();
        let e = expected.pop().unwrap();
        *observed.last_mut().unwrap() += o;
        *expected.last_mut().unwrap() += e;
    }
}
