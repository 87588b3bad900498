//! Matsubara summation with tail control and a deterministic reduction.
//!
//! Terms are evaluated in blocks of fixed, thread-independent size. Inside a
//! block the terms may be computed in parallel; they are always combined by
//! the same pairwise tree, and block sums are accumulated in index order, so
//! results are bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Stopping rule for a Matsubara sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraPolicy {
    /// Absolute tail tolerance (J).
    pub abs_tol: f64,
    /// Relative tail tolerance.
    pub rel_tol: f64,
    /// Minimum number of terms (including `n = 0`).
    pub n_min: u64,
    /// Hard cap on the number of terms.
    pub n_max: u64,
    /// Terms with `κ_n d_min` above this value are screened out.
    pub screening_cutoff: f64,
    /// Sum exactly this many terms, ignoring the tolerances.
    pub fixed_terms: Option<u64>,
}

impl Default for MatsubaraPolicy {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            n_min: 4,
            n_max: 2_000_000,
            screening_cutoff: 40.0,
            fixed_terms: None,
        }
    }
}

impl MatsubaraPolicy {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_n_max(mut self, n_max: u64) -> Self {
        self.n_max = n_max;
        self
    }

    /// Same policy pinned to a fixed number of terms.
    pub fn pinned(&self, terms: u64) -> Self {
        Self {
            fixed_terms: Some(terms),
            ..self.clone()
        }
    }
}

/// How a sum terminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    /// Number of terms summed (`n = 0 .. terms − 1`).
    pub terms: u64,
    /// Geometric estimate of the neglected tail of the primary component,
    /// in the units of the summed terms.
    pub tail_estimate: f64,
    /// Stopped because the remaining terms are exponentially screened.
    pub screened: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatsubaraSum<const K: usize> {
    pub values: [f64; K],
    pub convergence: Convergence,
}

const FIRST_BLOCK: u64 = 8;
const MAX_BLOCK: u64 = 1024;
const PARALLEL_BLOCK: u64 = 64;

fn add<const K: usize>(a: [f64; K], b: [f64; K]) -> [f64; K] {
    let mut out = a;
    for (o, v) in out.iter_mut().zip(b) {
        *o += v;
    }
    out
}

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum<const K: usize>(terms: &[[f64; K]]) -> [f64; K] {
    match terms.len() {
        0 => [0.0; K],
        1 => terms[0],
        n if n <= 4 => terms[1..].iter().fold(terms[0], |acc, t| add(acc, *t)),
        n => {
            let (l, r) = terms.split_at(n / 2);
            add(pairwise_sum(l), pairwise_sum(r))
        }
    }
}

fn norm<const K: usize>(v: &[f64; K]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum `Σ′_n term(n)` with the `n = 0` term at half weight.
///
/// The Euclidean norm of each term vector drives the stopping rule. `abs_tol` is in the
/// units of the terms; `min_separation` is in the length unit conjugate to
/// `kappa_unit`, and together they set the screening index.
pub(crate) fn matsubara_sum<const K: usize, F>(
    policy: &MatsubaraPolicy,
    abs_tol: f64,
    kappa_unit: f64,
    min_separation: f64,
    term: F,
) -> Result<MatsubaraSum<K>>
where
    F: Fn(u64) -> Result<[f64; K]> + Sync,
{
    let weighted = |n: u64| -> Result<[f64; K]> {
        let mut t = term(n)?;
        if n == 0 {
            t.iter_mut().for_each(|v| *v *= 0.5);
        }
        Ok(t)
    };
    let eval_block = |start: u64, end: u64| -> Result<Vec<[f64; K]>> {
        if end - start >= PARALLEL_BLOCK {
            (start..end).into_par_iter().map(weighted).collect()
        } else {
            (start..end).map(weighted).collect()
        }
    };

    if let Some(fixed) = policy.fixed_terms {
        let mut total = [0.0; K];
        let mut start = 0;
        let mut size = FIRST_BLOCK;
        while start < fixed {
            let end = (start + size).min(fixed);
            total = add(total, pairwise_sum(&eval_block(start, end)?));
            start = end;
            size = (size * 2).min(MAX_BLOCK);
        }
        return Ok(MatsubaraSum {
            values: total,
            convergence: Convergence {
                terms: fixed,
                tail_estimate: 0.0,
                screened: false,
            },
        });
    }

    // First index whose κ_n d_min exceeds the cutoff.
    let screen_at = if min_separation > 0.0 && kappa_unit > 0.0 {
        let n = (policy.screening_cutoff / (kappa_unit * min_separation)).floor();
        if n >= u64::MAX as f64 {
            u64::MAX
        } else {
            n as u64 + 1
        }
    } else {
        u64::MAX
    };

    let mut total = [0.0; K];
    let mut start = 0u64;
    let mut size = FIRST_BLOCK.max(policy.n_min);
    let mut last = [0.0f64; 3];
    let mut tail;
    loop {
        let end = (start + size).min(screen_at).min(policy.n_max.max(1));
        let block = eval_block(start, end)?;
        total = add(total, pairwise_sum(&block));
        for t in &block {
            last = [last[1], last[2], norm(t)];
        }
        start = end;
        size = (size * 2).min(MAX_BLOCK);

        tail = tail_bound(&last, start);
        let threshold = abs_tol.max(policy.rel_tol * norm(&total));
        if start >= policy.n_min && tail <= threshold {
            break;
        }
        if start >= screen_at {
            log::trace!("Matsubara sum screened at n = {start}");
            return Ok(MatsubaraSum {
                values: total,
                convergence: Convergence {
                    terms: start,
                    tail_estimate: if tail.is_finite() { tail } else { last[2] },
                    screened: true,
                },
            });
        }
        if start >= policy.n_max {
            return Err(Error::NoConvergence {
                terms: start,
                partial_sum: total[0],
                tail,
            });
        }
    }
    Ok(MatsubaraSum {
        values: total,
        convergence: Convergence {
            terms: start,
            tail_estimate: tail,
            screened: false,
        },
    })
}

/// Geometric tail bound from the last three magnitudes. Only trusted once the
/// ratio of successive terms is below one and non-increasing, which holds for
/// polynomial × exponential decay past its peak.
fn tail_bound(last: &[f64; 3], seen: u64) -> f64 {
    let [a, b, c] = *last;
    if seen < 3 {
        return f64::INFINITY;
    }
    if c == 0.0 && b == 0.0 {
        return 0.0;
    }
    if b == 0.0 || a == 0.0 {
        return f64::INFINITY;
    }
    let q = c / b;
    let q_prev = b / a;
    if q < 1.0 && q <= q_prev * (1.0 + 1e-12) {
        c * q / (1.0 - q)
    } else {
        f64::INFINITY
    }
}
