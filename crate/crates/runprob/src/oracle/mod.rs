//! Ground-truth generators: exhaustive enumeration over all outcome
//! sequences (exact) and a seeded, reproducible Monte Carlo simulator.
//! Every analytic evaluator is validated against these.

pub mod rng;

use crate::core::{to_f64_lossy, Error, Method, MethodResult, Result, RunQuery};
use num::{BigRational, One, Zero};
use rng::{SplitMix64, Xoshiro256PlusPlus};

/// Exhaustive enumeration cap: 2^24 sequences is still desk-scale.
pub const BRUTE_FORCE_CAP: u64 = 24;

/// Number of fixed Monte Carlo sub-streams. Trials are pre-partitioned into
/// this many chunks with per-chunk seeds derived from the master seed, so
/// the estimate is bit-identical no matter how many worker threads run.
const MC_SUBSTREAMS: u64 = 64;

/// Does the bit pattern contain `r` consecutive ones?
///
/// Folding `mask &= mask >> 1` leaves bit j set iff a run starts there, so
/// r-1 folds detect a run of r anywhere, in O(r) word operations.
fn has_run(mask: u64, r: u32) -> bool {
    let mut m = mask;
    for _ in 1..r {
        m &= m >> 1;
        if m == 0 {
            return false;
        }
    }
    m != 0
}

/// Exact `z_n` by enumerating all `2^n` success/failure sequences.
///
/// Sequences are bucketed by success count, so the exact-rational work is a
/// single (n+1)-term dot product no matter how many sequences there are.
pub fn z_bruteforce(query: &RunQuery) -> Result<MethodResult> {
    let n = query.n();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::CapExceeded { n, cap: BRUTE_FORCE_CAP });
    }
    let r = query.r();
    if r as u64 > n {
        // no sequence of n trials can hold a longer run
        return Ok(MethodResult::exact(Method::BruteForce, BigRational::one()));
    }
    let mut counts = vec![0u64; n as usize + 1];
    for mask in 0u64..(1u64 << n) {
        if has_run(mask, r) {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    // y = sum over run-containing sequences of p^successes q^failures
    let p = query.p();
    let q = query.q();
    let mut p_pows = Vec::with_capacity(n as usize + 1);
    let mut q_pows = Vec::with_capacity(n as usize + 1);
    let mut acc_p = BigRational::one();
    let mut acc_q = BigRational::one();
    for _ in 0..=n {
        p_pows.push(acc_p.clone());
        q_pows.push(acc_q.clone());
        acc_p *= p;
        acc_q *= &q;
    }
    let mut y = BigRational::zero();
    for (k, &count) in counts.iter().enumerate() {
        if count > 0 {
            y += BigRational::from_integer(count.into()) * &p_pows[k] * &q_pows[n as usize - k];
        }
    }
    Ok(MethodResult::exact(Method::BruteForce, BigRational::one() - y))
}

/// A Monte Carlo estimate of the run probability `y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub y_hat: f64,
    pub trials: u64,
    pub std_err: f64,
    pub seed: u64,
}

impl McEstimate {
    /// View as a float-mode result (`z = 1 - y_hat`, `std_err` as bound).
    pub fn to_method_result(&self) -> Result<MethodResult> {
        MethodResult::try_float(Method::MonteCarlo, 1.0 - self.y_hat, Some(self.std_err))
    }
}

/// Simulate `trials` sequences of `n` Bernoulli(p) draws and report the
/// fraction containing a run of at least `r` successes.
///
/// Streams: xoshiro256++ seeded via splitmix64; the trial budget is split
/// into 64 fixed chunks whose seeds derive from `seed` by successive
/// splitmix64 outputs. Chunk results are combined in chunk order, so the
/// estimate depends only on `(query, trials, seed)`, never on thread count.
/// `p` is sampled at double resolution. Each sequence stops at the first
/// run found.
pub fn mc_estimate(query: &RunQuery, trials: u64, seed: u64) -> Result<McEstimate> {
    mc_estimate_with_workers(query, trials, seed, default_workers())
}

/// Worker-count override, primarily for tests; results are identical for
/// any `workers >= 1`.
pub fn mc_estimate_with_workers(
    query: &RunQuery,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let p = to_f64_lossy(query.p());
    let r = query.r();
    let n = query.n();

    let mut chunk_sizes = [0u64; MC_SUBSTREAMS as usize];
    for (i, size) in chunk_sizes.iter_mut().enumerate() {
        *size = trials / MC_SUBSTREAMS + u64::from((i as u64) < trials % MC_SUBSTREAMS);
    }
    let mut sub_seeds = [0u64; MC_SUBSTREAMS as usize];
    let mut sm = SplitMix64::new(seed);
    for s in sub_seeds.iter_mut() {
        *s = sm.next_u64();
    }

    let run_chunk = |idx: usize| -> u64 {
        let mut rng = Xoshiro256PlusPlus::from_seed(sub_seeds[idx]);
        let mut hits = 0u64;
        for _ in 0..chunk_sizes[idx] {
            let mut streak = 0u32;
            for _ in 0..n {
                if rng.next_f64() < p {
                    streak += 1;
                    if streak >= r {
                        hits += 1;
                        break;
                    }
                } else {
                    streak = 0;
                }
            }
        }
        hits
    };

    let workers = workers.clamp(1, MC_SUBSTREAMS as usize);
    let mut chunk_hits = [0u64; MC_SUBSTREAMS as usize];
    if workers == 1 {
        for (idx, slot) in chunk_hits.iter_mut().enumerate() {
            *slot = run_chunk(idx);
        }
    } else {
        let collected: Vec<Vec<(usize, u64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        let mut idx = w;
                        while idx < MC_SUBSTREAMS as usize {
                            out.push((idx, run_chunk(idx)));
                            idx += workers;
                        }
                        out
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("mc worker")).collect()
        });
        for part in collected {
            for (idx, hits) in part {
                chunk_hits[idx] = hits;
            }
        }
    }

    let hits: u64 = chunk_hits.iter().sum();
    let y_hat = hits as f64 / trials as f64;
    let std_err = (y_hat * (1.0 - y_hat) / trials as f64).sqrt();
    Ok(McEstimate { y_hat, trials, std_err, seed })
}

fn default_workers() -> usize {
    match std::env::var("RUNPROB_THREADS") {
        Ok(v) => v.parse().unwrap_or(1).max(1),
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}
