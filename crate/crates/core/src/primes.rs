//! Prime tables.
//!
//! Limits up to [`SEGMENT_THRESHOLD`] use a plain odd-only sieve of
//! Eratosthenes; larger limits are sieved in fixed-size segments so memory
//! stays proportional to the number of primes rather than to the limit.

use std::sync::{Arc, Mutex};

use crate::{Error, Result};

/// Limits above this value are sieved segment by segment.
pub const SEGMENT_THRESHOLD: u64 = 10_000_000;

/// Number of odd values covered by one segment.
const SEGMENT_ODDS: usize = 1 << 18;

/// All primes up to `limit`, in increasing order. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Primes `<= n`; `n` may not exceed the table limit.
    pub fn up_to(&self, n: u64) -> &[u64] {
        assert!(n <= self.limit, "requested primes up to {n} from a table built to {}", self.limit);
        &self.primes[..self.count_up_to(n)]
    }

    /// `pi(n)` for `n <= limit`.
    pub fn count_up_to(&self, n: u64) -> usize {
        self.primes.partition_point(|&p| p <= n)
    }

    pub fn contains(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }
}

/// All primes `<= limit`.
pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    if limit < 2 {
        return Err(Error::EmptyTable { limit });
    }
    let primes = if limit > SEGMENT_THRESHOLD {
        sieve_segmented(limit)
    } else {
        sieve_plain(limit)
    };
    Ok(PrimeTable { limit, primes })
}

/// `pi(limit)`; zero for `limit < 2`.
pub fn prime_count(limit: u64) -> u64 {
    match sieve_primes(limit) {
        Ok(table) => table.len() as u64,
        Err(_) => 0,
    }
}

/// Shared table covering at least `limit`, rebuilt only when a larger limit
/// is requested. Callers slice it with [`PrimeTable::up_to`].
pub fn shared(limit: u64) -> Result<Arc<PrimeTable>> {
    static CACHE: Mutex<Option<Arc<PrimeTable>>> = Mutex::new(None);
    let mut guard = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(table) = guard.as_ref() {
        if table.limit() >= limit {
            return Ok(Arc::clone(table));
        }
    }
    let table = Arc::new(sieve_primes(limit.max(2))?);
    *guard = Some(Arc::clone(&table));
    Ok(table)
}

fn sieve_plain(limit: u64) -> Vec<u64> {
    // index i stands for the odd number 2i + 1
    let n_odd = ((limit - 1) / 2 + 1) as usize;
    let mut composite = vec![false; n_odd];
    composite[0] = true;
    let mut i = 1usize;
    while (2 * i + 1) * (2 * i + 1) <= limit as usize {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = (p * p - 1) / 2;
            while j < n_odd {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = Vec::with_capacity(estimate_count(limit));
    primes.push(2);
    primes.extend(
        composite
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(i, _)| 2 * i as u64 + 1),
    );
    primes
}

pub(crate) fn sieve_segmented(limit: u64) -> Vec<u64> {
    let root = (limit as f64).sqrt() as u64 + 1;
    let base: Vec<u64> = sieve_plain(root.max(2)).into_iter().skip(1).collect();
    let mut primes = Vec::with_capacity(estimate_count(limit));
    primes.push(2);

    let mut segment = vec![false; SEGMENT_ODDS];
    // segments cover odd numbers lo, lo + 2, ..., lo + 2 (SEGMENT_ODDS - 1)
    let mut lo = 3u64;
    while lo <= limit {
        let hi = (lo + 2 * (SEGMENT_ODDS as u64 - 1)).min(limit | 1);
        let len = ((hi - lo) / 2 + 1) as usize;
        segment[..len].iter_mut().for_each(|c| *c = false);
        for &p in &base {
            let p2 = p * p;
            if p2 > hi {
                break;
            }
            let mut start = if p2 >= lo { p2 } else { lo.div_ceil(p) * p };
            if start % 2 == 0 {
                start += p;
            }
            let mut j = ((start - lo) / 2) as usize;
            while j < len {
                segment[j] = true;
                j += p as usize;
            }
        }
        primes.extend(
            segment[..len]
                .iter()
                .enumerate()
                .filter(|(_, c)| !**c)
                .map(|(i, _)| lo + 2 * i as u64)
                .filter(|&n| n <= limit),
        );
        lo = hi + 2;
    }
    primes
}

fn estimate_count(limit: u64) -> usize {
    let x = limit as f64;
    if x < 17.0 {
        8
    } else {
        (1.26 * x / x.ln()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn small_tables() {
        assert_eq!(sieve_primes(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(sieve_primes(30).unwrap().len(), 10);
        assert_eq!(sieve_primes(2).unwrap().primes(), &[2]);
        assert_eq!(sieve_primes(3).unwrap().primes(), &[2, 3]);
    }

    #[test]
    fn limit_below_two_is_an_error() {
        assert_eq!(sieve_primes(1), Err(Error::EmptyTable { limit: 1 }));
        assert_eq!(sieve_primes(0), Err(Error::EmptyTable { limit: 0 }));
    }

    #[test]
    fn counts() {
        assert_eq!(prime_count(0), 0);
        assert_eq!(prime_count(1), 0);
        assert_eq!(prime_count(100), 25);
    }

    #[test]
    fn membership_matches_trial_division() {
        let table = sieve_primes(5000).unwrap();
        for n in 0..=5000 {
            assert_eq!(table.contains(n), naive_is_prime(n), "n = {n}");
        }
    }

    #[test]
    fn segmented_agrees_with_plain() {
        for limit in [2u64, 3, 4, 97, 1000, 524_287, 524_288, 1_048_577, 3_000_001] {
            assert_eq!(sieve_segmented(limit), sieve_plain(limit), "limit = {limit}");
        }
    }

    #[test]
    fn up_to_slices() {
        let table = sieve_primes(100).unwrap();
        assert_eq!(table.up_to(10), &[2, 3, 5, 7]);
        assert_eq!(table.count_up_to(1), 0);
        assert_eq!(table.count_up_to(97), 25);
    }
}
