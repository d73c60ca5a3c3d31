//! k-wise independent hashing into machine ids.
//!
//! A [`HashFn`] is a random polynomial of degree `k-1` over a prime field,
//! reduced modulo the machine count. The same seed gives the same
//! coefficients on every machine, so sharing a hash function costs only the
//! broadcast of `k` words.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sim::ceil_log2;

/// 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashError {
    #[error("range {0} is not a power of two")]
    InvalidRange(u64),
    #[error("key {key} outside domain of size {domain}")]
    KeyOutOfDomain { key: u64, domain: u64 },
    #[error("domain {domain} does not fit the field modulus {p}")]
    DomainTooLarge { domain: u64, p: u64 },
    #[error("a hash function needs at least one coefficient")]
    NoCoefficients,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashFn {
    /// Constant term first.
    coefficients: Vec<u64>,
    p: u64,
    domain: u64,
    range: u64,
}

/// Independence degree used throughout: `max(1, ceil(log2 m))`.
pub fn universal_k(range: u64) -> usize {
    (ceil_log2(range as usize) as usize).max(1)
}

impl HashFn {
    /// Build from explicit coefficients (constant term first).
    pub fn from_coefficients(coefficients: Vec<u64>, p: u64, domain: u64, range: u64) -> Result<Self, HashError> {
        if coefficients.is_empty() {
            return Err(HashError::NoCoefficients);
        }
        if range == 0 || !range.is_power_of_two() {
            return Err(HashError::InvalidRange(range));
        }
        if domain > p {
            return Err(HashError::DomainTooLarge { domain, p });
        }
        let coefficients = coefficients.into_iter().map(|c| c % p).collect();
        Ok(HashFn { coefficients, p, domain, range })
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    /// Horner evaluation mod p, then mod m.
    pub fn eval(&self, key: u64) -> Result<usize, HashError> {
        if key >= self.domain {
            return Err(HashError::KeyOutOfDomain { key, domain: self.domain });
        }
        Ok(self.eval_unchecked(key))
    }

    /// Evaluation without the domain check, for keys known to be in range.
    pub fn eval_unchecked(&self, key: u64) -> usize {
        let p = self.p as u128;
        let x = key as u128 % p;
        let mut acc: u128 = 0;
        for &c in self.coefficients.iter().rev() {
            acc = (acc * x + c as u128) % p;
        }
        (acc as u64 % self.range) as usize
    }
}

/// Sample a degree-`(k-1)` polynomial over GF(2^61 - 1).
pub fn sample_hash(seed: u64, k: usize, domain: u64, range: u64) -> Result<HashFn, HashError> {
    sample_hash_mod(seed, k, domain, range, MERSENNE_61)
}

/// As [`sample_hash`] with an explicit prime modulus.
pub fn sample_hash_mod(seed: u64, k: usize, domain: u64, range: u64, p: u64) -> Result<HashFn, HashError> {
    if k == 0 {
        return Err(HashError::NoCoefficients);
    }
    if range == 0 || !range.is_power_of_two() {
        return Err(HashError::InvalidRange(range));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients = (0..k).map(|_| rng.gen_range(0..p)).collect();
    HashFn::from_coefficients(coefficients, p, domain, range)
}

/// The `(log m)`-universal hash used to place objects on `m` machines.
/// Non-power-of-two machine counts use the largest power of two below them.
pub fn machine_hash(seed: u64, domain: u64, machines: usize) -> HashFn {
    let range = prev_power_of_two(machines as u64);
    sample_hash(seed, universal_k(range), domain.max(1), range)
        .expect("power-of-two range and domain below 2^61")
}

pub fn prev_power_of_two(x: u64) -> u64 {
    if x == 0 {
        1
    } else {
        1 << (63 - x.leading_zeros())
    }
}

/// Independent pseudorandom stream number `stream` of a run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightedItem {
    pub index: u64,
    pub weight: u64,
}

/// Send item `a` to machine `h(index(a))`. Returns the assignment and the
/// maximum per-machine total weight.
pub fn distribute_weighted(items: &[WeightedItem], h: &HashFn) -> Result<(BTreeMap<u64, usize>, u64), HashError> {
    let mut assignment = BTreeMap::new();
    let mut loads = vec![0u64; h.range() as usize];
    for it in items {
        let machine = h.eval(it.index)?;
        loads[machine] += it.weight;
        assignment.insert(it.index, machine);
    }
    Ok((assignment, loads.into_iter().max().unwrap_or(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_zero_ignores_key() {
        let h = sample_hash(3, 1, 1000, 8).unwrap();
        let c = (h.coefficients()[0] % 8) as usize;
        for key in [0, 1, 17, 999] {
            assert_eq!(h.eval(key).unwrap(), c);
        }
    }

    #[test]
    fn same_seed_same_coefficients() {
        let a = sample_hash(42, 4, 1 << 20, 64).unwrap();
        let b = sample_hash(42, 4, 1 << 20, 64).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
    }

    #[test]
    fn hand_evaluated_small_field() {
        let h = HashFn::from_coefficients(vec![3, 5], 13, 13, 4).unwrap();
        assert_eq!(h.eval(4).unwrap(), 2);
    }

    #[test]
    fn errors() {
        assert_eq!(sample_hash(0, 2, 10, 6).unwrap_err(), HashError::InvalidRange(6));
        let h = sample_hash(0, 2, 10, 4).unwrap();
        assert_eq!(h.eval(10).unwrap_err(), HashError::KeyOutOfDomain { key: 10, domain: 10 });
    }

    #[test]
    fn single_item_load() {
        let h = sample_hash(1, 2, 100, 4).unwrap();
        let (_, load) = distribute_weighted(&[WeightedItem { index: 5, weight: 7 }], &h).unwrap();
        assert_eq!(load, 7);
    }

    #[test]
    fn pigeonhole_load() {
        let h = sample_hash(9, 2, 100, 8).unwrap();
        let items: Vec<_> = (0..8).map(|i| WeightedItem { index: i, weight: 1 }).collect();
        let (assign, load) = distribute_weighted(&items, &h).unwrap();
        assert!(load >= 1);
        assert_eq!(assign.len(), 8);
    }

    #[test]
    fn prev_power() {
        assert_eq!(prev_power_of_two(1), 1);
        assert_eq!(prev_power_of_two(12), 8);
        assert_eq!(prev_power_of_two(16), 16);
    }

    proptest! {
        // Machines rebuilding the function from broadcast coefficients agree.
        #[test]
        fn rebuilt_function_agrees(seed in any::<u64>(), keys in proptest::collection::vec(0u64..1_000_000, 1..50)) {
            let h = sample_hash(seed, 6, 1_000_000, 64).unwrap();
            let copy = HashFn::from_coefficients(h.coefficients().to_vec(), h.modulus(), h.domain(), h.range()).unwrap();
            for k in keys {
                prop_assert_eq!(h.eval(k).unwrap(), copy.eval(k).unwrap());
                prop_assert!(h.eval(k).unwrap() < 64);
            }
        }
    }
}
