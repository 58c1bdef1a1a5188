//! Bounded discrete logarithms: find `k <= bound` with `base^k = target`.
//!
//! Two solvers are provided. Baby-step giant-step is deterministic and is the
//! default. The Pollard solver uses the kangaroo (lambda) walk, the member of
//! Pollard's rho family that runs in `O(sqrt(bound))` on an interval instead
//! of `O(sqrt(q))` on the whole group.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::group::{GroupElement, GroupParams};
use crate::seed::splitmix64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DlogError {
    #[error("no exponent in [0, {bound}] maps to the target")]
    NotFound { bound: u64 },
    #[error("bound {bound} is not smaller than the group order")]
    BoundTooLarge { bound: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DlogAlgorithm {
    #[default]
    Bsgs,
    PollardRho,
}

impl fmt::Display for DlogAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DlogAlgorithm::Bsgs => "bsgs",
            DlogAlgorithm::PollardRho => "pollard_rho",
        })
    }
}

impl FromStr for DlogAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bsgs" => Ok(DlogAlgorithm::Bsgs),
            "pollard_rho" | "rho" | "kangaroo" => Ok(DlogAlgorithm::PollardRho),
            other => Err(format!("unknown dlog algorithm `{other}`")),
        }
    }
}

fn check_bound(params: &GroupParams, bound: u64) -> Result<(), DlogError> {
    if BigUint::from(bound) >= *params.q() {
        return Err(DlogError::BoundTooLarge { bound });
    }
    Ok(())
}

/// Precomputed baby-step table for one `(base, bound)` pair.
///
/// Built once and reused for every entry of a model vector.
pub struct BsgsTable {
    params: GroupParams,
    bound: u64,
    step: u64,
    baby: HashMap<BigUint, u64>,
    giant: GroupElement,
    build_ops: u64,
}

impl BsgsTable {
    pub fn new(params: &GroupParams, base: &GroupElement, bound: u64) -> Result<Self, DlogError> {
        check_bound(params, bound)?;
        let step = ((bound + 1) as f64).sqrt().ceil().max(1.0) as u64;
        let mut baby = HashMap::with_capacity(step as usize);
        let mut cur = params.identity();
        let mut ops = 0;
        for j in 0..step {
            baby.entry(cur.value().clone()).or_insert(j);
            if j + 1 < step {
                cur = params.mul(&cur, base);
                ops += 1;
            }
        }
        // base^-step, one exponentiation and one inversion
        let giant = params.inv(&params.exp_u64(base, step));
        ops += 2;
        Ok(Self {
            params: params.clone(),
            bound,
            step,
            baby,
            giant,
            build_ops: ops,
        })
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Group operations spent building the table.
    pub fn build_ops(&self) -> u64 {
        self.build_ops
    }

    pub fn solve(&self, target: &GroupElement) -> Result<u64, DlogError> {
        self.solve_counted(target).0
    }

    /// Like [`solve`](Self::solve), also returning the giant-step multiplications used.
    pub fn solve_counted(&self, target: &GroupElement) -> (Result<u64, DlogError>, u64) {
        let mut gamma = target.clone();
        let mut ops = 0;
        let giant_steps = self.bound / self.step + 1;
        for i in 0..giant_steps {
            if let Some(&j) = self.baby.get(gamma.value()) {
                let k = i * self.step + j;
                if k <= self.bound {
                    return (Ok(k), ops);
                }
                break;
            }
            gamma = self.params.mul(&gamma, &self.giant);
            ops += 1;
        }
        (Err(DlogError::NotFound { bound: self.bound }), ops)
    }
}

const KANGAROO_ATTEMPTS: u64 = 32;

fn low_u64(x: &BigUint) -> u64 {
    x.iter_u64_digits().next().unwrap_or(0)
}

/// Pollard's kangaroo walk over `[0, bound]`, seeded for reproducibility.
///
/// A single walk can miss; failed walks are retried with a fresh jump
/// function, and after a fixed number of misses the target is reported as
/// not found.
pub struct Kangaroo<'a> {
    params: &'a GroupParams,
    base: GroupElement,
    bound: u64,
    seed: u64,
    jumps: Vec<(u64, GroupElement)>,
    tame_jumps: u64,
}

impl<'a> Kangaroo<'a> {
    pub fn new(params: &'a GroupParams, base: &GroupElement, bound: u64, seed: u64) -> Result<Self, DlogError> {
        check_bound(params, bound)?;
        let width = (bound + 1) as f64;
        let target_mean = (width.sqrt() / 2.0).max(1.0);
        // powers of two 1, 2, ..., 2^(n-1) with mean (2^n - 1)/n near sqrt(N)/2
        let mut n = 1u32;
        while ((1u64 << n) - 1) as f64 / (n as f64) < target_mean && n < 62 {
            n += 1;
        }
        let jumps = (0..n)
            .map(|i| {
                let d = 1u64 << i;
                (d, params.exp_u64(base, d))
            })
            .collect();
        Ok(Self {
            params,
            base: base.clone(),
            bound,
            seed,
            jumps,
            tame_jumps: 2 * (width.sqrt().ceil() as u64) + 2,
        })
    }

    fn jump_index(&self, e: &GroupElement, salt: u64) -> usize {
        (splitmix64(low_u64(e.value()) ^ salt) % self.jumps.len() as u64) as usize
    }

    fn walk(&self, target: &GroupElement, salt: u64) -> Option<u64> {
        // tame kangaroo from base^bound
        let mut tame = self.params.exp_u64(&self.base, self.bound);
        let mut tame_dist: u64 = 0;
        for _ in 0..self.tame_jumps {
            let (d, ref step) = self.jumps[self.jump_index(&tame, salt)];
            tame = self.params.mul(&tame, step);
            tame_dist += d;
        }
        // wild kangaroo from the target; it is past the trap once its distance
        // exceeds bound + tame_dist
        let limit = self.bound + tame_dist;
        let mut wild = target.clone();
        let mut wild_dist: u64 = 0;
        loop {
            if wild == tame {
                let mut k = self.bound as i128 + tame_dist as i128 - wild_dist as i128;
                // in groups smaller than the walk, distances wrap around the order
                if let Some(q) = self.params.q().to_u64() {
                    k = k.rem_euclid(q as i128);
                }
                let hit = (0..=self.bound as i128).contains(&k) && self.params.exp_u64(&self.base, k as u64) == *target;
                return hit.then_some(k as u64);
            }
            if wild_dist > limit {
                return None;
            }
            let (d, ref step) = self.jumps[self.jump_index(&wild, salt)];
            wild = self.params.mul(&wild, step);
            wild_dist += d;
        }
    }

    pub fn solve(&self, target: &GroupElement) -> Result<u64, DlogError> {
        if target.is_identity() {
            return Ok(0);
        }
        for attempt in 0..KANGAROO_ATTEMPTS {
            let salt = splitmix64(self.seed ^ splitmix64(attempt));
            if let Some(k) = self.walk(target, salt) {
                return Ok(k);
            }
        }
        Err(DlogError::NotFound { bound: self.bound })
    }
}

/// A solver prepared for a fixed `(base, bound)`.
pub enum DlogSolver<'a> {
    Bsgs(BsgsTable),
    PollardRho(Kangaroo<'a>),
}

impl<'a> DlogSolver<'a> {
    pub fn new(
        params: &'a GroupParams,
        base: &GroupElement,
        bound: u64,
        algorithm: DlogAlgorithm,
        seed: u64,
    ) -> Result<Self, DlogError> {
        Ok(match algorithm {
            DlogAlgorithm::Bsgs => DlogSolver::Bsgs(BsgsTable::new(params, base, bound)?),
            DlogAlgorithm::PollardRho => DlogSolver::PollardRho(Kangaroo::new(params, base, bound, seed)?),
        })
    }

    pub fn solve(&self, target: &GroupElement) -> Result<u64, DlogError> {
        match self {
            DlogSolver::Bsgs(t) => t.solve(target),
            DlogSolver::PollardRho(k) => k.solve(target),
        }
    }
}

/// One-shot bounded discrete log.
pub fn discrete_log(
    params: &GroupParams,
    target: &GroupElement,
    base: &GroupElement,
    bound: u64,
    algorithm: DlogAlgorithm,
    seed: u64,
) -> Result<u64, DlogError> {
    DlogSolver::new(params, base, bound, algorithm, seed)?.solve(target)
}

/// Linear scan; only sensible for tiny bounds.
pub fn exhaustive_log(params: &GroupParams, target: &GroupElement, base: &GroupElement, bound: u64) -> Option<u64> {
    let mut cur = params.identity();
    for k in 0..=bound {
        if &cur == target {
            return Some(k);
        }
        cur = params.mul(&cur, base);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn toy() -> GroupParams {
        GroupParams::from_u64(23, 11, 4).unwrap()
    }

    fn el(g: &GroupParams, v: u32) -> GroupElement {
        g.element(BigUint::from(v)).unwrap()
    }

    #[test]
    fn toy_examples_both_algorithms() {
        let g = toy();
        let four = g.generator();
        for alg in [DlogAlgorithm::Bsgs, DlogAlgorithm::PollardRho] {
            assert_eq!(discrete_log(&g, &el(&g, 3), &four, 10, alg, 1), Ok(4));
            assert_eq!(discrete_log(&g, &g.identity(), &four, 10, alg, 1), Ok(0));
            assert_eq!(
                discrete_log(&g, &el(&g, 18), &four, 2, alg, 1),
                Err(DlogError::NotFound { bound: 2 })
            );
        }
        assert_eq!(exhaustive_log(&g, &el(&g, 3), &four, 10), Some(4));
        assert_eq!(exhaustive_log(&g, &el(&g, 18), &four, 2), None);
    }

    #[test]
    fn bound_must_be_below_order() {
        let g = toy();
        assert_eq!(
            BsgsTable::new(&g, &g.generator(), 11).err(),
            Some(DlogError::BoundTooLarge { bound: 11 })
        );
    }

    #[test]
    fn bsgs_operation_count_is_bounded() {
        let g = GroupParams::generate(40, 9).unwrap();
        let gen = g.generator();
        for bound in [1u64, 2, 7, 100, 1000, 4095, 65_536] {
            let table = BsgsTable::new(&g, &gen, bound).unwrap();
            let m = (bound as f64).sqrt().ceil() as u64;
            let budget = 2 * m + bound / m.max(1) + 4;
            for k in [0, bound / 3, bound / 2, bound] {
                let (res, ops) = table.solve_counted(&g.exp_u64(&gen, k));
                assert_eq!(res, Ok(k));
                assert!(
                    table.build_ops() + ops <= budget,
                    "bound {bound}: {} + {ops} > {budget}",
                    table.build_ops()
                );
            }
            let (res, ops) = table.solve_counted(&g.exp_u64(&gen, bound + 1));
            assert!(res.is_err());
            assert!(table.build_ops() + ops <= budget);
        }
    }

    #[test]
    fn solvers_agree_with_exhaustive_up_to_2_pow_16() {
        let g = GroupParams::generate(40, 4).unwrap();
        let gen = g.generator();
        let bound = 1u64 << 16;
        let table = BsgsTable::new(&g, &gen, bound).unwrap();
        let rho = Kangaroo::new(&g, &gen, bound, 99).unwrap();
        let mut cur = g.identity();
        for k in 0..=bound {
            assert_eq!(table.solve(&cur), Ok(k));
            if k % 61 == 0 || k == bound {
                assert_eq!(rho.solve(&cur), Ok(k));
            }
            cur = g.mul(&cur, &gen);
        }
    }

    #[test]
    fn kangaroo_is_reproducible_and_rejects_out_of_range() {
        let g = GroupParams::generate(48, 2).unwrap();
        let gen = g.generator();
        let rho = Kangaroo::new(&g, &gen, 5000, 3).unwrap();
        let t = g.exp_u64(&gen, 4321);
        assert_eq!(rho.solve(&t), rho.solve(&t));
        assert_eq!(rho.solve(&t), Ok(4321));
        assert!(rho.solve(&g.exp_u64(&gen, 5001)).is_err());
        assert!(rho.solve(&g.exp_u64(&gen, 1 << 30)).is_err());
    }
}
