//! Decentralized aggregation-key setup among orbit representatives.
//!
//! Each party `i` (1-based, ordered by orbit index) publishes `g^x_i`. From the
//! complete board it derives `g^y_i = prod_{z<i} g^x_z / prod_{z>i} g^x_z`,
//! and the exponents satisfy `sum_i x_i * y_i = 0 (mod q)`. A party's subset
//! key `S_i = g^s_i * (g^y_i)^x_i` therefore multiplies with the others into
//! `AK = g^(sum s_i)` without anyone revealing `s_i`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::group::{GroupElement, GroupParams, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AvnetError {
    #[error("board is missing the commitment of party {0}")]
    IncompleteBoard(usize),
    #[error("party index {index} outside 1..={parties}")]
    BadIndex { index: usize, parties: usize },
}

/// A party's AV-net private number `x` and encryption key `s`.
#[derive(Clone, PartialEq, Eq)]
pub struct PartySecret {
    index: usize,
    x: Scalar,
    s: Scalar,
}

impl fmt::Debug for PartySecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartySecret")
            .field("index", &self.index)
            .field("x", &"<redacted>")
            .field("s", &"<redacted>")
            .finish()
    }
}

impl PartySecret {
    /// Builds a secret from known exponents. Meant for tests and demos.
    pub fn from_parts(index: usize, x: Scalar, s: Scalar) -> Self {
        Self { index, x, s }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn x(&self) -> &Scalar {
        &self.x
    }

    pub fn s(&self) -> &Scalar {
        &self.s
    }

    pub fn commitment(&self, params: &GroupParams) -> GroupElement {
        params.exp_g(&self.x)
    }
}

/// Draws fresh `(x, s)` for party `index` and returns it with `g^x`.
pub fn round1_commit(params: &GroupParams, index: usize, seed: u64) -> (PartySecret, GroupElement) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = params.random_scalar(&mut rng);
    let s = params.random_scalar(&mut rng);
    let secret = PartySecret { index, x, s };
    let commitment = secret.commitment(params);
    (secret, commitment)
}

/// Public commitments `g^x_i`, slot `i - 1` for party `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round1Board {
    commitments: Vec<Option<GroupElement>>,
}

impl Round1Board {
    pub fn new(parties: usize) -> Self {
        Self {
            commitments: vec![None; parties],
        }
    }

    pub fn from_commitments(commitments: Vec<GroupElement>) -> Self {
        Self {
            commitments: commitments.into_iter().map(Some).collect(),
        }
    }

    pub fn parties(&self) -> usize {
        self.commitments.len()
    }

    pub fn post(&mut self, index: usize, commitment: GroupElement) -> Result<(), AvnetError> {
        let parties = self.parties();
        let slot = self
            .commitments
            .get_mut(index.wrapping_sub(1))
            .ok_or(AvnetError::BadIndex { index, parties })?;
        *slot = Some(commitment);
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.commitments.iter().all(Option::is_some)
    }

    pub fn commitments(&self) -> Result<Vec<&GroupElement>, AvnetError> {
        self.commitments
            .iter()
            .enumerate()
            .map(|(i, c)| c.as_ref().ok_or(AvnetError::IncompleteBoard(i + 1)))
            .collect()
    }
}

/// `g^y` for party `index`.
pub fn masked_base(params: &GroupParams, board: &Round1Board, index: usize) -> Result<GroupElement, AvnetError> {
    let parties = board.parties();
    if index == 0 || index > parties {
        return Err(AvnetError::BadIndex { index, parties });
    }
    let commitments = board.commitments()?;
    let before = params.product(commitments[..index - 1].iter().copied());
    let after = params.product(commitments[index..].iter().copied());
    Ok(params.div(&before, &after))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetKey(pub GroupElement);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationKey(pub GroupElement);

impl AggregationKey {
    pub fn value(&self) -> &GroupElement {
        &self.0
    }
}

/// `S = g^s * masked^x`.
pub fn subset_key(params: &GroupParams, secret: &PartySecret, masked: &GroupElement) -> SubsetKey {
    SubsetKey(params.mul(&params.exp_g(&secret.s), &params.exp(masked, &secret.x)))
}

/// `AK = prod S_i`, computed by the aggregation server.
pub fn aggregation_key(params: &GroupParams, subset_keys: &[SubsetKey]) -> AggregationKey {
    AggregationKey(params.product(subset_keys.iter().map(|k| &k.0)))
}

/// Everything the L parties and the server hold after the setup phase.
#[derive(Debug, Clone)]
pub struct KeySetup {
    pub secrets: Vec<PartySecret>,
    pub board: Round1Board,
    pub subset_keys: Vec<SubsetKey>,
    pub aggregation_key: AggregationKey,
}

impl KeySetup {
    /// Runs the whole setup for `parties` parties; party `i` is seeded with `seed_for(i)`.
    pub fn run(params: &GroupParams, parties: usize, seed_for: impl Fn(usize) -> u64) -> Self {
        let mut secrets = Vec::with_capacity(parties);
        let mut board = Round1Board::new(parties);
        for index in 1..=parties {
            let (secret, commitment) = round1_commit(params, index, seed_for(index));
            board.post(index, commitment).expect("index within board");
            secrets.push(secret);
        }
        let subset_keys: Vec<_> = secrets
            .iter()
            .map(|s| {
                let masked = masked_base(params, &board, s.index()).expect("board complete");
                subset_key(params, s, &masked)
            })
            .collect();
        let aggregation_key = aggregation_key(params, &subset_keys);
        Self {
            secrets,
            board,
            subset_keys,
            aggregation_key,
        }
    }

    /// Bytes moved by the setup: every commitment and every subset key.
    pub fn wire_bytes(&self, params: &GroupParams) -> u64 {
        (2 * self.secrets.len() * params.element_width()) as u64
    }

    /// Recomputes `g^(sum s_i)` from the secrets.
    pub fn expected_key(&self, params: &GroupParams) -> GroupElement {
        let sum = self
            .secrets
            .iter()
            .fold(params.scalar_u64(0), |acc, s| params.scalar_add(&acc, s.s()));
        params.exp_g(&sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn toy() -> GroupParams {
        GroupParams::from_u64(23, 11, 4).unwrap()
    }

    fn secrets(g: &GroupParams, xs: &[u64], ss: &[u64]) -> Vec<PartySecret> {
        xs.iter()
            .zip(ss)
            .enumerate()
            .map(|(i, (&x, &s))| PartySecret::from_parts(i + 1, g.scalar_u64(x), g.scalar_u64(s)))
            .collect()
    }

    fn board_of(g: &GroupParams, parties: &[PartySecret]) -> Round1Board {
        Round1Board::from_commitments(parties.iter().map(|p| p.commitment(g)).collect())
    }

    #[test]
    fn toy_masked_base() {
        let g = toy();
        let ps = secrets(&g, &[1, 2, 3], &[2, 5, 7]);
        let board = board_of(&g, &ps);
        // y = (-5, -2, 3) mod 11 = (6, 9, 3)
        let expected = [6u64, 9, 3];
        for (i, y) in expected.iter().enumerate() {
            assert_eq!(masked_base(&g, &board, i + 1).unwrap(), g.exp_u64(&g.generator(), *y));
        }
        assert_eq!(masked_base(&g, &board, 1).unwrap().value(), &BigUint::from(2u32));
    }

    #[test]
    fn single_party_mask_is_identity() {
        let g = toy();
        let ps = secrets(&g, &[7], &[3]);
        let board = board_of(&g, &ps);
        assert!(masked_base(&g, &board, 1).unwrap().is_identity());
        let ak = aggregation_key(&g, &[subset_key(&g, &ps[0], &g.identity())]);
        assert_eq!(ak.0, g.exp_u64(&g.generator(), 3));
    }

    #[test]
    fn two_party_masks_cancel() {
        let g = GroupParams::generate(32, 1).unwrap();
        let ps = secrets(&g, &[12345, 999], &[0, 0]);
        let board = board_of(&g, &ps);
        let m1 = g.exp(&masked_base(&g, &board, 1).unwrap(), ps[0].x());
        let m2 = g.exp(&masked_base(&g, &board, 2).unwrap(), ps[1].x());
        assert!(g.mul(&m1, &m2).is_identity());
    }

    #[test]
    fn toy_subset_key() {
        let g = toy();
        let p = PartySecret::from_parts(1, g.scalar_u64(1), g.scalar_u64(2));
        let masked = g.element(BigUint::from(2u32)).unwrap();
        assert_eq!(subset_key(&g, &p, &masked).0.value(), &BigUint::from(9u32));
        // single exponentiation g^(s + x*y) with y = 6
        assert_eq!(subset_key(&g, &p, &masked).0, g.exp_u64(&g.generator(), 2 + 6));
        let zero = PartySecret::from_parts(1, g.scalar_u64(0), g.scalar_u64(0));
        assert!(subset_key(&g, &zero, &masked).0.is_identity());
    }

    #[test]
    fn toy_aggregation_key() {
        let g = toy();
        let ps = secrets(&g, &[1, 2, 3], &[2, 5, 7]);
        let board = board_of(&g, &ps);
        let keys: Vec<_> = ps
            .iter()
            .map(|p| subset_key(&g, p, &masked_base(&g, &board, p.index()).unwrap()))
            .collect();
        let ak = aggregation_key(&g, &keys);
        assert_eq!(ak.0.value(), &BigUint::from(18u32));
        assert_eq!(ak.0, g.exp_u64(&g.generator(), 14));

        let zeros = secrets(&g, &[1, 2, 3], &[0, 0, 0]);
        let keys: Vec<_> = zeros
            .iter()
            .map(|p| subset_key(&g, p, &masked_base(&g, &board, p.index()).unwrap()))
            .collect();
        assert!(aggregation_key(&g, &keys).0.is_identity());
    }

    #[test]
    fn incomplete_board_is_rejected() {
        let g = toy();
        let mut board = Round1Board::new(3);
        board.post(1, g.generator()).unwrap();
        board.post(3, g.generator()).unwrap();
        assert!(!board.is_complete());
        assert_eq!(masked_base(&g, &board, 1), Err(AvnetError::IncompleteBoard(2)));
        assert_eq!(
            masked_base(&g, &board, 4),
            Err(AvnetError::BadIndex { index: 4, parties: 3 })
        );
        assert_eq!(
            board.post(0, g.generator()),
            Err(AvnetError::BadIndex { index: 0, parties: 3 })
        );
    }

    #[test]
    fn commitments_are_fresh_and_in_range() {
        let g = GroupParams::generate(64, 21).unwrap();
        let mut xs = std::collections::HashSet::new();
        for seed in 0..1000u64 {
            let (secret, commitment) = round1_commit(&g, 1, seed);
            assert!(secret.x().value() < g.q() && secret.s().value() < g.q());
            assert_eq!(commitment, g.exp_g(secret.x()));
            assert!(xs.insert(secret.x().clone()));
        }
    }

    #[test]
    fn secrets_are_redacted_in_debug_output() {
        let g = toy();
        let (secret, _) = round1_commit(&g, 1, 5);
        let shown = format!("{secret:?}");
        assert!(shown.contains("redacted"));
        assert!(!shown.contains("Scalar"));
    }

    #[test]
    fn mask_is_present_for_each_party() {
        let g = GroupParams::generate(48, 8).unwrap();
        for trial in 0..20u64 {
            let setup = KeySetup::run(&g, 4, |i| trial * 100 + i as u64);
            for (secret, key) in setup.secrets.iter().zip(&setup.subset_keys) {
                let mask = g.div(&key.0, &g.exp_g(secret.s()));
                assert!(!mask.is_identity());
            }
            assert_eq!(setup.aggregation_key.0, setup.expected_key(&g));
        }
    }
}
