//! Fixed-point encoding, exponent-masked encryption and server-side recovery.
//!
//! A party holding key `s` encrypts the quantized entry `w` for round label
//! `l` as `g^(s*u + w)` with `u = H(l)`. The server multiplies one ciphertext
//! per party, divides by `AK^u = g^(u * sum s)` and is left with
//! `g^(sum w)`, from which the bounded discrete log recovers the sum.

use thiserror::Error;

use crate::avnet::AggregationKey;
use crate::dlog::{DlogAlgorithm, DlogError, DlogSolver};
use crate::group::{GroupElement, GroupError, GroupParams, Scalar};
use crate::model::ModelVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("invalid quantization scheme: {0}")]
    InvalidScheme(String),
    #[error("ciphertext round id {found:?} does not match {expected:?}")]
    RoundMismatch { expected: String, found: String },
    #[error("ciphertext lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no ciphertexts to aggregate")]
    Empty,
    #[error("entry {index}: {source}")]
    Recovery {
        index: usize,
        #[source]
        source: DlogError,
    },
    #[error(transparent)]
    Dlog(#[from] DlogError),
    #[error("sum {sum} at entry {index} exceeds the protocol maximum {max}")]
    SumOutOfRange { index: usize, sum: u64, max: u64 },
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Offset fixed-point codec mapping reals in `[-clip, clip]` to `[0, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationScheme {
    scale: f64,
    offset: u64,
    clip: f64,
    parties: usize,
}

impl QuantizationScheme {
    pub const DEFAULT_SCALE: f64 = 256.0;
    pub const DEFAULT_CLIP: f64 = 2.0;
    pub const DEFAULT_OFFSET: u64 = 512;

    pub fn new(scale: f64, offset: u64, clip: f64, parties: usize) -> Result<Self, AggregationError> {
        let bad = |m: &str| Err(AggregationError::InvalidScheme(m.to_string()));
        if !(scale.is_finite() && scale > 0.0) {
            return bad("scale must be positive");
        }
        if !(clip.is_finite() && clip > 0.0) {
            return bad("clip must be positive");
        }
        if parties == 0 {
            return bad("at least one party is required");
        }
        let half_range = (clip * scale).round();
        if half_range > (u64::MAX / 4) as f64 {
            return bad("clip * scale is too large");
        }
        if (offset as f64) < half_range {
            return bad("offset must be at least round(clip * scale)");
        }
        let scheme = Self {
            scale,
            offset,
            clip,
            parties,
        };
        if scheme.per_party_max().checked_mul(parties as u64).is_none() {
            return bad("parties * M overflows");
        }
        Ok(scheme)
    }

    /// Defaults: scale 2^8, clip 2.0, offset 512 (M = 1024).
    pub fn with_defaults(parties: usize) -> Result<Self, AggregationError> {
        Self::new(Self::DEFAULT_SCALE, Self::DEFAULT_OFFSET, Self::DEFAULT_CLIP, parties)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// Largest quantized value a single party can produce.
    pub fn per_party_max(&self) -> u64 {
        self.offset + (self.clip * self.scale).round() as u64
    }

    /// Largest possible sum over all parties; the dlog search bound.
    pub fn dlog_bound(&self) -> u64 {
        self.per_party_max() * self.parties as u64
    }

    /// Checks that every legitimate sum stays below the group order.
    pub fn check_group(&self, params: &GroupParams) -> Result<(), AggregationError> {
        if num_bigint::BigUint::from(self.dlog_bound()) >= *params.q() {
            return Err(AggregationError::InvalidScheme(format!(
                "parties * M = {} is not below the group order",
                self.dlog_bound()
            )));
        }
        Ok(())
    }

    fn encode(&self, w: f64) -> (u64, bool) {
        let clamped = w.clamp(-self.clip, self.clip);
        let q = (clamped * self.scale).round() as i64 + self.offset as i64;
        (q as u64, clamped != w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedVector {
    values: Vec<u64>,
}

impl QuantizedVector {
    pub fn new(values: Vec<u64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `round(clamp(w) * scale) + offset`, entrywise.
pub fn quantize(model: &ModelVector, scheme: &QuantizationScheme) -> QuantizedVector {
    quantize_counting(model, scheme).0
}

/// Like [`quantize`], also returning how many entries were clamped.
pub fn quantize_counting(model: &ModelVector, scheme: &QuantizationScheme) -> (QuantizedVector, usize) {
    let mut clamped = 0;
    let values = model
        .values()
        .iter()
        .map(|&w| {
            let (q, c) = scheme.encode(w);
            clamped += c as usize;
            q
        })
        .collect();
    (QuantizedVector { values }, clamped)
}

/// Entrywise sum of quantized vectors, computed in the clear.
pub fn plaintext_sum(vectors: &[QuantizedVector]) -> Result<Vec<u64>, AggregationError> {
    let first = vectors.first().ok_or(AggregationError::Empty)?;
    let mut sum = vec![0u64; first.len()];
    for v in vectors {
        if v.len() != sum.len() {
            return Err(AggregationError::LengthMismatch(sum.len(), v.len()));
        }
        for (acc, x) in sum.iter_mut().zip(v.values()) {
            *acc += x;
        }
    }
    Ok(sum)
}

/// `(sum - L*offset) / (L*scale)`, entrywise.
pub fn dequantize_average(sum: &[u64], scheme: &QuantizationScheme) -> Result<ModelVector, AggregationError> {
    let parties = scheme.parties() as f64;
    let max = scheme.dlog_bound();
    let base = scheme.offset() as i128 * scheme.parties() as i128;
    sum.iter()
        .enumerate()
        .map(|(index, &s)| {
            if s > max {
                return Err(AggregationError::SumOutOfRange { index, sum: s, max });
            }
            Ok((s as i128 - base) as f64 / (parties * scheme.scale()))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ModelVector::new)
}

/// Canonical round label `round:<beta>`.
pub fn round_id(round: u64) -> Vec<u8> {
    format!("round:{round}").into_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherVector {
    round_id: Vec<u8>,
    entries: Vec<GroupElement>,
}

impl CipherVector {
    pub fn new(round_id: Vec<u8>, entries: Vec<GroupElement>) -> Self {
        Self { round_id, entries }
    }

    pub fn round_id(&self) -> &[u8] {
        &self.round_id
    }

    pub fn entries(&self) -> &[GroupElement] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialized size in bytes.
    pub fn wire_len(&self, params: &GroupParams) -> usize {
        4 + self.round_id.len() + self.entries.len() * params.element_width()
    }

    /// `u32` big-endian round-id length, the round id, then every entry
    /// big-endian at the modulus width.
    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len(params));
        out.extend_from_slice(&(self.round_id.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.round_id);
        for e in &self.entries {
            params.encode_element(e, &mut out);
        }
        out
    }

    pub fn from_bytes(params: &GroupParams, bytes: &[u8]) -> Result<Self, AggregationError> {
        let malformed = |m: &str| AggregationError::Malformed(m.to_string());
        let (len, rest) = bytes
            .split_first_chunk::<4>()
            .ok_or_else(|| malformed("truncated header"))?;
        let len = u32::from_be_bytes(*len) as usize;
        if rest.len() < len {
            return Err(malformed("truncated round id"));
        }
        let (rid, body) = rest.split_at(len);
        let width = params.element_width();
        if body.len() % width != 0 {
            return Err(malformed("body is not a whole number of elements"));
        }
        let entries = body
            .chunks(width)
            .map(|c| params.decode_element(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            round_id: rid.to_vec(),
            entries,
        })
    }
}

/// Encrypts every entry as `g^(s*u + q[i])`.
///
/// `g^(s*u)` is computed once; each entry then costs one small exponentiation
/// and one multiplication.
pub fn encrypt_model(q: &QuantizedVector, s: &Scalar, round_id: &[u8], params: &GroupParams) -> CipherVector {
    let u = params.hash_to_scalar(round_id);
    let mask = params.exp_g(&params.scalar_mul(s, &u));
    let g = params.generator();
    let entries = q
        .values()
        .iter()
        .map(|&w| params.mul(&mask, &params.exp_u64(&g, w)))
        .collect();
    CipherVector {
        round_id: round_id.to_vec(),
        entries,
    }
}

/// Server-side unmasking: `prod_i C_i[mu] / AK^u` for every entry.
pub fn unmask(
    ciphers: &[CipherVector],
    ak: &AggregationKey,
    round_id: &[u8],
    params: &GroupParams,
) -> Result<Vec<GroupElement>, AggregationError> {
    let first = ciphers.first().ok_or(AggregationError::Empty)?;
    for c in ciphers {
        if c.round_id() != round_id {
            return Err(AggregationError::RoundMismatch {
                expected: String::from_utf8_lossy(round_id).into_owned(),
                found: String::from_utf8_lossy(c.round_id()).into_owned(),
            });
        }
        if c.len() != first.len() {
            return Err(AggregationError::LengthMismatch(first.len(), c.len()));
        }
    }
    let u = params.hash_to_scalar(round_id);
    let unmask = params.inv(&params.exp(ak.value(), &u));
    Ok((0..first.len())
        .map(|mu| {
            let prod = params.product(ciphers.iter().map(|c| &c.entries[mu]));
            params.mul(&prod, &unmask)
        })
        .collect())
}

/// Recovers the entrywise sum of the parties' quantized vectors.
pub fn aggregate_recover(
    ciphers: &[CipherVector],
    ak: &AggregationKey,
    round_id: &[u8],
    scheme: &QuantizationScheme,
    params: &GroupParams,
    algorithm: DlogAlgorithm,
    seed: u64,
) -> Result<Vec<u64>, AggregationError> {
    let targets = unmask(ciphers, ak, round_id, params)?;
    let solver = DlogSolver::new(params, &params.generator(), scheme.dlog_bound(), algorithm, seed)?;
    targets
        .iter()
        .enumerate()
        .map(|(index, t)| {
            solver
                .solve(t)
                .map_err(|source| AggregationError::Recovery { index, source })
        })
        .collect()
}
