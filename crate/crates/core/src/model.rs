use std::ops::Index;

/// A model's flattened parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Plaintext wire size: eight bytes per parameter.
    pub fn wire_bytes(&self) -> u64 {
        8 * self.0.len() as u64
    }

    pub fn max_abs_diff(&self, other: &ModelVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for ModelVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for ModelVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
