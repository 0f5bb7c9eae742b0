//! Gray-mapped unit-energy constellations and hard-decision demapping.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AfdmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Bpsk,
    Qpsk,
    Qam16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    /// `labels[i]` is the bit pattern of `points[i]`, MSB first.
    labels: Vec<u32>,
}

// Gray order along one 16-QAM axis: 00, 01, 11, 10.
const QAM16_AXIS: [(u32, f64); 4] = [(0b00, -3.0), (0b01, -1.0), (0b11, 1.0), (0b10, 3.0)];

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Self {
        let (points, labels) = match kind {
            ConstellationKind::Bpsk => (
                vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
                vec![0, 1],
            ),
            ConstellationKind::Qpsk => {
                let mut pts = Vec::with_capacity(4);
                let mut lab = Vec::with_capacity(4);
                for label in 0..4u32 {
                    let i = if label & 0b10 == 0 { 1.0 } else { -1.0 };
                    let q = if label & 0b01 == 0 { 1.0 } else { -1.0 };
                    pts.push(Complex64::new(i, q) * FRAC_1_SQRT_2);
                    lab.push(label);
                }
                (pts, lab)
            }
            ConstellationKind::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                let mut pts = Vec::with_capacity(16);
                let mut lab = Vec::with_capacity(16);
                for &(bi, i) in &QAM16_AXIS {
                    for &(bq, q) in &QAM16_AXIS {
                        pts.push(Complex64::new(i, q) * scale);
                        lab.push((bi << 2) | bq);
                    }
                }
                (pts, lab)
            }
        };
        Self {
            kind,
            points,
            labels,
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.points.len().trailing_zeros() as usize
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    fn index_of_label(&self, label: u32) -> usize {
        self.labels
            .iter()
            .position(|&l| l == label)
            .expect("every label in range is mapped")
    }

    pub fn modulate(&self, bits: &[bool]) -> Result<Vec<Complex64>> {
        let k = self.bits_per_symbol();
        if bits.len() % k != 0 {
            return Err(AfdmError::LengthMismatch {
                expected: bits.len().div_ceil(k) * k,
                actual: bits.len(),
            });
        }
        Ok(bits
            .chunks(k)
            .map(|chunk| {
                let label = chunk.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                self.points[self.index_of_label(label)]
            })
            .collect())
    }

    /// Index of the nearest constellation point.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn push_bits(&self, index: usize, out: &mut Vec<bool>) {
        let k = self.bits_per_symbol();
        let label = self.labels[index];
        for b in (0..k).rev() {
            out.push((label >> b) & 1 == 1);
        }
    }

    /// Hard decision by minimum Euclidean distance.
    pub fn demap(&self, symbols: &[Complex64]) -> Vec<bool> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for &z in symbols {
            self.push_bits(self.nearest(z), &mut out);
        }
        out
    }

    pub fn quantize(&self, symbols: &[Complex64]) -> Vec<Complex64> {
        symbols.iter().map(|&z| self.points[self.nearest(z)]).collect()
    }
}
