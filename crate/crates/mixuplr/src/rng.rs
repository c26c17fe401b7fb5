//! Seeded, counter-based random generation with bit-exact replay.
//!
//! `RngState` is a SplitMix64 stream addressed by (seed, position): the same
//! seed and the same call sequence always produce the same bits. Parallel
//! workloads never share one state; they derive independent child streams
//! keyed by (seed, stream id) via [`RngState::child`].

use crate::error::{Error, Result};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
    counter: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Independent stream keyed by (seed, stream id). Children of the same
    /// parent with distinct ids never correlate, and deriving a child does
    /// not advance the parent.
    pub fn child(&self, stream: u64) -> RngState {
        RngState::new(mix64(self.seed ^ mix64(stream.wrapping_add(GAMMA))))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream position: number of `next_u64` calls made so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let z = self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA).wrapping_add(GAMMA));
        self.counter += 1;
        mix64(z)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1], safe as a logarithm argument.
    #[inline]
    fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n) via the multiply-shift reduction.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over empty range");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// A permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    /// Standard normal draw (Box-Muller, cosine branch).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Gamma(shape, 1) draw by the Marsaglia-Tsang squeeze, with the
    /// `U^(1/shape)` boost for shape < 1. Valid for every shape > 0.
    pub fn next_gamma(&mut self, shape: f64) -> Result<f64> {
        Ok(self.next_gamma_ln(shape)?.exp())
    }

    /// log of a Gamma(shape, 1) draw. The boost factor for shape < 1 is
    /// applied in log space, where it cannot underflow even for tiny shapes.
    pub fn next_gamma_ln(&mut self, shape: f64) -> Result<f64> {
        if !(shape > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma shape must be > 0, got {shape}")));
        }
        if shape < 1.0 {
            let ln_boost = self.next_open01().ln() / shape;
            let g = self.marsaglia_tsang(shape + 1.0);
            return Ok(ln_boost + g.ln());
        }
        Ok(self.marsaglia_tsang(shape).ln())
    }

    fn marsaglia_tsang(&mut self, shape: f64) -> f64 {
        debug_assert!(shape >= 1.0);
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.next_gaussian();
            let cx = 1.0 + c * x;
            if cx <= 0.0 {
                continue;
            }
            let v = cx * cx * cx;
            let u = self.next_open01();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }
}

/// Beta(alpha, alpha) draw in [0, 1] as a ratio of two Gamma variates,
/// `G1 / (G1 + G2)`, evaluated in log space so small alphas (where the
/// variates underflow a plain f64) still land on the correct endpoint.
pub fn sample_beta(alpha: f64, rng: &mut RngState) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("beta alpha must be > 0, got {alpha}")));
    }
    let l1 = rng.next_gamma_ln(alpha)?;
    let l2 = rng.next_gamma_ln(alpha)?;
    // G1/(G1+G2) = sigmoid(ln G1 - ln G2)
    let d = l1 - l2;
    Ok(if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    })
}

/// Vector of i.i.d. N(0, sigma^2) entries.
pub fn sample_gaussian_vector(dim: usize, sigma: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("gaussian vector dim must be >= 1".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok((0..dim).map(|_| sigma * rng.next_gaussian()).collect())
}
