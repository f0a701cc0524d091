use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::SpherePoint;
use crate::error::{Error, Result};

/// Samples per parallel chunk. Each chunk draws from its own child stream,
/// so results do not depend on the number of worker threads.
const CHUNK: u64 = 1 << 14;

/// Deterministic random source: identical `(seed, substream)` pairs replay
/// identical sample sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub substream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed, substream: 0 }
    }

    pub fn with_substream(seed: u64, substream: u64) -> Self {
        RandomStream { seed, substream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.substream);
        rng
    }

    /// An independent stream derived from this one, used to split work.
    pub fn child(&self, index: u64) -> RandomStream {
        RandomStream {
            seed: splitmix64(self.seed ^ splitmix64(self.substream.wrapping_add(0x5EED))),
            substream: index,
        }
    }
}

/// Draws a point from the Fubini–Study measure.
///
/// The height `t` of a uniform point on the unit sphere is uniform on
/// `[-1, 1]` and the stereographic image satisfies `|z|² = (1+t)/(1-t)`;
/// writing `t = 2u - 1` keeps both hemispheres at full relative precision.
pub fn sample_fs<R: Rng + ?Sized>(rng: &mut R) -> SpherePoint {
    let u: f64 = rng.gen();
    let theta = TAU * rng.gen::<f64>();
    let dir = Complex64::from_polar(1.0, theta);
    if u < 0.5 {
        let r = (u / (1.0 - u)).sqrt();
        SpherePoint::from_complex(dir * r)
    } else {
        let v = 1.0 - u;
        let rw = (v / (1.0 - v)).sqrt();
        SpherePoint::from_complex(dir / rw)
    }
}

/// Streaming mean/variance (Welford) with a count of rejected samples.
#[derive(Clone, Debug, Default)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    pub rejected: u64,
    pub first_rejected: Option<u64>,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn reject(&mut self, index: u64) {
        self.rejected += 1;
        if self.first_rejected.is_none() {
            self.first_rejected = Some(index);
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count > 0 {
            let n = self.count + other.count;
            let delta = other.mean - self.mean;
            let mean = self.mean + delta * other.count as f64 / n as f64;
            self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n as f64;
            self.mean = mean;
            self.count = n;
        }
        self.rejected += other.rejected;
        self.first_rejected = match (self.first_rejected, other.first_rejected) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> MeanEstimate {
        MeanEstimate {
            value: self.mean,
            stderr: self.stderr(),
            samples: self.count,
            rejected: self.rejected,
        }
    }

    /// Runs `samples` draws of `body` over chunks in parallel and merges in
    /// chunk order. `body` gets the chunk rng and the global sample index and
    /// returns `None` to reject the sample.
    pub fn run<F>(samples: u64, stream: &RandomStream, body: F) -> Accumulator
    where
        F: Fn(&mut ChaCha8Rng, u64) -> Option<f64> + Sync,
    {
        let chunks = samples.div_ceil(CHUNK);
        let parts: Vec<Accumulator> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream.child(c).rng();
                let mut acc = Accumulator::default();
                let start = c * CHUNK;
                let end = (start + CHUNK).min(samples);
                for i in start..end {
                    match body(&mut rng, i) {
                        Some(x) if x.is_finite() => acc.push(x),
                        _ => acc.reject(i),
                    }
                }
                acc
            })
            .collect();
        let mut total = Accumulator::default();
        for p in &parts {
            total.merge(p);
        }
        total
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub rejected: u64,
}

/// Monte Carlo estimate of `∫ g ω` with its standard error.
pub fn fs_integrate<G>(g: G, samples: u64, stream: &RandomStream) -> Result<MeanEstimate>
where
    G: Fn(SpherePoint) -> f64 + Sync,
{
    if samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    let acc = Accumulator::run(samples, stream, |rng, _| Some(g(sample_fs(rng))));
    if let Some(index) = acc.first_rejected {
        return Err(Error::NonFiniteSample { index });
    }
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{chordal_distance, log_chordal_distance};

    #[test]
    fn streams_replay() {
        let s = RandomStream::with_substream(7, 3);
        let a: Vec<f64> = (0..5).map({
            let mut r = s.rng();
            move |_| r.gen()
        }).collect();
        let b: Vec<f64> = (0..5).map({
            let mut r = s.rng();
            move |_| r.gen()
        }).collect();
        assert_eq!(a, b);
        let mut other = RandomStream::with_substream(7, 4).rng();
        assert_ne!(a[0], other.gen::<f64>());
    }

    #[test]
    fn constant_integrates_to_one_exactly() {
        let e = fs_integrate(|_| 1.0, 10_000, &RandomStream::new(1)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn chordal_to_infinity_squared_has_mean_one_half() {
        let e = fs_integrate(
            |z| chordal_distance(z, SpherePoint::Infinity).powi(2),
            200_000,
            &RandomStream::new(2),
        )
        .unwrap();
        assert!((e.value - 0.5).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn radial_distribution_matches_cdf() {
        // P(|z| <= R) = R² / (1 + R²)
        let mut rng = RandomStream::new(3).rng();
        let n = 100_000;
        let inside = (0..n).filter(|_| sample_fs(&mut rng).modulus() <= 2.0).count();
        let p = inside as f64 / n as f64;
        let se = (0.8f64 * 0.2 / n as f64).sqrt();
        assert!((p - 0.8).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn log_singularity_reports_non_finite() {
        let e = fs_integrate(
            |_| log_chordal_distance(SpherePoint::ZERO, SpherePoint::ZERO),
            10,
            &RandomStream::new(4),
        );
        assert!(matches!(e, Err(Error::NonFiniteSample { index: 0 })));
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut seq = Accumulator::default();
        xs.iter().for_each(|&x| seq.push(x));
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        xs[..377].iter().for_each(|&x| a.push(x));
        xs[377..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - seq.mean).abs() < 1e-12);
        assert!((a.variance() - seq.variance()).abs() < 1e-10);
    }
}
