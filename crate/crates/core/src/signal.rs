//! Finite real signals, boundary extension, and deterministic test inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// How samples outside `[0, N-1]` are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// `x[n] = 0` outside the signal.
    Zero,
    /// Edge replication: `x[n] = x[0]` for `n < 0`, `x[N-1]` for `n >= N`.
    #[default]
    Clamp,
}

/// Floating-point width used for engine state and recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}`")),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    boundary: BoundaryPolicy,
}

impl Signal {
    pub fn new(samples: Vec<f64>, boundary: BoundaryPolicy) -> Result<Self> {
        if samples.is_empty() {
            return invalid("a signal needs at least one sample");
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return invalid(format!("sample {i} is not finite"));
        }
        Ok(Signal { samples, boundary })
    }

    /// Signal with the default (clamp) boundary policy.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, BoundaryPolicy::default())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Boundary-resolved sample at any signed index.
    pub fn extended_sample(&self, n: isize) -> f64 {
        let last = self.samples.len() as isize - 1;
        if (0..=last).contains(&n) {
            return self.samples[n as usize];
        }
        match self.boundary {
            BoundaryPolicy::Zero => 0.0,
            BoundaryPolicy::Clamp if n < 0 => self.samples[0],
            BoundaryPolicy::Clamp => self.samples[last as usize],
        }
    }

    /// One sample per line; blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str, boundary: BoundaryPolicy) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Input(format!("line {}: `{line}` is not a number", i + 1)))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("line {}: sample is not finite", i + 1)));
            }
            samples.push(v);
        }
        if samples.is_empty() {
            return Err(Error::Input("no samples".into()));
        }
        Self::new(samples, boundary)
    }

    /// Samples for the signed index range `[first, first + len)`.
    pub fn extended_range(&self, first: isize, len: usize) -> Vec<f64> {
        (0..len as isize).map(|i| self.extended_sample(first + i)).collect()
    }
}

/// Number of cycles swept by [`TestSignal::Chirp`] over the signal length.
pub const CHIRP_CYCLES: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestSignal {
    /// One at `N/2`, zero elsewhere.
    Impulse,
    Constant,
    /// `sin(2π F n²/N²)` with `F = CHIRP_CYCLES`.
    Chirp,
    /// Uniform samples in `[-1, 1]` from a ChaCha8 stream keyed by the seed.
    SeededNoise,
}

impl std::str::FromStr for TestSignal {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "impulse" => Ok(TestSignal::Impulse),
            "constant" => Ok(TestSignal::Constant),
            "chirp" => Ok(TestSignal::Chirp),
            "noise" | "seeded-noise" => Ok(TestSignal::SeededNoise),
            other => Err(format!("unknown test signal `{other}`")),
        }
    }
}

pub fn make_test_signal(kind: TestSignal, n: usize, seed: u64) -> Result<Signal> {
    if n == 0 {
        return invalid("test signal length must be at least 1");
    }
    let samples = match kind {
        TestSignal::Impulse => {
            let mut v = vec![0.0; n];
            v[n / 2] = 1.0;
            v
        }
        TestSignal::Constant => vec![1.0; n],
        TestSignal::Chirp => {
            let nn = (n * n) as f64;
            (0..n)
                .map(|i| {
                    let i = i as f64;
                    (2.0 * std::f64::consts::PI * i * i / nn * CHIRP_CYCLES).sin()
                })
                .collect()
        }
        TestSignal::SeededNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    };
    Signal::from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_parsing() {
        let s = Signal::parse_text("# header\n1.5\n\n-2\n 3e-1 \n", BoundaryPolicy::Zero).unwrap();
        assert_eq!(s.samples(), &[1.5, -2.0, 0.3]);
        for bad in ["1\nNaN\n", "1\nx\n", "", "# only\n", "inf\n"] {
            assert!(matches!(Signal::parse_text(bad, BoundaryPolicy::Zero), Err(Error::Input(_))), "{bad:?}");
        }
    }

    fn sig(v: &[f64], b: BoundaryPolicy) -> Signal {
        Signal::new(v.to_vec(), b).unwrap()
    }

    #[test]
    fn extension_examples() {
        assert_eq!(sig(&[1., 2., 3.], BoundaryPolicy::Clamp).extended_sample(-5), 1.0);
        assert_eq!(sig(&[1., 2., 3.], BoundaryPolicy::Zero).extended_sample(3), 0.0);
        assert_eq!(sig(&[1., 2., 3.], BoundaryPolicy::Clamp).extended_sample(1), 2.0);
        assert_eq!(sig(&[1., 2., 3.], BoundaryPolicy::Clamp).extended_sample(99), 3.0);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Signal::from_samples(vec![]).is_err());
        assert!(Signal::from_samples(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::from_samples(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn generators() {
        assert_eq!(make_test_signal(TestSignal::Constant, 4, 0).unwrap().samples(), &[1., 1., 1., 1.]);
        assert_eq!(make_test_signal(TestSignal::Impulse, 5, 0).unwrap().samples(), &[0., 0., 1., 0., 0.]);
        let a = make_test_signal(TestSignal::SeededNoise, 3, 42).unwrap();
        let b = make_test_signal(TestSignal::SeededNoise, 3, 42).unwrap();
        let bits = |s: &Signal| s.samples().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&make_test_signal(TestSignal::SeededNoise, 3, 43).unwrap()));
        assert!(a.samples().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(make_test_signal(TestSignal::Chirp, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn interior_indices_are_identity(v in prop::collection::vec(-1e3f64..1e3, 1..50), zero in any::<bool>()) {
            let b = if zero { BoundaryPolicy::Zero } else { BoundaryPolicy::Clamp };
            let s = sig(&v, b);
            for (i, x) in v.iter().enumerate() {
                prop_assert_eq!(s.extended_sample(i as isize), *x);
            }
        }

        #[test]
        fn clamped_constant_is_constant(c in -10.0f64..10.0, n in 1usize..20, i in -100isize..100) {
            let s = sig(&vec![c; n], BoundaryPolicy::Clamp);
            prop_assert_eq!(s.extended_sample(i), c);
        }
    }
}
