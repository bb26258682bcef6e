//! Uniformly sampled complex baseband signal and its binary interchange file.
//!
//! File layout, little-endian: `u64` sample count, `f64` sample rate, `f64`
//! center frequency, then `count` interleaved `f64` real/imaginary pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
    center_freq: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, center_freq: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("signal has no samples".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Domain(format!("sample rate must be positive, got {sample_rate}")));
        }
        if !center_freq.is_finite() {
            return Err(Error::Domain("center frequency must be finite".into()));
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Domain("signal contains non-finite samples".into()));
        }
        Ok(ComplexSignal {
            samples,
            sample_rate,
            center_freq,
        })
    }

    /// Same rate and center frequency, new samples. Caller keeps the length
    /// non-zero and the values finite.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        debug_assert!(!samples.is_empty());
        ComplexSignal {
            samples,
            sample_rate: self.sample_rate,
            center_freq: self.center_freq,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn center_freq(&self) -> f64 {
        self.center_freq
    }

    /// Mean of `|x|^2`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn mean(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.len() as f64
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&self.center_freq.to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.re.to_le_bytes())?;
            w.write_all(&s.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)
                .map_err(|e| Error::format("<signal>", format!("truncated stream: {e}")))?;
            Ok(word)
        };
        let count = u64::from_le_bytes(next(&mut r)?);
        let sample_rate = f64::from_le_bytes(next(&mut r)?);
        let center_freq = f64::from_le_bytes(next(&mut r)?);
        let count = usize::try_from(count).map_err(|_| Error::format("<signal>", "sample count overflows"))?;
        let mut samples = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = f64::from_le_bytes(next(&mut r)?);
            samples.push(Complex64::new(re, im));
        }
        let mut tail = [0u8; 1];
        if r.read(&mut tail).unwrap_or(0) != 0 {
            return Err(Error::format("<signal>", "trailing bytes after last sample"));
        }
        ComplexSignal::new(samples, sample_rate, center_freq)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path, reason),
            other => other,
        })
    }
}
