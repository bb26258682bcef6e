//! Wave-domain operators of the analog-computing layer.
//!
//! Every operator is a linear map evaluated in the discrete Fourier domain
//! and exposed as a plain signal-to-signal function. Convolution is circular;
//! zero-pad the inputs when a linear convolution is wanted.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    Differentiate,
    Integrate,
    Convolve { kernel: Vec<Complex64> },
    FrequencyShift { shift_hz: f64 },
}

impl OperatorSpec {
    /// Builds a spec from its textual kind. `kernel` is used by `convolve`
    /// and `shift_hz` by `frequency_shift`.
    pub fn from_kind(kind: &str, kernel: Option<Vec<Complex64>>, shift_hz: Option<f64>) -> Result<Self> {
        match kind {
            "differentiate" => Ok(OperatorSpec::Differentiate),
            "integrate" => Ok(OperatorSpec::Integrate),
            "convolve" => {
                let kernel = kernel.ok_or_else(|| Error::Domain("convolve needs a kernel".into()))?;
                if kernel.is_empty() {
                    return Err(Error::Domain("convolution kernel is empty".into()));
                }
                Ok(OperatorSpec::Convolve { kernel })
            }
            "frequency_shift" => {
                let shift_hz = shift_hz.ok_or_else(|| Error::Domain("frequency_shift needs a shift".into()))?;
                Ok(OperatorSpec::FrequencyShift { shift_hz })
            }
            other => Err(Error::UnsupportedOperator(other.to_string())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OperatorSpec::Differentiate => "differentiate",
            OperatorSpec::Integrate => "integrate",
            OperatorSpec::Convolve { .. } => "convolve",
            OperatorSpec::FrequencyShift { .. } => "frequency_shift",
        }
    }

    /// Fraction of input power a passive realization passes on average for a
    /// spectrally white input over `n_bins` DFT bins. The transfer function
    /// is scaled so its peak magnitude is one (a passive surface cannot
    /// amplify); the result is `mean |H|^2 / max |H|^2`.
    pub fn passive_power_factor(&self, n_bins: usize) -> f64 {
        if n_bins == 0 {
            return 0.0;
        }
        let response: Vec<f64> = match self {
            OperatorSpec::FrequencyShift { .. } => return 1.0,
            // Unit sample rate: the factor is scale-free.
            OperatorSpec::Differentiate => (0..n_bins).map(|k| (TAU * bin_freq(k, n_bins, 1.0)).powi(2)).collect(),
            OperatorSpec::Integrate => (0..n_bins)
                .map(|k| {
                    let f = bin_freq(k, n_bins, 1.0);
                    if f == 0.0 {
                        0.0
                    } else {
                        (TAU * f).powi(-2)
                    }
                })
                .collect(),
            OperatorSpec::Convolve { kernel } => {
                let mut buf = fold_kernel(kernel, n_bins);
                FftPlanner::new().plan_fft_forward(n_bins).process(&mut buf);
                buf.iter().map(|h| h.norm_sqr()).collect()
            }
        };
        let peak = response.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        response.iter().sum::<f64>() / (n_bins as f64 * peak)
    }
}

/// Frequency of DFT bin `k` out of `n` at sample rate `fs`; bins at or above
/// `n/2` map to negative frequencies.
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if 2 * (k as usize) >= n {
        (k - n_f) * fs / n_f
    } else {
        k * fs / n_f
    }
}

fn fold_kernel(kernel: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &k) in kernel.iter().enumerate() {
        buf[i % n] += k;
    }
    buf
}

/// Forward DFT, pointwise multiply by `response(k)`, inverse DFT.
fn spectral_filter(sig: &ComplexSignal, response: impl Fn(usize) -> Complex64) -> ComplexSignal {
    let n = sig.len();
    let mut planner = FftPlanner::new();
    let mut buf = sig.samples().to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= response(k);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    sig.with_samples(buf)
}

/// Multiplies the spectrum by `j 2 pi f`.
pub fn differentiate(sig: &ComplexSignal) -> ComplexSignal {
    let n = sig.len();
    let fs = sig.sample_rate();
    spectral_filter(sig, |k| Complex64::new(0.0, TAU * bin_freq(k, n, fs)))
}

/// Divides the spectrum by `j 2 pi f`; the DC bin is set to zero.
pub fn integrate(sig: &ComplexSignal) -> ComplexSignal {
    let n = sig.len();
    let fs = sig.sample_rate();
    spectral_filter(sig, |k| {
        let f = bin_freq(k, n, fs);
        if f == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / (TAU * f))
        }
    })
}

/// Circular convolution. Kernels longer than the signal wrap around.
pub fn convolve(sig: &ComplexSignal, kernel: &[Complex64]) -> Result<ComplexSignal> {
    if kernel.is_empty() {
        return Err(Error::Domain("convolution kernel is empty".into()));
    }
    let n = sig.len();
    let mut spectrum = fold_kernel(kernel, n);
    FftPlanner::new().plan_fft_forward(n).process(&mut spectrum);
    Ok(spectral_filter(sig, |k| spectrum[k]))
}

/// Multiplies sample `i` by `exp(j 2 pi shift i / fs)`.
pub fn frequency_shift(sig: &ComplexSignal, shift_hz: f64) -> Result<ComplexSignal> {
    let fs = sig.sample_rate();
    if !shift_hz.is_finite() || shift_hz.abs() >= fs / 2.0 {
        return Err(Error::Domain(format!(
            "shift of {shift_hz} Hz is not below the Nyquist limit {} Hz",
            fs / 2.0
        )));
    }
    let step = TAU * shift_hz / fs;
    let out = sig
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &s)| s * Complex64::from_polar(1.0, step * i as f64))
        .collect();
    Ok(sig.with_samples(out))
}

pub fn apply_operator(spec: &OperatorSpec, sig: &ComplexSignal) -> Result<ComplexSignal> {
    match spec {
        OperatorSpec::Differentiate => Ok(differentiate(sig)),
        OperatorSpec::Integrate => Ok(integrate(sig)),
        OperatorSpec::Convolve { kernel } => convolve(sig, kernel),
        OperatorSpec::FrequencyShift { shift_hz } => frequency_shift(sig, *shift_hz),
    }
}

/// Periodogram `|X_k|^2 / n` in natural bin order.
pub fn periodogram(sig: &ComplexSignal) -> Vec<f64> {
    let n = sig.len();
    let mut buf = sig.samples().to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|v| v.norm_sqr() / n as f64).collect()
}

/// Frequency of the strongest periodogram bin.
pub fn peak_frequency(sig: &ComplexSignal) -> f64 {
    let p = periodogram(sig);
    let k = p
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
        .0;
    bin_freq(k, sig.len(), sig.sample_rate())
}
