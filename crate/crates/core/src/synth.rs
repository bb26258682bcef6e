//! Labeled multi-user traffic, semi-active I/Q capture and spectrogram images.
//!
//! Each user transmits raised-cosine shaped QPSK on its own subband of the
//! shared channel (U1 at -3 MHz, U2 at 0, U3 at +3 MHz by default). The
//! spectrogram image is 16 time segments by 16 frequency columns, columns
//! ordered from `-fs/2` to `+fs/2`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::par;
use crate::rng;
use crate::signal::ComplexSignal;
use crate::surface::{Mode, RicsProfile};

pub const IMAGE_SIDE: usize = 16;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const MIN_SAMPLES: usize = 256;

/// Occupancy of the shared band by users U1..U3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpectrumClass {
    Idle,
    U1,
    U2,
    U3,
    U1U2,
    U1U3,
    U2U3,
    U1U2U3,
}

impl SpectrumClass {
    pub const COUNT: usize = 8;

    pub const ALL: [SpectrumClass; 8] = [
        SpectrumClass::Idle,
        SpectrumClass::U1,
        SpectrumClass::U2,
        SpectrumClass::U3,
        SpectrumClass::U1U2,
        SpectrumClass::U1U3,
        SpectrumClass::U2U3,
        SpectrumClass::U1U2U3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Activity of (U1, U2, U3).
    pub fn active_users(self) -> [bool; 3] {
        use SpectrumClass::*;
        match self {
            Idle => [false, false, false],
            U1 => [true, false, false],
            U2 => [false, true, false],
            U3 => [false, false, true],
            U1U2 => [true, true, false],
            U1U3 => [true, false, true],
            U2U3 => [false, true, true],
            U1U2U3 => [true, true, true],
        }
    }

    pub fn from_active_users(bits: [bool; 3]) -> Self {
        use SpectrumClass::*;
        match bits {
            [false, false, false] => Idle,
            [true, false, false] => U1,
            [false, true, false] => U2,
            [false, false, true] => U3,
            [true, true, false] => U1U2,
            [true, false, true] => U1U3,
            [false, true, true] => U2U3,
            [true, true, true] => U1U2U3,
        }
    }

    pub fn n_active(self) -> usize {
        self.active_users().iter().filter(|&&b| b).count()
    }

    pub fn name(self) -> &'static str {
        use SpectrumClass::*;
        match self {
            Idle => "Idle",
            U1 => "U1",
            U2 => "U2",
            U3 => "U3",
            U1U2 => "U1U2",
            U1U3 => "U1U3",
            U2U3 => "U2U3",
            U1U2U3 => "U1U2U3",
        }
    }
}

impl fmt::Display for SpectrumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectrumClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown spectrum class `{s}`")))
    }
}

/// Waveform parameters of the synthetic traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Complex sample rate; equals the channel bandwidth.
    pub sample_rate: f64,
    pub n_samples: usize,
    pub subband_centers_hz: [f64; 3],
    pub symbol_rate: f64,
    pub rolloff: f64,
    /// Pulse-shaping filter span in symbols.
    pub filter_span: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            sample_rate: 10e6,
            n_samples: 4096,
            subband_centers_hz: [-3e6, 0.0, 3e6],
            symbol_rate: 1.25e6,
            rolloff: 0.35,
            filter_span: 8,
        }
    }
}

impl SynthParams {
    fn samples_per_symbol(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::Domain(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                self.n_samples
            )));
        }
        if !(self.sample_rate > 0.0) || !(self.symbol_rate > 0.0) || self.samples_per_symbol() < 2 {
            return Err(Error::Domain("symbol rate must be at most half the sample rate".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Domain(format!("rolloff must lie in [0, 1], got {}", self.rolloff)));
        }
        if self.subband_centers_hz.iter().any(|f| f.abs() >= self.sample_rate / 2.0) {
            return Err(Error::Domain("subband centers must lie inside the sampled band".into()));
        }
        Ok(())
    }
}

/// Raised-cosine taps normalized to `sum h^2 = sps` (unit output power for
/// unit-energy symbols).
fn raised_cosine(sps: usize, span: usize, rolloff: f64) -> Vec<f64> {
    let half = (span * sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|i| {
            let t = i as f64 / sps as f64;
            let sinc = if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
            let denom = 1.0 - (2.0 * rolloff * t).powi(2);
            let shape = if denom.abs() < 1e-12 {
                PI / 4.0
            } else {
                (PI * rolloff * t).cos() / denom
            };
            sinc * shape
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = (sps as f64 / energy).sqrt();
    taps.iter_mut().for_each(|h| *h *= scale);
    taps
}

/// One user's shaped QPSK burst on its subband with average power `power`.
/// Everything random about it derives from `seed`.
pub fn user_component(params: &SynthParams, user: usize, power: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sps = params.samples_per_symbol();
    let taps = raised_cosine(sps, params.filter_span, params.rolloff);
    let n = params.n_samples;
    let n_symbols = n / sps + params.filter_span + 2;
    let mut upsampled = vec![Complex64::new(0.0, 0.0); n_symbols * sps];
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..n_symbols {
        let re = if rng.random::<bool>() { amp } else { -amp };
        let im = if rng.random::<bool>() { amp } else { -amp };
        upsampled[k * sps] = Complex64::new(re, im);
    }
    let phase0: f64 = rng.random_range(0.0..TAU);
    let offset = taps.len();
    let step = TAU * params.subband_centers_hz[user] / params.sample_rate;
    let gain = power.sqrt();
    (0..n)
        .map(|i| {
            let j = i + offset;
            let base: Complex64 = taps
                .iter()
                .enumerate()
                .map(|(t, &h)| upsampled[j - t] * h)
                .sum();
            base * gain * Complex64::from_polar(1.0, phase0 + step * i as f64)
        })
        .collect()
}

fn add_noise(samples: &mut [Complex64], variance: f64, rng: &mut impl Rng) {
    if variance == 0.0 {
        return;
    }
    let sd = (variance / 2.0).sqrt();
    for s in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(sd * re, sd * im);
    }
}

/// Per-user seeds and the noise seed drawn by [`gen_class_signal`], in
/// draw order. Exposed so callers can regenerate individual components.
pub fn draw_seeds(rng: &mut impl Rng) -> ([u64; 3], u64) {
    let users = [rng.random(), rng.random(), rng.random()];
    (users, rng.random())
}

/// Superposition of the active users' signals, each at `per_user_power`,
/// plus white Gaussian noise of variance `noise_variance`.
pub fn gen_class_signal(
    class: SpectrumClass,
    per_user_power: f64,
    noise_variance: f64,
    params: &SynthParams,
    rng: &mut impl Rng,
) -> Result<(ComplexSignal, SpectrumClass)> {
    params.validate()?;
    if !(per_user_power > 0.0) {
        return Err(Error::Domain(format!("per-user power must be positive, got {per_user_power}")));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::Domain("noise variance must be non-negative".into()));
    }
    let (user_seeds, noise_seed) = draw_seeds(rng);
    let mut samples = vec![Complex64::new(0.0, 0.0); params.n_samples];
    for (user, active) in class.active_users().into_iter().enumerate() {
        if active {
            let c = user_component(params, user, per_user_power, user_seeds[user]);
            samples.iter_mut().zip(c).for_each(|(s, v)| *s += v);
        }
    }
    add_noise(&mut samples, noise_variance, &mut ChaCha8Rng::seed_from_u64(noise_seed));
    Ok((ComplexSignal::new(samples, params.sample_rate, 0.0)?, class))
}

/// I/Q capture at the semi-active elements: the user -> surface path gain,
/// coherent combining over the `n_absorb` elements (each adding independent
/// thermal noise), normalized so the noise power at the output equals the
/// per-element noise floor. Users are equidistant from the surface, so one
/// hop gain applies to the whole superposition.
pub fn capture_iq(
    sig: &ComplexSignal,
    profile: &RicsProfile,
    scenario: &Scenario,
    rng: &mut impl Rng,
) -> Result<ComplexSignal> {
    if profile.mode() != Mode::Ra {
        return Err(Error::ModeMismatch("I/Q capture needs an RA profile".into()));
    }
    let m = profile.n_absorb();
    let amp = scenario.user_to_rics(crate::geometry::NOMINAL_USER).sqrt();
    let noise = scenario.noise_power();
    let sd = (noise / 2.0).sqrt();
    let norm = 1.0 / (m as f64).sqrt();
    let out = sig
        .samples()
        .iter()
        .map(|&s| {
            let mut acc = Complex64::new(0.0, 0.0);
            for _ in 0..m {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                acc += s * amp + Complex64::new(sd * re, sd * im);
            }
            acc * norm
        })
        .collect();
    ComplexSignal::new(out, sig.sample_rate(), sig.center_freq())
}

/// Nonnegative image normalized to a maximum of one (or all zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    pixels: Vec<f64>,
}

impl SpectrumImage {
    /// Builds from row-major pixels, normalizing by the maximum.
    pub fn from_raw(mut pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(Error::Domain(format!(
                "image needs {IMAGE_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("image pixels must be finite and nonnegative".into()));
        }
        let max = pixels.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            pixels.iter_mut().for_each(|p| *p /= max);
        }
        Ok(SpectrumImage { pixels })
    }

    pub fn zeros() -> Self {
        SpectrumImage {
            pixels: vec![0.0; IMAGE_PIXELS],
        }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * IMAGE_SIDE + col]
    }

    /// Flat row-major 8-byte little-endian floats.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.pixels {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::format("<image>", e.to_string()))?;
        if bytes.len() != IMAGE_PIXELS * 8 {
            return Err(Error::format("<image>", format!("expected {} bytes, got {}", IMAGE_PIXELS * 8, bytes.len())));
        }
        let pixels = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        SpectrumImage::from_raw(pixels)
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / len as f64).cos())
        .collect()
}

/// 16x16 spectrogram: rows are consecutive time segments, columns pool the
/// Hann-windowed periodogram of each segment into 16 equal frequency bands.
pub fn visualize(iq: &ComplexSignal) -> Result<SpectrumImage> {
    let n = iq.len();
    if n < MIN_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let seg = n / IMAGE_SIDE;
    let window = hann(seg);
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut pixels = vec![0.0; IMAGE_PIXELS];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    for row in 0..IMAGE_SIDE {
        let chunk = &iq.samples()[row * seg..(row + 1) * seg];
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            // fftshift: bin seg/2 (most negative frequency) becomes column 0
            let shifted = (k + seg - seg / 2) % seg;
            let col = shifted * IMAGE_SIDE / seg;
            pixels[row * IMAGE_SIDE + col] += v.norm_sqr();
        }
    }
    SpectrumImage::from_raw(pixels)
}

/// Frequency range (Hz) covered by image column `col` at sample rate `fs`.
pub fn column_band(col: usize, fs: f64) -> (f64, f64) {
    let width = fs / IMAGE_SIDE as f64;
    let lo = -fs / 2.0 + col as f64 * width;
    (lo, lo + width)
}

/// Everything needed to generate captures for the sensing problem.
#[derive(Debug, Clone)]
pub struct CaptureSetup {
    pub params: SynthParams,
    pub per_user_power: f64,
    pub profile: RicsProfile,
    pub scenario: Scenario,
}

impl CaptureSetup {
    /// Labeled capture for example `index` drawn from `key`'s substream; the
    /// class is `index % 8`.
    pub fn capture(&self, key: u64, index: u64) -> Result<(ComplexSignal, SpectrumClass)> {
        let class = SpectrumClass::ALL[(index % SpectrumClass::COUNT as u64) as usize];
        self.capture_class(class, key, index)
    }

    pub fn capture_class(&self, class: SpectrumClass, key: u64, index: u64) -> Result<(ComplexSignal, SpectrumClass)> {
        let mut rng = rng::stream(key, index);
        let (tx, class) = gen_class_signal(
            class,
            self.per_user_power,
            self.scenario.noise_power(),
            &self.params,
            &mut rng,
        )?;
        Ok((capture_iq(&tx, &self.profile, &self.scenario, &mut rng)?, class))
    }
}

/// Labeled captures, class-balanced (`8 * n_per_class`) and interleaved by
/// class. Generation fans out over examples; each uses its own substream.
pub fn make_captures(
    n_per_class: usize,
    setup: &CaptureSetup,
    key: u64,
) -> Result<Vec<(ComplexSignal, SpectrumClass)>> {
    if n_per_class == 0 {
        return Err(Error::Domain("need at least one example per class".into()));
    }
    let total = n_per_class * SpectrumClass::COUNT;
    par::map_range(total, |i| setup.capture(key, i as u64))
        .into_iter()
        .collect()
}

pub type Dataset = Vec<(SpectrumImage, SpectrumClass)>;

pub fn make_dataset(n_per_class: usize, setup: &CaptureSetup, key: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::Domain("need at least one example per class".into()));
    }
    let total = n_per_class * SpectrumClass::COUNT;
    par::map_range(total, |i| {
        let (iq, class) = setup.capture(key, i as u64)?;
        Ok((visualize(&iq)?, class))
    })
    .into_iter()
    .collect()
}

/// Writes `NNNNNN.iq` signal files, `NNNNNN.img` image caches and a
/// `manifest.csv` of `index,class_label` lines into `dir`.
pub fn write_dataset_dir(dir: &Path, captures: &[(ComplexSignal, SpectrumClass)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join("manifest.csv");
    let mut manifest = BufWriter::new(File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?);
    writeln!(manifest, "index,class_label").map_err(|e| Error::io(&manifest_path, e))?;
    for (i, (iq, class)) in captures.iter().enumerate() {
        iq.save(&dir.join(format!("{i:06}.iq")))?;
        let img_path = dir.join(format!("{i:06}.img"));
        let mut w = BufWriter::new(File::create(&img_path).map_err(|e| Error::io(&img_path, e))?);
        visualize(iq)?.write_to(&mut w).map_err(|e| Error::io(&img_path, e))?;
        w.flush().map_err(|e| Error::io(&img_path, e))?;
        writeln!(manifest, "{i},{class}").map_err(|e| Error::io(&manifest_path, e))?;
    }
    manifest.flush().map_err(|e| Error::io(&manifest_path, e))
}

/// Reads a directory written by [`write_dataset_dir`], using the image caches.
pub fn read_dataset_dir(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.csv");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, label) = line
            .split_once(',')
            .ok_or_else(|| Error::format(&manifest_path, format!("line {}: expected `index,class_label`", line_no + 1)))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::format(&manifest_path, format!("line {}: bad index", line_no + 1)))?;
        let class: SpectrumClass = label.trim().parse()?;
        let img_path = dir.join(format!("{idx:06}.img"));
        let file = File::open(&img_path).map_err(|e| Error::io(&img_path, e))?;
        out.push((SpectrumImage::read_from(std::io::BufReader::new(file))?, class));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_scenario, Placement, RfConstants};
    use crate::surface::DEFAULT_ABSORBERS;

    fn setup(n_absorb: usize) -> CaptureSetup {
        CaptureSetup {
            params: SynthParams::default(),
            per_user_power: 0.2,
            profile: RicsProfile::ra_aligned(60, n_absorb).unwrap(),
            scenario: place_scenario(&Placement::default(), RfConstants::default()).unwrap(),
        }
    }

    #[test]
    fn class_bits_round_trip() {
        for c in SpectrumClass::ALL {
            assert_eq!(SpectrumClass::from_active_users(c.active_users()), c);
            assert_eq!(SpectrumClass::from_index(c.index()), Some(c));
            assert_eq!(c.name().parse::<SpectrumClass>().unwrap(), c);
        }
        assert!("U4".parse::<SpectrumClass>().is_err());
    }

    #[test]
    fn idle_is_noise_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, c) = gen_class_signal(SpectrumClass::Idle, 0.2, 2.5, &SynthParams::default(), &mut rng).unwrap();
        assert_eq!(c, SpectrumClass::Idle);
        assert!((s.power() / 2.5 - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_user_power_is_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (s, _) = gen_class_signal(SpectrumClass::U3, 0.2, 0.0, &SynthParams::default(), &mut rng).unwrap();
        assert!((s.power() / 0.2 - 1.0).abs() < 0.1, "{}", s.power());
    }

    #[test]
    fn full_class_is_superposition_of_single_users() {
        let params = SynthParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut probe = rng.clone();
        let (all, _) = gen_class_signal(SpectrumClass::U1U2U3, 0.2, 0.0, &params, &mut rng).unwrap();
        let (seeds, _) = draw_seeds(&mut probe);
        let sum: Vec<Complex64> = (0..params.n_samples)
            .map(|i| (0..3).map(|u| user_component(&params, u, 0.2, seeds[u])[i]).sum())
            .collect();
        let err = all.samples().iter().zip(&sum).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let short = SynthParams { n_samples: 128, ..SynthParams::default() };
        assert!(gen_class_signal(SpectrumClass::U1, 0.2, 0.0, &short, &mut rng).is_err());
        assert!(gen_class_signal(SpectrumClass::U1, 0.0, 0.0, &SynthParams::default(), &mut rng).is_err());
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 100], 1.0, 0.0).unwrap();
        assert!(matches!(visualize(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn capture_needs_ra_mode() {
        let st = setup(4);
        let rr = RicsProfile::rr_aligned(60, 0.5).unwrap();
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 256], 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(capture_iq(&s, &rr, &st.scenario, &mut rng), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn zero_input_captures_the_noise_floor() {
        let st = setup(DEFAULT_ABSORBERS);
        let s = ComplexSignal::new(vec![Complex64::new(0.0, 0.0); 8192], 10e6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = capture_iq(&s, &st.profile, &st.scenario, &mut rng).unwrap();
        assert!((c.power() / st.scenario.noise_power() - 1.0).abs() < 0.05);
    }

    #[test]
    fn combining_four_elements_adds_six_db() {
        // Constant input: the capture mean is the signal, the spread around it
        // is the noise.
        let snr = |m: usize| {
            let st = setup(m);
            let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 1 << 16], 10e6, 0.0).unwrap();
            let c = capture_iq(&s, &st.profile, &st.scenario, &mut ChaCha8Rng::seed_from_u64(m as u64)).unwrap();
            let mean = c.mean();
            let noise = c.samples().iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((noise / st.scenario.noise_power() - 1.0).abs() < 0.03);
            mean.norm_sqr() / noise
        };
        let db = 10.0 * (snr(4) / snr(1)).log10();
        assert!((db - 10.0 * 4f64.log10()).abs() < 0.1, "{db}");
    }

    #[test]
    fn all_zero_iq_gives_all_zero_image() {
        let s = ComplexSignal::new(vec![Complex64::new(0.0, 0.0); 512], 10e6, 0.0).unwrap();
        assert_eq!(visualize(&s).unwrap(), SpectrumImage::zeros());
    }

    #[test]
    fn image_is_normalized() {
        let st = setup(4);
        let (iq, _) = st.capture(7, 3).unwrap();
        let img = visualize(&iq).unwrap();
        let max = img.pixels().iter().copied().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(img.pixels().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn column_bands_tile_the_channel() {
        assert_eq!(column_band(0, 10e6).0, -5e6);
        assert_eq!(column_band(15, 10e6).1, 5e6);
        assert_eq!(column_band(8, 10e6).0, 0.0);
    }

    #[test]
    fn image_cache_round_trip() {
        let st = setup(4);
        let (iq, _) = st.capture(1, 5).unwrap();
        let img = visualize(&iq).unwrap();
        let mut buf = Vec::new();
        img.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), IMAGE_PIXELS * 8);
        assert_eq!(SpectrumImage::read_from(&buf[..]).unwrap(), img);
    }

    #[test]
    fn dataset_is_balanced_and_deterministic() {
        let st = setup(4);
        let a = make_dataset(3, &st, 99).unwrap();
        let b = make_dataset(3, &st, 99).unwrap();
        assert_eq!(a.len(), 24);
        for c in SpectrumClass::ALL {
            assert_eq!(a.iter().filter(|(_, k)| *k == c).count(), 3);
        }
        assert_eq!(a, b);
        assert!(make_dataset(0, &st, 99).is_err());
    }
}
