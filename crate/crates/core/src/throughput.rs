//! Design-A: spectrum-sensing driven TDMA slot allocation.
//!
//! Each frame a random subset of the three users has a payload to send. The
//! sensing front end classifies the activity pattern, slots are split among
//! the users it believes active, and every truly active user delivers up to
//! its payload over the surface-assisted uplink.
//!
//! All schemes of one sweep see the same frames: frame `f` draws its true
//! class and a uniform variate from its own substream, and every scheme maps
//! that pair to its inferred class. Comparisons between schemes therefore
//! use common random numbers.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::onn::{self, DiffractiveModel, N_CLASSES};
use crate::par;
use crate::rng::{self, Domain};
use crate::surface::{coherent_array_gain, RicsProfile, Side};
use crate::synth::{visualize, CaptureSetup, SpectrumClass};

pub type Allocation = [usize; 3];
pub type Confusion = [[f64; N_CLASSES]; N_CLASSES];

fn split_equal(active: [bool; 3], frame_slots: usize) -> Allocation {
    let n = active.iter().filter(|a| **a).count();
    let mut alloc = [0; 3];
    if n == 0 {
        return alloc;
    }
    let mut remainder = frame_slots % n;
    for (slots, _) in alloc.iter_mut().zip(active).filter(|(_, a)| *a) {
        *slots = frame_slots / n + usize::from(remainder > 0);
        remainder = remainder.saturating_sub(1);
    }
    alloc
}

/// Equal split among the users `inferred` marks active, remainder to the
/// lowest index. Idle gets nothing.
pub fn allocate_slots(inferred: SpectrumClass, frame_slots: usize) -> Allocation {
    split_equal(inferred.active_users(), frame_slots)
}

/// The class-blind baseline: thirds for everyone.
pub fn allocate_static(frame_slots: usize) -> Allocation {
    split_equal([true; 3], frame_slots)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameParams {
    pub frame_slots: usize,
    pub slot_duration_s: f64,
    pub payload_bits: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            frame_slots: 12,
            slot_duration_s: 1e-6,
            payload_bits: 1000.0,
        }
    }
}

impl FrameParams {
    pub fn validate(&self) -> Result<()> {
        if self.frame_slots == 0 {
            return Err(Error::Domain("frame needs at least one slot".into()));
        }
        if !(self.slot_duration_s > 0.0 && self.slot_duration_s.is_finite()) {
            return Err(Error::Domain(format!("slot duration must be positive, got {}", self.slot_duration_s)));
        }
        if !(self.payload_bits >= 0.0 && self.payload_bits.is_finite()) {
            return Err(Error::Domain(format!("payload must be non-negative, got {}", self.payload_bits)));
        }
        Ok(())
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_slots as f64 * self.slot_duration_s
    }
}

/// Receive SNR of `user` at the base station: reflected cascade plus the
/// direct path (if unblocked), combined in phase.
pub fn user_snr(scenario: &Scenario, profile: &RicsProfile, user: usize) -> Result<f64> {
    let cascade = coherent_array_gain(profile, Side::Reflect, scenario.user_to_rics(user), scenario.rics_to_bs())?;
    let amplitude = scenario.user_to_bs(user).sqrt() + cascade.sqrt();
    Ok(scenario.rf.tx_power_w * amplitude * amplitude / scenario.noise_power())
}

fn delivered(true_class: SpectrumClass, alloc: &Allocation, snr: &[f64; 3], frame: &FrameParams, bandwidth: f64) -> f64 {
    true_class
        .active_users()
        .iter()
        .zip(alloc)
        .zip(snr)
        .filter(|((active, slots), _)| **active && **slots > 0)
        .map(|((_, &slots), &snr)| {
            let capacity = slots as f64 * frame.slot_duration_s * bandwidth * (1.0 + snr).log2();
            capacity.min(frame.payload_bits)
        })
        .sum()
}

/// Bits delivered in one frame.
pub fn frame_throughput(
    true_class: SpectrumClass,
    alloc: &Allocation,
    scenario: &Scenario,
    profile: &RicsProfile,
    frame: &FrameParams,
) -> Result<f64> {
    let snr = [
        user_snr(scenario, profile, 0)?,
        user_snr(scenario, profile, 1)?,
        user_snr(scenario, profile, 2)?,
    ];
    Ok(delivered(true_class, alloc, &snr, frame, scenario.rf.bandwidth_hz))
}

/// Where a scheme's inferred class comes from.
#[derive(Debug, Clone)]
pub enum Inference {
    /// Class-blind static allocation.
    Blind,
    /// Perfect sensing.
    Oracle,
    /// Inferred class sampled from row `true_class` of a confusion matrix.
    Emulated(Box<Confusion>),
    /// The trained classifier run on a fresh capture every frame.
    Model(Box<DiffractiveModel>),
}

/// Confusion matrix with `accuracy` on the diagonal and the remaining mass
/// spread evenly over the other classes.
pub fn uniform_confusion(accuracy: f64) -> Result<Confusion> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::Domain(format!("accuracy must lie in [0, 1], got {accuracy}")));
    }
    let off = (1.0 - accuracy) / (N_CLASSES - 1) as f64;
    let mut m = [[off; N_CLASSES]; N_CLASSES];
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = accuracy;
    }
    Ok(m)
}

/// Inverse-CDF draw from one confusion row with uniform `u` in `[0, 1)`.
pub fn sample_row(row: &[f64; N_CLASSES], u: f64) -> SpectrumClass {
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_nonzero = k;
            if u < cumulative {
                return SpectrumClass::ALL[k];
            }
        }
    }
    // Rows summing to slightly under one.
    SpectrumClass::ALL[last_nonzero]
}

#[derive(Debug, Clone)]
pub struct SchemeSource {
    pub name: String,
    pub inference: Inference,
}

impl SchemeSource {
    pub fn new(name: impl Into<String>, inference: Inference) -> Self {
        SchemeSource {
            name: name.into(),
            inference,
        }
    }
}

pub const SCHEME_STATIC: &str = "RIS-static";
pub const SCHEME_2LAYER: &str = "RICS-2layer";
pub const SCHEME_4LAYER: &str = "RICS-4layer";
pub const SCHEME_PERFECT: &str = "RICS-perfect";

/// The four schemes of the throughput figure, trained layers given by
/// their inference sources.
pub fn standard_schemes(two_layer: Inference, four_layer: Inference) -> Vec<SchemeSource> {
    vec![
        SchemeSource::new(SCHEME_STATIC, Inference::Blind),
        SchemeSource::new(SCHEME_2LAYER, two_layer),
        SchemeSource::new(SCHEME_4LAYER, four_layer),
        SchemeSource::new(SCHEME_PERFECT, Inference::Oracle),
    ]
}

#[derive(Debug, Clone)]
pub struct ThroughputExperiment {
    pub scenario: Scenario,
    pub n_elements: Vec<usize>,
    pub n_absorb: usize,
    pub frame: FrameParams,
    pub frames: usize,
    /// Needed by schemes running a trained model.
    pub capture: Option<CaptureSetup>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputPoint {
    pub scheme: String,
    pub n_elements: usize,
    pub mean_bps: f64,
    pub ci95_bps: f64,
}

impl fmt::Display for ThroughputPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{:?},{:?}", self.scheme, self.n_elements, self.mean_bps, self.ci95_bps)
    }
}

fn infer_frame(
    inference: &Inference,
    truth: SpectrumClass,
    u: f64,
    capture: Option<&CaptureSetup>,
    capture_key: u64,
    frame: u64,
) -> Result<Option<SpectrumClass>> {
    Ok(match inference {
        Inference::Blind => None,
        Inference::Oracle => Some(truth),
        Inference::Emulated(m) => Some(sample_row(&m[truth.index()], u)),
        Inference::Model(model) => {
            let setup = capture.ok_or_else(|| Error::Configuration("model inference needs a capture setup".into()))?;
            let (iq, _) = setup.capture_class(truth, capture_key, frame)?;
            Some(onn::infer(model, &visualize(&iq)?)?)
        }
    })
}

impl ThroughputExperiment {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.n_elements.is_empty() {
            return Err(Error::Configuration("element grid is empty".into()));
        }
        if self.frames == 0 {
            return Err(Error::Configuration("need at least one frame per point".into()));
        }
        if let Some(&n) = self.n_elements.iter().find(|&&n| n <= self.n_absorb) {
            return Err(Error::Configuration(format!(
                "N = {n} leaves no reflecting elements next to {} sensing elements",
                self.n_absorb
            )));
        }
        Ok(())
    }

    /// Mean throughput per scheme and element count, ordered by scheme then
    /// by the element grid.
    pub fn run(&self, schemes: &[SchemeSource], seed: u64) -> Result<Vec<ThroughputPoint>> {
        self.validate()?;
        let snrs = self
            .n_elements
            .iter()
            .map(|&n| {
                let profile = RicsProfile::ra_aligned(n, self.n_absorb)?;
                Ok([
                    user_snr(&self.scenario, &profile, 0)?,
                    user_snr(&self.scenario, &profile, 1)?,
                    user_snr(&self.scenario, &profile, 2)?,
                ])
            })
            .collect::<Result<Vec<[f64; 3]>>>()?;
        let frame_key = rng::derive(seed, Domain::Frames);
        let capture_key = rng::derive(seed, Domain::Captures);
        let bandwidth = self.scenario.rf.bandwidth_hz;

        // bits[frame][scheme * n_grid + grid index]
        let bits = par::map_range(self.frames, |f| -> Result<Vec<f64>> {
            let mut rng = rng::stream(frame_key, f as u64);
            let truth = SpectrumClass::ALL[rng.random_range(0..N_CLASSES)];
            let u: f64 = rng.random();
            let mut out = Vec::with_capacity(schemes.len() * snrs.len());
            for scheme in schemes {
                let inferred =
                    infer_frame(&scheme.inference, truth, u, self.capture.as_ref(), capture_key, f as u64)?;
                let alloc = match inferred {
                    Some(c) => allocate_slots(c, self.frame.frame_slots),
                    None => allocate_static(self.frame.frame_slots),
                };
                out.extend(snrs.iter().map(|snr| delivered(truth, &alloc, snr, &self.frame, bandwidth)));
            }
            Ok(out)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let duration = self.frame.frame_duration();
        let mut points = Vec::with_capacity(schemes.len() * snrs.len());
        for (s, scheme) in schemes.iter().enumerate() {
            for (g, &n) in self.n_elements.iter().enumerate() {
                let column: Vec<f64> = bits.iter().map(|row| row[s * snrs.len() + g] / duration).collect();
                let (mean_bps, ci95_bps) = par::mean_ci95(&column);
                points.push(ThroughputPoint {
                    scheme: scheme.name.clone(),
                    n_elements: n,
                    mean_bps,
                    ci95_bps,
                });
            }
        }
        Ok(points)
    }
}

pub const CSV_HEADER: &str = "scheme,n_elements,mean_throughput_bps,ci95_bps";

pub fn write_csv(points: &[ThroughputPoint], path: &Path) -> Result<()> {
    fs::write(path, to_csv(points)).map_err(|e| Error::io(path, e))
}

pub fn to_csv(points: &[ThroughputPoint]) -> String {
    let mut out = Vec::new();
    writeln!(out, "{CSV_HEADER}").expect("write to Vec");
    for p in points {
        writeln!(out, "{p}").expect("write to Vec");
    }
    String::from_utf8(out).expect("ASCII output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_scenario, Placement, RfConstants};
    use crate::surface::DEFAULT_ABSORBERS;
    use SpectrumClass::*;

    fn scenario() -> Scenario {
        place_scenario(&Placement::default(), RfConstants::default()).unwrap()
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_slots(Idle, 12), [0, 0, 0]);
        assert_eq!(allocate_slots(U1U2U3, 12), [4, 4, 4]);
        assert_eq!(allocate_slots(U1U3, 12), [6, 0, 6]);
        assert_eq!(allocate_slots(U2U3, 5), [0, 3, 2]);
        assert_eq!(allocate_static(12), [4, 4, 4]);
        assert_eq!(allocate_static(10), [4, 3, 3]);
        assert_eq!(allocate_static(1), [1, 0, 0]);
    }

    #[test]
    fn allocations_use_every_slot() {
        for slots in 1..40 {
            for c in SpectrumClass::ALL {
                let total: usize = allocate_slots(c, slots).iter().sum();
                assert_eq!(total, if c == Idle { 0 } else { slots });
            }
        }
    }

    #[test]
    fn idle_and_missed_users_deliver_nothing() {
        let s = scenario();
        let p = RicsProfile::ra_aligned(60, DEFAULT_ABSORBERS).unwrap();
        let f = FrameParams::default();
        assert_eq!(frame_throughput(Idle, &[4, 4, 4], &s, &p, &f).unwrap(), 0.0);
        assert_eq!(frame_throughput(U1, &[0, 12, 0], &s, &p, &f).unwrap(), 0.0);
    }

    #[test]
    fn delivered_bits_match_the_link_budget() {
        let s = scenario();
        let p = RicsProfile::ra_aligned(60, DEFAULT_ABSORBERS).unwrap();
        let f = FrameParams::default();
        // 56 aligned reflectors, hop gains from the log-distance law.
        let g1 = s.user_to_rics(1);
        let g2 = s.rics_to_bs();
        let snr = 0.2 * 56.0 * 56.0 * g1 * g2 / s.noise_power();
        let expected = 6.0 * 1e-6 * 10e6 * (1.0 + snr).log2();
        let got = frame_throughput(U2, &[0, 6, 6], &s, &p, &f).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected);
        // Long slots saturate the payload.
        let long = FrameParams { slot_duration_s: 1e-3, ..f };
        assert_eq!(frame_throughput(U1U2, &[4, 4, 4], &s, &p, &long).unwrap(), 2000.0);
    }

    #[test]
    fn throughput_grows_with_elements_and_power() {
        let s = scenario();
        let f = FrameParams::default();
        let mut last = 0.0;
        for n in [10, 20, 40, 80, 160] {
            let p = RicsProfile::ra_aligned(n, DEFAULT_ABSORBERS).unwrap();
            let bits = frame_throughput(U1U2U3, &[4, 4, 4], &s, &p, &f).unwrap();
            assert!(bits >= last);
            last = bits;
        }
        let p = RicsProfile::ra_aligned(60, DEFAULT_ABSORBERS).unwrap();
        let mut louder = s.clone();
        louder.rf.tx_power_w = 1.0;
        assert!(
            frame_throughput(U1, &[4, 0, 0], &louder, &p, &f).unwrap()
                > frame_throughput(U1, &[4, 0, 0], &s, &p, &f).unwrap()
        );
    }

    #[test]
    fn confusion_sampling() {
        let m = uniform_confusion(0.9).unwrap();
        for row in &m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Off-diagonal mass 0.1 / 7 precedes the diagonal in row 3.
        assert_eq!(sample_row(&m[3], 0.0), SpectrumClass::ALL[0]);
        assert_eq!(sample_row(&m[3], 0.02), SpectrumClass::ALL[1]);
        assert_eq!(sample_row(&m[3], 0.05), SpectrumClass::ALL[3]);
        assert_eq!(sample_row(&m[3], 0.95), SpectrumClass::ALL[4]);
        let mut one_hot = [0.0; N_CLASSES];
        one_hot[5] = 1.0;
        for u in [0.0, 0.5, 0.999_999_9] {
            assert_eq!(sample_row(&one_hot, u), SpectrumClass::ALL[5]);
        }
        assert!(uniform_confusion(1.1).is_err());
    }

    fn experiment(frames: usize) -> ThroughputExperiment {
        ThroughputExperiment {
            scenario: scenario(),
            n_elements: vec![20, 60, 100],
            n_absorb: DEFAULT_ABSORBERS,
            frame: FrameParams::default(),
            frames,
            capture: None,
        }
    }

    #[test]
    fn identity_confusion_matches_perfect_sensing() {
        let schemes = [
            SchemeSource::new("a", Inference::Oracle),
            SchemeSource::new("b", Inference::Emulated(Box::new(uniform_confusion(1.0).unwrap()))),
        ];
        let pts = experiment(200).run(&schemes, 3).unwrap();
        for g in 0..3 {
            assert_eq!(pts[g].mean_bps, pts[3 + g].mean_bps);
        }
    }

    #[test]
    fn emulated_sweep_orders_schemes() {
        let schemes = standard_schemes(
            Inference::Emulated(Box::new(uniform_confusion(0.85).unwrap())),
            Inference::Emulated(Box::new(uniform_confusion(0.90).unwrap())),
        );
        let pts = experiment(2000).run(&schemes, 11).unwrap();
        assert_eq!(pts.len(), 12);
        for g in 0..3 {
            let [st, l2, l4, pf] = [0, 1, 2, 3].map(|s| pts[s * 3 + g].mean_bps);
            assert!(pf >= l4 && l4 >= l2 && l2 >= st, "{st} {l2} {l4} {pf}");
        }
        let gap = |g: usize| pts[2 * 3 + g].mean_bps - pts[3 + g].mean_bps;
        assert!(gap(2) > gap(0));
    }

    #[test]
    fn rejects_bad_grids() {
        let mut e = experiment(10);
        e.n_elements = vec![4];
        assert!(matches!(e.run(&[], 0), Err(Error::Configuration(_))));
        e.n_elements.clear();
        assert!(matches!(e.run(&[], 0), Err(Error::Configuration(_))));
        let model_without_setup = [SchemeSource::new(
            "m",
            Inference::Model(Box::new(onn::init_model(1, &mut rng::substream(0, Domain::ModelInit, 0)).unwrap())),
        )];
        assert!(matches!(experiment(4).run(&model_without_setup, 0), Err(Error::Configuration(_))));
    }

    #[test]
    fn csv_layout() {
        let pts = experiment(10).run(&[SchemeSource::new(SCHEME_PERFECT, Inference::Oracle)], 1).unwrap();
        let csv = to_csv(&pts);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("RICS-perfect,20,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
