//! Design-B: reflect/refract split for physical-layer secrecy.
//!
//! The surface reflects a fraction `alpha` of the incident power towards the
//! legitimate receiver and refracts the rest, after analog processing,
//! towards the eavesdropper. The processed refraction lands on the
//! eavesdropper as interference on top of the sender's direct leakage.
//!
//! ```text
//! SNR_B  = P (sqrt(g_d) + sqrt(alpha N^2 g_s g_b))^2 / sigma^2
//! SINR_E = P g_leak / (P beta N^2 g_s g_e c + sigma^2)
//! C_s    = max(0, log2(1 + SNR_B) - log2(1 + SINR_E))
//! ```
//!
//! `c` is the passive power factor of the analog operator (one for a pure
//! frequency shift).

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::analog::OperatorSpec;
use crate::error::{Error, Result};
use crate::geometry::{Scenario, NOMINAL_USER};
use crate::par;
use crate::surface::{coherent_array_gain, Mode, RicsProfile, Side};

/// DFT size at which operator power factors are evaluated; matches the
/// synthetic capture length.
pub const OPERATOR_BINS: usize = 4096;

/// Power gains of every path the secrecy model uses, plus the link budget
/// scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub tx_power_w: f64,
    pub noise_w: f64,
    /// Sender -> receiver without the surface; zero when blocked.
    pub direct_legit: f64,
    /// Sender -> eavesdropper leakage.
    pub leak: f64,
    pub sender_rics: f64,
    pub rics_legit: f64,
    pub rics_eve: f64,
}

impl LinkGains {
    pub fn from_scenario(scenario: &Scenario, sender: usize) -> Self {
        LinkGains {
            tx_power_w: scenario.rf.tx_power_w,
            noise_w: scenario.noise_power(),
            direct_legit: scenario.user_to_bs(sender),
            leak: scenario.user_to_eve(sender),
            sender_rics: scenario.user_to_rics(sender),
            rics_legit: scenario.rics_to_bs(),
            rics_eve: scenario.rics_to_eve(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyPoint {
    pub n_elements: usize,
    pub alpha: f64,
    pub rate_legit: f64,
    pub rate_eve: f64,
    pub secrecy_rate: f64,
}

impl SecrecyPoint {
    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }
}

pub fn secrecy_rate(rate_legit: f64, rate_eve: f64) -> f64 {
    (rate_legit - rate_eve).max(0.0)
}

/// `(rate_legit, rate_eve)` in bit/s/Hz for an RR profile.
pub fn link_rates_with_gains(gains: &LinkGains, profile: &RicsProfile, operator: &OperatorSpec) -> Result<(f64, f64)> {
    if profile.mode() != Mode::Rr {
        return Err(Error::ModeMismatch("secrecy needs a reflection-refraction profile".into()));
    }
    let reflected = coherent_array_gain(profile, Side::Reflect, gains.sender_rics, gains.rics_legit)?;
    let refracted = coherent_array_gain(profile, Side::Refract, gains.sender_rics, gains.rics_eve)?;
    let amplitude = gains.direct_legit.sqrt() + reflected.sqrt();
    let snr_legit = gains.tx_power_w * amplitude * amplitude / gains.noise_w;
    let interference = gains.tx_power_w * refracted * operator.passive_power_factor(OPERATOR_BINS);
    let sinr_eve = gains.tx_power_w * gains.leak / (interference + gains.noise_w);
    Ok(((1.0 + snr_legit).log2(), (1.0 + sinr_eve).log2()))
}

/// Rates for the nominal sender of `scenario`.
pub fn link_rates(scenario: &Scenario, profile: &RicsProfile, operator: &OperatorSpec) -> Result<(f64, f64)> {
    link_rates_with_gains(&LinkGains::from_scenario(scenario, NOMINAL_USER), profile, operator)
}

/// Rates with the surface absent.
pub fn baseline_rates(gains: &LinkGains) -> (f64, f64) {
    (
        (1.0 + gains.tx_power_w * gains.direct_legit / gains.noise_w).log2(),
        (1.0 + gains.tx_power_w * gains.leak / gains.noise_w).log2(),
    )
}

fn point(gains: &LinkGains, n_elements: usize, alpha: f64, operator: &OperatorSpec) -> Result<SecrecyPoint> {
    let profile = RicsProfile::rr_aligned(n_elements, alpha)?;
    debug_assert_eq!(profile.alpha() + profile.beta(), 1.0);
    let (rate_legit, rate_eve) = link_rates_with_gains(gains, &profile, operator)?;
    Ok(SecrecyPoint {
        n_elements,
        alpha,
        rate_legit,
        rate_eve,
        secrecy_rate: secrecy_rate(rate_legit, rate_eve),
    })
}

/// One CSV row: a surface operating point or the no-surface baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecrecyRow {
    Rics(SecrecyPoint),
    Baseline {
        n_elements: usize,
        rate_legit: f64,
        rate_eve: f64,
        secrecy_rate: f64,
    },
}

impl SecrecyRow {
    pub fn n_elements(&self) -> usize {
        match self {
            SecrecyRow::Rics(p) => p.n_elements,
            SecrecyRow::Baseline { n_elements, .. } => *n_elements,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            SecrecyRow::Rics(p) => Some(p.alpha),
            SecrecyRow::Baseline { .. } => None,
        }
    }

    pub fn secrecy_rate(&self) -> f64 {
        match self {
            SecrecyRow::Rics(p) => p.secrecy_rate,
            SecrecyRow::Baseline { secrecy_rate, .. } => *secrecy_rate,
        }
    }
}

impl fmt::Display for SecrecyRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecrecyRow::Rics(p) => write!(
                f,
                "{:?},{},{:?},{:?},{:?}",
                p.alpha, p.n_elements, p.rate_legit, p.rate_eve, p.secrecy_rate
            ),
            SecrecyRow::Baseline {
                n_elements,
                rate_legit,
                rate_eve,
                secrecy_rate,
            } => write!(f, "baseline,{n_elements},{rate_legit:?},{rate_eve:?},{secrecy_rate:?}"),
        }
    }
}

/// Secrecy curves for every `alpha` over the element grid, sorted by alpha
/// then N, followed by the baseline series.
pub fn run_secrecy_experiment(
    scenario: &Scenario,
    alphas: &[f64],
    n_elements: &[usize],
    operator: &OperatorSpec,
) -> Result<Vec<SecrecyRow>> {
    if alphas.is_empty() || n_elements.is_empty() {
        return Err(Error::Configuration("secrecy sweep needs non-empty alpha and element grids".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Configuration(format!("alpha {a} is outside [0, 1]")));
    }
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    let mut grid = n_elements.to_vec();
    grid.sort_unstable();
    let gains = LinkGains::from_scenario(scenario, NOMINAL_USER);
    let jobs: Vec<(f64, usize)> = alphas.iter().flat_map(|&a| grid.iter().map(move |&n| (a, n))).collect();
    let mut rows = par::map_slice(&jobs, |&(a, n)| point(&gains, n, a, operator).map(SecrecyRow::Rics))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (rate_legit, rate_eve) = baseline_rates(&gains);
    rows.extend(grid.iter().map(|&n| SecrecyRow::Baseline {
        n_elements: n,
        rate_legit,
        rate_eve,
        secrecy_rate: secrecy_rate(rate_legit, rate_eve),
    }));
    Ok(rows)
}

/// `{0, step, 2 step, ...}` up to and including 1.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::Domain(format!("alpha grid step must lie in (0, 0.5], got {step}")));
    }
    let n = (1.0 / step + 1e-9).floor() as usize;
    // k / n is exact at the grid's decimal points when the step divides one.
    let divides = (n as f64 * step - 1.0).abs() < 1e-9;
    let mut grid: Vec<f64> = (0..=n)
        .map(|k| if divides { k as f64 / n as f64 } else { (k as f64 * step).min(1.0) })
        .collect();
    if *grid.last().expect("grid has at least two points") < 1.0 - 1e-12 {
        grid.push(1.0);
    }
    Ok(grid)
}

/// Grid search for the secrecy-maximizing split; the lowest alpha wins ties.
pub fn optimize_alpha_with_gains(
    gains: &LinkGains,
    n_elements: usize,
    grid_step: f64,
    operator: &OperatorSpec,
) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for alpha in alpha_grid(grid_step)? {
        let s = point(gains, n_elements, alpha, operator)?.secrecy_rate;
        if s > best.1 {
            best = (alpha, s);
        }
    }
    Ok(best)
}

pub fn optimize_alpha(
    scenario: &Scenario,
    n_elements: usize,
    grid_step: f64,
    operator: &OperatorSpec,
) -> Result<(f64, f64)> {
    optimize_alpha_with_gains(&LinkGains::from_scenario(scenario, NOMINAL_USER), n_elements, grid_step, operator)
}

pub const CSV_HEADER: &str = "alpha,n_elements,rate_legit,rate_eve,secrecy_rate";

pub fn to_csv(rows: &[SecrecyRow]) -> String {
    let mut out = Vec::new();
    writeln!(out, "{CSV_HEADER}").expect("write to Vec");
    for r in rows {
        writeln!(out, "{r}").expect("write to Vec");
    }
    String::from_utf8(out).expect("ASCII output")
}

pub fn write_csv(rows: &[SecrecyRow], path: &Path) -> Result<()> {
    fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_scenario, Placement, RfConstants};

    fn shift() -> OperatorSpec {
        OperatorSpec::FrequencyShift { shift_hz: 1e6 }
    }

    fn scenario() -> Scenario {
        let mut s = place_scenario(&Placement::default(), RfConstants::default()).unwrap();
        s.direct_user_bs = true;
        s
    }

    #[test]
    fn clamp_law() {
        assert_eq!(secrecy_rate(3.0, 1.0), 2.0);
        assert_eq!(secrecy_rate(1.0, 3.0), 0.0);
        assert_eq!(secrecy_rate(2.5, 2.5), 0.0);
    }

    #[test]
    fn ra_profile_is_rejected() {
        let p = RicsProfile::ra_aligned(60, 4).unwrap();
        assert!(matches!(link_rates(&scenario(), &p, &shift()), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn full_reflection_leaves_the_eavesdropper_alone() {
        let s = scenario();
        let gains = LinkGains::from_scenario(&s, NOMINAL_USER);
        let (_, eve) = link_rates(&s, &RicsProfile::rr_aligned(60, 1.0).unwrap(), &shift()).unwrap();
        assert_eq!(eve, baseline_rates(&gains).1);
    }

    #[test]
    fn zero_cascade_reduces_to_direct_links() {
        let gains = LinkGains {
            sender_rics: 0.0,
            ..LinkGains::from_scenario(&scenario(), NOMINAL_USER)
        };
        let (l, e) = link_rates_with_gains(&gains, &RicsProfile::rr_aligned(60, 0.5).unwrap(), &shift()).unwrap();
        let (bl, be) = baseline_rates(&gains);
        assert_eq!((l, e), (bl, be));
        assert_eq!(secrecy_rate(l, e), (bl - be).max(0.0));
    }

    #[test]
    fn rates_match_hand_link_budget() {
        let s = scenario();
        let g = LinkGains::from_scenario(&s, NOMINAL_USER);
        let (l, e) = link_rates(&s, &RicsProfile::rr_aligned(60, 0.5).unwrap(), &shift()).unwrap();
        let snr = 0.2 * (g.direct_legit.sqrt() + (0.5 * 3600.0 * g.sender_rics * g.rics_legit).sqrt()).powi(2) / g.noise_w;
        let sinr = 0.2 * g.leak / (0.2 * 0.5 * 3600.0 * g.sender_rics * g.rics_eve + g.noise_w);
        assert!((l - (1.0 + snr).log2()).abs() < 1e-9);
        assert!((e - (1.0 + sinr).log2()).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_the_split() {
        let s = scenario();
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=10 {
            let (l, e) = link_rates(&s, &RicsProfile::rr_aligned(40, k as f64 / 10.0).unwrap(), &shift()).unwrap();
            if let Some((pl, pe)) = prev {
                assert!(l > pl);
                assert!(e > pe);
            }
            prev = Some((l, e));
        }
    }

    #[test]
    fn lossy_operators_inject_less_interference() {
        let s = scenario();
        let p = RicsProfile::rr_aligned(60, 0.5).unwrap();
        let (_, eve_shift) = link_rates(&s, &p, &shift()).unwrap();
        let (_, eve_diff) = link_rates(&s, &p, &OperatorSpec::Differentiate).unwrap();
        assert!(eve_diff > eve_shift);
    }

    #[test]
    fn default_sweep_shape() {
        let grid: Vec<usize> = (20..=100).step_by(10).collect();
        let rows = run_secrecy_experiment(&scenario(), &[0.8, 0.2, 0.5], &grid, &shift()).unwrap();
        assert_eq!(rows.len(), 3 * 9 + 9);
        assert_eq!(rows[0].alpha(), Some(0.2));
        assert_eq!(rows[27].alpha(), None);
        let series = |i: usize| &rows[i * 9..(i + 1) * 9];
        let baseline = series(3);
        for i in 0..3 {
            let s = series(i);
            for (k, (r, b)) in s.iter().zip(baseline).enumerate() {
                assert!(r.secrecy_rate() > b.secrecy_rate());
                if k > 0 {
                    assert!(r.secrecy_rate() - b.secrecy_rate() > s[k - 1].secrecy_rate() - baseline[k - 1].secrecy_rate());
                }
            }
        }
        let (low, high) = (series(0), series(2));
        assert!(low[0].secrecy_rate() > high[0].secrecy_rate());
        assert!(low[8].secrecy_rate() < high[8].secrecy_rate());
        let crossover = grid[(0..9).find(|&k| low[k].secrecy_rate() < high[k].secrecy_rate()).unwrap()];
        assert!((40..=80).contains(&crossover), "crossover at {crossover}");
    }

    #[test]
    fn empty_or_invalid_grids() {
        assert!(matches!(run_secrecy_experiment(&scenario(), &[], &[20], &shift()), Err(Error::Configuration(_))));
        assert!(matches!(run_secrecy_experiment(&scenario(), &[0.5], &[], &shift()), Err(Error::Configuration(_))));
        assert!(matches!(run_secrecy_experiment(&scenario(), &[1.5], &[20], &shift()), Err(Error::Configuration(_))));
    }

    #[test]
    fn alpha_grids() {
        assert_eq!(alpha_grid(0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(alpha_grid(0.01).unwrap().len(), 101);
        assert_eq!(*alpha_grid(0.3).unwrap().last().unwrap(), 1.0);
        assert!(alpha_grid(0.0).is_err());
        assert!(alpha_grid(0.6).is_err());
    }

    #[test]
    fn optimizer_matches_three_point_oracle() {
        let s = scenario();
        let (a, best) = optimize_alpha(&s, 60, 0.5, &shift()).unwrap();
        let evals: Vec<f64> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&a| {
                let (l, e) = link_rates(&s, &RicsProfile::rr_aligned(60, a).unwrap(), &shift()).unwrap();
                secrecy_rate(l, e)
            })
            .collect();
        let max = evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, max);
        assert_eq!(evals[(a * 2.0) as usize], max);
    }

    #[test]
    fn no_leakage_means_full_reflection() {
        let gains = LinkGains {
            leak: 0.0,
            ..LinkGains::from_scenario(&scenario(), NOMINAL_USER)
        };
        assert_eq!(optimize_alpha_with_gains(&gains, 60, 0.01, &shift()).unwrap().0, 1.0);
    }

    #[test]
    fn optimal_split_grows_with_the_array() {
        let s = scenario();
        let small = optimize_alpha(&s, 20, 0.01, &shift()).unwrap().0;
        let large = optimize_alpha(&s, 100, 0.01, &shift()).unwrap().0;
        assert!(small <= large);
    }

    #[test]
    fn csv_rows() {
        let rows = run_secrecy_experiment(&scenario(), &[0.2], &[20], &shift()).unwrap();
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("0.2,20,"));
        assert!(lines[2].starts_with("baseline,20,"));
    }
}
