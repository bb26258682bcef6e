//! The reconfigurable beamforming layer.
//!
//! Element phases are expressed relative to the cascaded channel, so an
//! all-zero phase vector is the aligned configuration and achieves the full
//! `M^2` array gain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    /// Reflection-absorption: most elements reflect, a few capture I/Q.
    Ra,
    /// Reflection-refraction: every element splits power between both sides.
    Rr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Reflect,
    Refract,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicsProfile {
    n_elements: usize,
    mode: Mode,
    alpha: f64,
    n_absorb: usize,
    reflect_phases: Vec<f64>,
    refract_phases: Vec<f64>,
    /// Per-element amplitude efficiency in (0, 1].
    efficiency: f64,
}

/// Default count of semi-active sensing elements.
pub const DEFAULT_ABSORBERS: usize = 4;

pub fn aligned(len: usize) -> Vec<f64> {
    vec![0.0; len]
}

fn check_phases(name: &str, phases: &[f64], expected: usize) -> Result<()> {
    if phases.len() != expected {
        return Err(Error::InvalidProfile(format!(
            "{name} has {} entries, expected {expected}",
            phases.len()
        )));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidProfile(format!("{name} contains a non-finite phase")));
    }
    Ok(())
}

/// RA profile: `n_elements - n_absorb` passive reflectors plus `n_absorb`
/// semi-active receivers. `reflect_phases` covers the reflecting subset only.
pub fn configure_ra(n_elements: usize, n_absorb: usize, reflect_phases: Vec<f64>) -> Result<RicsProfile> {
    if n_absorb == 0 {
        return Err(Error::InvalidProfile("RA mode needs at least one semi-active element".into()));
    }
    if n_absorb >= n_elements {
        return Err(Error::InvalidProfile(format!(
            "{n_absorb} semi-active elements leave no reflectors out of {n_elements}"
        )));
    }
    check_phases("reflect_phases", &reflect_phases, n_elements - n_absorb)?;
    Ok(RicsProfile {
        n_elements,
        mode: Mode::Ra,
        alpha: 1.0,
        n_absorb,
        reflect_phases,
        refract_phases: Vec::new(),
        efficiency: 1.0,
    })
}

/// RR profile with reflected power fraction `alpha`; `beta = 1 - alpha`.
pub fn configure_rr(
    n_elements: usize,
    alpha: f64,
    reflect_phases: Vec<f64>,
    refract_phases: Vec<f64>,
) -> Result<RicsProfile> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if n_elements == 0 {
        return Err(Error::InvalidProfile("surface needs at least one element".into()));
    }
    check_phases("reflect_phases", &reflect_phases, n_elements)?;
    check_phases("refract_phases", &refract_phases, n_elements)?;
    Ok(RicsProfile {
        n_elements,
        mode: Mode::Rr,
        alpha,
        n_absorb: 0,
        reflect_phases,
        refract_phases,
        efficiency: 1.0,
    })
}

impl RicsProfile {
    /// Aligned RA profile with the default number of sensing elements.
    pub fn ra_aligned(n_elements: usize, n_absorb: usize) -> Result<Self> {
        configure_ra(n_elements, n_absorb, aligned(n_elements.saturating_sub(n_absorb)))
    }

    pub fn rr_aligned(n_elements: usize, alpha: f64) -> Result<Self> {
        configure_rr(n_elements, alpha, aligned(n_elements), aligned(n_elements))
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Domain(format!("element efficiency must lie in (0, 1], got {efficiency}")));
        }
        self.efficiency = efficiency;
        Ok(self)
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn n_absorb(&self) -> usize {
        self.n_absorb
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn reflect_phases(&self) -> &[f64] {
        &self.reflect_phases
    }

    pub fn refract_phases(&self) -> &[f64] {
        &self.refract_phases
    }

    /// Number of elements serving `side`.
    pub fn serving_elements(&self, side: Side) -> usize {
        match side {
            Side::Reflect => self.reflect_phases.len(),
            Side::Refract => self.refract_phases.len(),
        }
    }

    /// Power gain of coherently combining the semi-active elements.
    pub fn sensing_gain(&self) -> Result<f64> {
        match self.mode {
            Mode::Ra => Ok(self.n_absorb as f64),
            Mode::Rr => Err(Error::ModeMismatch("RR profile has no sensing elements".into())),
        }
    }
}

pub fn split_power(profile: &RicsProfile) -> (f64, f64) {
    (profile.alpha(), profile.beta())
}

/// `|sum_m e^{j phi_m}|^2`.
pub fn array_factor(phases: &[f64]) -> f64 {
    phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p))
        .sum::<Complex64>()
        .norm_sqr()
}

/// Cascaded power gain through one side of the surface.
///
/// `hop1_gain` and `hop2_gain` are the per-element power gains of the two
/// hops. Zero hop gains are accepted and model a surface that is absent.
pub fn coherent_array_gain(profile: &RicsProfile, side: Side, hop1_gain: f64, hop2_gain: f64) -> Result<f64> {
    for (name, g) in [("hop1_gain", hop1_gain), ("hop2_gain", hop2_gain)] {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::Domain(format!("{name} must lie in [0, 1], got {g}")));
        }
    }
    let (split, phases) = match (side, profile.mode) {
        (Side::Reflect, _) => (profile.alpha, &profile.reflect_phases),
        (Side::Refract, Mode::Rr) => (profile.beta(), &profile.refract_phases),
        (Side::Refract, Mode::Ra) => {
            return Err(Error::ModeMismatch("RA profile does not refract".into()));
        }
    };
    let amplitude = profile.efficiency * profile.efficiency;
    Ok(split * amplitude * array_factor(phases) * hop1_gain * hop2_gain)
}
