//! Node placement and link budget.
//!
//! The surface sits at the origin with its plane along the x axis. Users and
//! the receiver are on the reflection side (`y >= 0`), the eavesdropper on the
//! refraction side (`y < 0`). The angle between the users and the receiver is
//! measured at the surface and split symmetrically about the surface normal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed-of-light constant folded into the free-space formula, in dB.
const FREE_SPACE_CONST_DB: f64 = 147.55;
const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn polar(radius: f64, angle_deg: f64) -> Self {
        let (s, c) = angle_deg.to_radians().sin_cos();
        Point {
            x: radius * c,
            y: radius * s,
        }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Rotates about the origin.
    pub fn rotated(&self, angle_rad: f64) -> Self {
        let (s, c) = angle_rad.sin_cos();
        Point {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }
}

/// Radio constants shared by every link in a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfConstants {
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub carrier_hz: f64,
    /// Exponent for hops that terminate on the surface.
    pub hop_exponent: f64,
    /// Exponent for direct node-to-node paths (leakage, unblocked direct link).
    pub direct_exponent: f64,
}

impl Default for RfConstants {
    fn default() -> Self {
        RfConstants {
            tx_power_w: 0.2,
            bandwidth_hz: 10e6,
            noise_density_dbm_hz: -174.0,
            carrier_hz: 0.9e9,
            hop_exponent: 2.0,
            direct_exponent: 3.5,
        }
    }
}

/// Distances and angles from which node coordinates are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub d_user: f64,
    pub d_bs: f64,
    /// Angle between users and receiver seen from the surface, degrees.
    pub angle_deg: f64,
    pub d_eve: f64,
    /// Polar angle of the eavesdropper, degrees; must point below the surface.
    pub eve_angle_deg: f64,
    /// Angular offset between neighbouring users, degrees.
    pub user_spread_deg: f64,
}

impl Placement {
    pub fn new(d_user: f64, d_bs: f64, angle_deg: f64, d_eve: f64) -> Self {
        Placement {
            d_user,
            d_bs,
            angle_deg,
            d_eve,
            ..Placement::default()
        }
    }
}

impl Default for Placement {
    fn default() -> Self {
        Placement {
            d_user: 60.0,
            d_bs: 80.0,
            angle_deg: 160.0,
            d_eve: 50.0,
            eve_angle_deg: 300.0,
            user_spread_deg: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: [Point; 3],
    pub rics: Point,
    pub bs: Point,
    pub eve: Point,
    pub rf: RfConstants,
    /// Whether the user -> receiver line of sight exists.
    pub direct_user_bs: bool,
}

/// Index of the user that acts as the sender in the secrecy experiment; it
/// sits exactly at the nominal angle.
pub const NOMINAL_USER: usize = 1;

/// Places all nodes. The nominal user (`U2`) is at exactly `angle_deg` from
/// the receiver; `U1` and `U3` are rotated towards the surface normal by one
/// and two `user_spread_deg` steps so all positions are distinct.
pub fn place_scenario(placement: &Placement, rf: RfConstants) -> Result<Scenario> {
    let p = placement;
    for (name, d) in [("d_user", p.d_user), ("d_bs", p.d_bs), ("d_eve", p.d_eve)] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidGeometry(format!("{name} must be positive, got {d}")));
        }
    }
    if !(p.angle_deg > 0.0 && p.angle_deg < 360.0) {
        return Err(Error::InvalidGeometry(format!(
            "angle must lie in (0, 360) degrees, got {}",
            p.angle_deg
        )));
    }
    let eve_y = p.eve_angle_deg.to_radians().sin();
    if !(eve_y < 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "eavesdropper angle {} deg is not on the refraction side",
            p.eve_angle_deg
        )));
    }
    // A reflex angle is the same separation measured the other way round.
    let separation = if p.angle_deg > 180.0 { 360.0 - p.angle_deg } else { p.angle_deg };
    let user_angle = 90.0 + separation / 2.0;
    let bs_angle = 90.0 - separation / 2.0;
    if !(p.user_spread_deg >= 0.0) || user_angle - 2.0 * p.user_spread_deg < 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "user spread {} deg pushes users off the reflection side",
            p.user_spread_deg
        )));
    }
    rf.validate()?;

    let users = [
        Point::polar(p.d_user, user_angle - p.user_spread_deg),
        Point::polar(p.d_user, user_angle),
        Point::polar(p.d_user, user_angle - 2.0 * p.user_spread_deg),
    ];
    let scenario = Scenario {
        users,
        rics: Point::ORIGIN,
        bs: Point::polar(p.d_bs, bs_angle),
        eve: Point::polar(p.d_eve, p.eve_angle_deg),
        rf,
        direct_user_bs: false,
    };
    let nodes = scenario.nodes();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if !(nodes[i].distance(&nodes[j]) > 0.0) {
                return Err(Error::InvalidGeometry(format!("nodes {i} and {j} coincide")));
            }
        }
    }
    Ok(scenario)
}

impl RfConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power", self.tx_power_w),
            ("bandwidth", self.bandwidth_hz),
            ("carrier_freq", self.carrier_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("hop_exponent", self.hop_exponent), ("direct_exponent", self.direct_exponent)] {
            if !(v >= 2.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be at least 2, got {v}")));
            }
        }
        if !self.noise_density_dbm_hz.is_finite() {
            return Err(Error::Domain("noise density must be finite".into()));
        }
        Ok(())
    }
}

impl Scenario {
    /// Users, surface, receiver, eavesdropper.
    pub fn nodes(&self) -> Vec<Point> {
        let mut v = self.users.to_vec();
        v.extend([self.rics, self.bs, self.eve]);
        v
    }

    pub fn noise_power(&self) -> f64 {
        noise_power(self.rf.noise_density_dbm_hz, self.rf.bandwidth_hz)
            .expect("bandwidth validated at construction")
    }

    fn hop(&self, a: &Point, b: &Point) -> f64 {
        path_gain(a.distance(b), self.rf.carrier_hz, self.rf.hop_exponent)
            .expect("scenario geometry validated at construction")
    }

    fn direct(&self, a: &Point, b: &Point) -> f64 {
        path_gain(a.distance(b), self.rf.carrier_hz, self.rf.direct_exponent)
            .expect("scenario geometry validated at construction")
    }

    pub fn user_to_rics(&self, user: usize) -> f64 {
        self.hop(&self.users[user], &self.rics)
    }

    pub fn rics_to_bs(&self) -> f64 {
        self.hop(&self.rics, &self.bs)
    }

    pub fn rics_to_eve(&self) -> f64 {
        self.hop(&self.rics, &self.eve)
    }

    /// Direct user -> receiver gain; zero while the path is blocked.
    pub fn user_to_bs(&self, user: usize) -> f64 {
        if self.direct_user_bs {
            self.direct_unblocked_user_to_bs(user)
        } else {
            0.0
        }
    }

    /// Direct user -> receiver gain ignoring the blockage flag.
    pub fn direct_unblocked_user_to_bs(&self, user: usize) -> f64 {
        self.direct(&self.users[user], &self.bs)
    }

    /// Leakage from a user straight to the eavesdropper.
    pub fn user_to_eve(&self, user: usize) -> f64 {
        self.direct(&self.users[user], &self.eve)
    }
}

/// Log-distance path gain anchored at free space, as a linear power ratio.
pub fn path_gain(d: f64, f: f64, exponent: f64) -> Result<f64> {
    path_gain_db(d, f, exponent).map(db_to_linear)
}

pub fn path_gain_db(d: f64, f: f64, exponent: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::Domain(format!("frequency must be positive, got {f}")));
    }
    if !(exponent >= 2.0) {
        return Err(Error::Domain(format!("path-loss exponent must be at least 2, got {exponent}")));
    }
    let loss = 20.0 * f.log10() + 10.0 * exponent * d.log10() - FREE_SPACE_CONST_DB
        + 10.0 * (exponent - 2.0) * REFERENCE_DISTANCE_M.log10();
    Ok(-loss)
}

/// Thermal noise power in watts over `bandwidth` at the given density.
pub fn noise_power(density_dbm_hz: f64, bandwidth: f64) -> Result<f64> {
    noise_power_dbm(density_dbm_hz, bandwidth).map(dbm_to_watts)
}

pub fn noise_power_dbm(density_dbm_hz: f64, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    Ok(density_dbm_hz + 10.0 * bandwidth.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_scenario() -> Scenario {
        place_scenario(&Placement::default(), RfConstants::default()).unwrap()
    }

    #[test]
    fn default_distances_are_honoured() {
        let s = default_scenario();
        for u in &s.users {
            assert!((u.distance(&s.rics) - 60.0).abs() < 1e-12);
        }
        assert!((s.bs.distance(&s.rics) - 80.0).abs() < 1e-12);
        assert!((s.eve.distance(&s.rics) - 50.0).abs() < 1e-12);
        assert!(s.users.iter().all(|u| u.y >= 0.0) && s.bs.y >= 0.0 && s.eve.y < 0.0);
    }

    #[test]
    fn user_bs_distance_follows_law_of_cosines() {
        let s = default_scenario();
        let oracle = (60f64.powi(2) + 80f64.powi(2) - 2.0 * 60.0 * 80.0 * 160f64.to_radians().cos()).sqrt();
        let d = s.users[NOMINAL_USER].distance(&s.bs);
        assert!((d - oracle).abs() < 1e-9);
        assert!((d - 137.92).abs() < 5e-3);
    }

    #[test]
    fn collinear_case() {
        let s = place_scenario(&Placement::new(60.0, 80.0, 180.0, 50.0), RfConstants::default()).unwrap();
        assert!((s.users[NOMINAL_USER].distance(&s.bs) - 140.0).abs() < 1e-9);
    }

    #[test]
    fn reflex_angle_measures_the_same_separation() {
        let a = place_scenario(&Placement::new(60.0, 80.0, 200.0, 50.0), RfConstants::default()).unwrap();
        let b = place_scenario(&Placement::new(60.0, 80.0, 160.0, 50.0), RfConstants::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_geometry_is_rejected() {
        for p in [
            Placement::new(0.0, 80.0, 160.0, 50.0),
            Placement::new(60.0, -1.0, 160.0, 50.0),
            Placement::new(60.0, 80.0, 160.0, 0.0),
            Placement::new(60.0, 80.0, 0.0, 50.0),
            Placement::new(60.0, 80.0, 360.0, 50.0),
            Placement { eve_angle_deg: 45.0, ..Placement::default() },
        ] {
            assert!(matches!(place_scenario(&p, RfConstants::default()), Err(Error::InvalidGeometry(_))), "{p:?}");
        }
    }

    #[test]
    fn free_space_oracles() {
        let oracle = |d: f64, f: f64| -(20.0 * d.log10() + 20.0 * f.log10() - 147.55);
        let g80 = path_gain_db(80.0, 3.5e9, 2.0).unwrap();
        let g50 = path_gain_db(50.0, 3.5e9, 2.0).unwrap();
        assert!((g80 - oracle(80.0, 3.5e9)).abs() < 1e-9);
        assert!((g50 - oracle(50.0, 3.5e9)).abs() < 1e-9);
        assert!((g80 - -81.39).abs() < 5e-3);
        assert!((g50 - -77.31).abs() < 5e-3);
    }

    #[test]
    fn doubling_distance_costs_six_db() {
        let d = path_gain_db(33.0, 2e9, 2.0).unwrap() - path_gain_db(66.0, 2e9, 2.0).unwrap();
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((d - 6.02).abs() < 1e-3);
    }

    #[test]
    fn path_gain_domain_errors() {
        assert!(matches!(path_gain(0.0, 1e9, 2.0), Err(Error::Domain(_))));
        assert!(matches!(path_gain(-3.0, 1e9, 2.0), Err(Error::Domain(_))));
        assert!(matches!(path_gain(3.0, 0.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(path_gain(3.0, 1e9, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_floor() {
        assert_eq!(noise_power_dbm(-174.0, 10e6).unwrap(), -104.0);
        assert_eq!(noise_power_dbm(-174.0, 1.0).unwrap(), -174.0);
        let w = noise_power(-174.0, 10e6).unwrap();
        assert!((w - 3.981e-14).abs() / 3.981e-14 < 1e-3);
        let doubled = watts_to_dbm(noise_power(-174.0, 2e6).unwrap()) - watts_to_dbm(noise_power(-174.0, 1e6).unwrap());
        assert!((doubled - 3.0103).abs() < 1e-4);
        assert!(matches!(noise_power(-174.0, 0.0), Err(Error::Domain(_))));
    }
}
