//! Building thermal physics: envelope geometry, PMV comfort index and the
//! discretized heat balance that ties heating power to indoor temperature.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneKind {
    Residential,
    Public,
}

impl fmt::Display for ZoneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoneKind::Residential => "residential",
            ZoneKind::Public => "public",
        })
    }
}

/// One aggregate heated zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingZone {
    pub kind: ZoneKind,
    pub surface_area_m2: f64,
    pub volume_m3: f64,
    pub loss_coeff_w_per_m2k: f64,
    #[serde(default = "default_air_specific_heat")]
    pub air_specific_heat_j_per_kgk: f64,
    #[serde(default = "default_air_density")]
    pub air_density_kg_per_m3: f64,
    #[serde(default = "default_skin_temp")]
    pub skin_temp_c: f64,
    #[serde(default = "default_metabolic_rate")]
    pub metabolic_rate_w_per_m2: f64,
    #[serde(default = "default_clothing")]
    pub clothing_insulation: f64,
    #[serde(default = "default_duty_min")]
    pub duty_min_temp_c: f64,
    pub initial_temp_c: f64,
}

fn default_air_specific_heat() -> f64 {
    1005.0
}
fn default_air_density() -> f64 {
    1.2
}
fn default_skin_temp() -> f64 {
    33.5
}
fn default_metabolic_rate() -> f64 {
    80.0
}
fn default_clothing() -> f64 {
    0.12
}
fn default_duty_min() -> f64 {
    5.0
}

impl BuildingZone {
    /// Zone with default air and comfort parameters, starting at the PMV-0 temperature.
    pub fn new(kind: ZoneKind, surface_area_m2: f64, volume_m3: f64, loss_coeff: f64) -> Self {
        let mut z = BuildingZone {
            kind,
            surface_area_m2,
            volume_m3,
            loss_coeff_w_per_m2k: loss_coeff,
            air_specific_heat_j_per_kgk: default_air_specific_heat(),
            air_density_kg_per_m3: default_air_density(),
            skin_temp_c: default_skin_temp(),
            metabolic_rate_w_per_m2: default_metabolic_rate(),
            clothing_insulation: default_clothing(),
            duty_min_temp_c: default_duty_min(),
            initial_temp_c: 0.0,
        };
        z.initial_temp_c = temp_from_pmv(0.0, &z);
        z
    }

    /// Thermal capacitance of the zone air, J/K.
    pub fn capacitance(&self) -> f64 {
        self.air_specific_heat_j_per_kgk * self.air_density_kg_per_m3 * self.volume_m3
    }

    /// Envelope loss conductance, W/K.
    pub fn loss_conductance(&self) -> f64 {
        self.loss_coeff_w_per_m2k * self.surface_area_m2
    }

    /// Copy with geometry multiplied by `factor`, keeping the body coefficient.
    pub fn scaled(&self, factor: f64) -> Self {
        BuildingZone {
            surface_area_m2: self.surface_area_m2 * factor,
            volume_m3: self.volume_m3 * factor,
            ..self.clone()
        }
    }

    /// Invariant violations as `(field, message)` pairs.
    pub fn check(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let fields = [
            ("surface_area_m2", self.surface_area_m2),
            ("volume_m3", self.volume_m3),
            ("air_specific_heat_j_per_kgk", self.air_specific_heat_j_per_kgk),
            ("air_density_kg_per_m3", self.air_density_kg_per_m3),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                out.push((name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.loss_coeff_w_per_m2k.is_finite() && self.loss_coeff_w_per_m2k >= 0.0) {
            out.push((
                "loss_coeff_w_per_m2k",
                format!("must be non-negative, got {}", self.loss_coeff_w_per_m2k),
            ));
        }
        let scalars = [
            ("skin_temp_c", self.skin_temp_c),
            ("metabolic_rate_w_per_m2", self.metabolic_rate_w_per_m2),
            ("clothing_insulation", self.clothing_insulation),
            ("duty_min_temp_c", self.duty_min_temp_c),
            ("initial_temp_c", self.initial_temp_c),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                out.push((name, format!("must be finite, got {v}")));
            }
        }
        if pmv_scale(self) == 0.0 {
            out.push((
                "metabolic_rate_w_per_m2",
                "metabolic_rate * (clothing_insulation + 0.1) must be non-zero".to_string(),
            ));
        }
        out
    }
}

/// Hour-of-day rules for comfort bands, expressed as PMV pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComfortPolicy {
    pub working_hours: BTreeSet<usize>,
    pub pmv_band_working: (f64, f64),
    pub pmv_band_offhours: (f64, f64),
    pub pmv_band_public: (f64, f64),
}

impl Default for ComfortPolicy {
    fn default() -> Self {
        ComfortPolicy {
            working_hours: (8..=21).collect(),
            pmv_band_working: (-1.0, 1.0),
            pmv_band_offhours: (-0.5, 0.5),
            pmv_band_public: (-0.5, 0.5),
        }
    }
}

impl ComfortPolicy {
    pub fn check(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let bands = [
            ("pmv_band_working", self.pmv_band_working),
            ("pmv_band_offhours", self.pmv_band_offhours),
            ("pmv_band_public", self.pmv_band_public),
        ];
        for (name, (lo, hi)) in bands {
            if !(lo <= hi && lo >= -3.0 && hi <= 3.0) {
                out.push((name, format!("band ({lo}, {hi}) must satisfy -3 <= lo <= hi <= 3")));
            }
        }
        if let Some(h) = self.working_hours.iter().find(|&&h| h > 23) {
            out.push(("working_hours", format!("hour {h} is outside 0..=23")));
        }
        out
    }
}

/// Operating modes compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    /// Residential time-segmented schedule, public comfort band all day.
    M1,
    /// Both zones held at the PMV-0 temperature.
    M2,
    /// Residential schedule, public fixed at PMV 0.
    M3,
    /// Residential fixed at PMV 0, public comfort band all day.
    M4,
    /// Residential schedule, public band in working hours and duty temperature otherwise.
    M5,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::M1, Mode::M2, Mode::M3, Mode::M4, Mode::M5];

    pub fn index(self) -> u8 {
        self as u8 + 1
    }
}

impl TryFrom<u8> for Mode {
    type Error = CoreError;

    fn try_from(v: u8) -> Result<Mode> {
        match v {
            1..=5 => Ok(Mode::ALL[v as usize - 1]),
            _ => Err(CoreError::Config(format!("unknown mode {v}, expected 1..=5"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempBand {
    pub t_min_c: f64,
    pub t_max_c: f64,
    pub fixed: bool,
}

impl TempBand {
    fn range(t_min_c: f64, t_max_c: f64) -> Self {
        TempBand {
            t_min_c,
            t_max_c,
            fixed: false,
        }
    }

    fn fixed(t: f64) -> Self {
        TempBand {
            t_min_c: t,
            t_max_c: t,
            fixed: true,
        }
    }

    pub fn contains(&self, t: f64, tol: f64) -> bool {
        t >= self.t_min_c - tol && t <= self.t_max_c + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TempBandSchedule {
    pub bands: Vec<TempBand>,
}

impl TempBandSchedule {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

/// Surface-to-volume ratio S/V in 1/m.
pub fn body_coefficient(surface_area_m2: f64, volume_m3: f64) -> Result<f64> {
    if !(surface_area_m2 > 0.0 && volume_m3 > 0.0) {
        return Err(CoreError::Domain(format!(
            "body coefficient needs positive area and volume, got {surface_area_m2} and {volume_m3}"
        )));
    }
    Ok(surface_area_m2 / volume_m3)
}

fn pmv_scale(zone: &BuildingZone) -> f64 {
    zone.metabolic_rate_w_per_m2 * (zone.clothing_insulation + 0.1)
}

/// Predicted mean vote for an indoor temperature, ignoring airspeed and humidity.
pub fn pmv(indoor_temp_c: f64, zone: &BuildingZone) -> Result<f64> {
    let scale = pmv_scale(zone);
    if scale == 0.0 || !scale.is_finite() {
        return Err(CoreError::Singular(format!(
            "metabolic_rate * (clothing_insulation + 0.1) = {scale}"
        )));
    }
    Ok(2.43 - 3.76 * (zone.skin_temp_c - indoor_temp_c) / scale)
}

/// Indoor temperature at which [`pmv`] equals `pmv_value`.
pub fn temp_from_pmv(pmv_value: f64, zone: &BuildingZone) -> f64 {
    zone.skin_temp_c - (2.43 - pmv_value) * pmv_scale(zone) / 3.76
}

/// Per-hour temperature bands of a zone under `mode`.
///
/// Hour `t` of the horizon is hour-of-day `(start_hour + t) % 24`.
pub fn comfort_band_schedule(
    zone: &BuildingZone,
    policy: &ComfortPolicy,
    mode: Mode,
    horizon: usize,
    start_hour: usize,
) -> Result<TempBandSchedule> {
    if horizon == 0 {
        return Err(CoreError::Config("horizon must be at least one hour".into()));
    }
    let band = |(lo, hi): (f64, f64)| TempBand::range(temp_from_pmv(lo, zone), temp_from_pmv(hi, zone));
    let neutral = TempBand::fixed(temp_from_pmv(0.0, zone));
    let residential_schedule = |working: bool| {
        if working {
            band(policy.pmv_band_working)
        } else {
            band(policy.pmv_band_offhours)
        }
    };
    let bands = (0..horizon)
        .map(|t| {
            let working = policy.working_hours.contains(&((start_hour + t) % 24));
            match (zone.kind, mode) {
                (_, Mode::M2) => neutral,
                (ZoneKind::Residential, Mode::M4) => neutral,
                (ZoneKind::Residential, _) => residential_schedule(working),
                (ZoneKind::Public, Mode::M3) => neutral,
                (ZoneKind::Public, Mode::M1 | Mode::M4) => band(policy.pmv_band_public),
                (ZoneKind::Public, Mode::M5) => {
                    if working {
                        band(policy.pmv_band_public)
                    } else {
                        TempBand::range(
                            zone.duty_min_temp_c,
                            temp_from_pmv(policy.pmv_band_public.1, zone),
                        )
                    }
                }
            }
        })
        .collect::<Vec<_>>();
    if let Some((t, b)) = bands.iter().enumerate().find(|(_, b)| b.t_min_c > b.t_max_c) {
        return Err(CoreError::Config(format!(
            "{} zone has an empty band at hour {t}: [{}, {}]",
            zone.kind, b.t_min_c, b.t_max_c
        )));
    }
    Ok(TempBandSchedule { bands })
}

/// Heating power in W that moves the zone from `t_in_now_c` to `t_in_next_c` over `dt_s`.
pub fn heat_power_for_transition(
    t_in_now_c: f64,
    t_in_next_c: f64,
    t_out_now_c: f64,
    zone: &BuildingZone,
    dt_s: f64,
) -> f64 {
    zone.capacitance() * (t_in_next_c - t_in_now_c) / dt_s
        + zone.loss_conductance() * (t_in_now_c - t_out_now_c)
}

/// Heating power in W that holds the zone at the PMV-0 temperature every hour.
pub fn comfort_reference_loads(zone: &BuildingZone, outdoor_c: &[f64], dt_s: f64) -> Vec<f64> {
    let t_ref = temp_from_pmv(0.0, zone);
    outdoor_c
        .iter()
        .map(|&t_out| heat_power_for_transition(t_ref, t_ref, t_out, zone, dt_s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zone(kind: ZoneKind) -> BuildingZone {
        BuildingZone::new(kind, 400.0, 1000.0, 0.25)
    }

    // closed-form inversion evaluated independently of temp_from_pmv
    fn inverse_by_hand(v: f64) -> f64 {
        33.5 - (2.43 - v) * 80.0 * 0.22 / 3.76
    }

    #[test]
    fn body_coefficients() {
        assert_eq!(body_coefficient(200.0, 1000.0).unwrap(), 0.2);
        assert_eq!(body_coefficient(400.0, 1000.0).unwrap(), 0.4);
        assert_eq!(body_coefficient(37.5, 37.5).unwrap(), 1.0);
        assert!(body_coefficient(0.0, 10.0).is_err());
        assert!(body_coefficient(10.0, -1.0).is_err());
    }

    #[test]
    fn pmv_reference_points() {
        let z = zone(ZoneKind::Residential);
        assert_eq!(pmv(33.5, &z).unwrap(), 2.43);
        assert!(pmv(inverse_by_hand(0.0), &z).unwrap().abs() <= 1e-9);
        assert!((inverse_by_hand(0.0) - 22.1255).abs() < 1e-4);
        assert!(pmv(20.0, &z).unwrap() < pmv(21.0, &z).unwrap());
        let mut bad = z.clone();
        bad.clothing_insulation = -0.1;
        assert!(matches!(pmv(20.0, &bad), Err(CoreError::Singular(_))));
    }

    #[test]
    fn inversion_values() {
        let z = zone(ZoneKind::Public);
        assert_eq!(temp_from_pmv(2.43, &z), 33.5);
        assert!((temp_from_pmv(-1.0, &z) - 17.4447).abs() < 1e-3);
        assert!((temp_from_pmv(0.5, &z) - 24.4660).abs() < 1e-3);
        for v in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            assert!((temp_from_pmv(v, &z) - inverse_by_hand(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_two_is_fixed_neutral() {
        let z = zone(ZoneKind::Residential);
        let s = comfort_band_schedule(&z, &ComfortPolicy::default(), Mode::M2, 24, 0).unwrap();
        assert_eq!(s.len(), 24);
        for b in &s.bands {
            assert!(b.fixed);
            assert!((b.t_min_c - 22.126).abs() < 1e-3);
            assert_eq!(b.t_min_c, b.t_max_c);
        }
    }

    #[test]
    fn mode_five_residential_schedule() {
        let z = zone(ZoneKind::Residential);
        let s = comfort_band_schedule(&z, &ComfortPolicy::default(), Mode::M5, 24, 0).unwrap();
        for (h, b) in s.bands.iter().enumerate() {
            if (8..=21).contains(&h) {
                assert!((b.t_min_c - 17.45).abs() < 0.01 && (b.t_max_c - 26.81).abs() < 0.01);
            } else {
                assert!((b.t_min_c - 19.79).abs() < 0.01 && (b.t_max_c - 24.47).abs() < 0.01);
            }
        }
    }

    #[test]
    fn mode_five_public_duty_temperature() {
        let z = zone(ZoneKind::Public);
        let s = comfort_band_schedule(&z, &ComfortPolicy::default(), Mode::M5, 24, 0).unwrap();
        for (h, b) in s.bands.iter().enumerate() {
            if (8..=21).contains(&h) {
                assert!((b.t_min_c - 19.79).abs() < 0.01);
            } else {
                assert_eq!(b.t_min_c, 5.0);
                assert!((b.t_max_c - 24.47).abs() < 0.01);
            }
        }
    }

    #[test]
    fn mode_table_and_start_hour() {
        let policy = ComfortPolicy::default();
        let r = zone(ZoneKind::Residential);
        let p = zone(ZoneKind::Public);
        let neutral = temp_from_pmv(0.0, &r);
        let m3 = comfort_band_schedule(&p, &policy, Mode::M3, 24, 0).unwrap();
        assert!(m3.bands.iter().all(|b| b.fixed && b.t_min_c == neutral));
        let m4 = comfort_band_schedule(&r, &policy, Mode::M4, 24, 0).unwrap();
        assert!(m4.bands.iter().all(|b| b.fixed));
        let m1 = comfort_band_schedule(&p, &policy, Mode::M1, 24, 0).unwrap();
        assert!(m1.bands.iter().all(|b| !b.fixed && b.t_min_c > 19.7));
        // horizon starting at 07:00: second hour is a working hour
        let s = comfort_band_schedule(&r, &policy, Mode::M5, 2, 7).unwrap();
        assert!(s.bands[0].t_min_c > 19.7 && s.bands[1].t_min_c < 17.5);
        assert!(Mode::try_from(0).is_err() && Mode::try_from(6).is_err());
        assert_eq!(Mode::try_from(3).unwrap(), Mode::M3);
    }

    #[test]
    fn empty_band_is_rejected() {
        let mut p = zone(ZoneKind::Public);
        p.duty_min_temp_c = 30.0;
        assert!(comfort_band_schedule(&p, &ComfortPolicy::default(), Mode::M5, 24, 0).is_err());
        assert!(comfort_band_schedule(&p, &ComfortPolicy::default(), Mode::M1, 0, 0).is_err());
    }

    #[test]
    fn euler_step_values() {
        let mut z = zone(ZoneKind::Residential);
        z.surface_area_m2 = 400.0;
        z.loss_coeff_w_per_m2k = 0.25;
        assert_eq!(z.loss_conductance(), 100.0);
        assert_eq!(heat_power_for_transition(20.0, 20.0, 0.0, &z, 3600.0), 2000.0);
        assert!((z.capacitance() - 1.206e6).abs() < 1e-6);
        let h = heat_power_for_transition(20.0, 21.0, 0.0, &z, 3600.0);
        assert!((h - 2335.0).abs() < 1e-9, "{h}");
        z.loss_coeff_w_per_m2k = 0.0;
        assert_eq!(heat_power_for_transition(20.0, 20.0, -5.0, &z, 3600.0), 0.0);
    }

    #[test]
    fn reference_loads() {
        let z = zone(ZoneKind::Residential);
        let t_ref = inverse_by_hand(0.0);
        let h = comfort_reference_loads(&z, &[0.0; 5], 3600.0);
        for v in &h {
            assert!((v - 100.0 * t_ref).abs() < 1e-6);
            assert!((v - 2212.6).abs() < 0.1);
        }
        let zero = comfort_reference_loads(&z, &[temp_from_pmv(0.0, &z); 3], 3600.0);
        assert!(zero.iter().all(|&v| v == 0.0));
        let h = comfort_reference_loads(&z, &[-10.0, -5.0, 0.0, 5.0], 3600.0);
        assert!(h.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn scaling_keeps_body_coefficient() {
        let z = zone(ZoneKind::Public);
        let s = z.scaled(3.0);
        assert!((body_coefficient(s.surface_area_m2, s.volume_m3).unwrap() - 0.4).abs() < 1e-15);
        assert!((s.loss_conductance() - 3.0 * z.loss_conductance()).abs() < 1e-9);
    }
}
