//! Seeded synthetic winter-day scenarios.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::devices::{
    ChpUnit, ConUnit, ElectricBoiler, PriceSpec, Renewable, RenewableKind, Scenario, Storage, StorageKind,
};
use crate::thermal::{comfort_reference_loads, BuildingZone, ComfortPolicy, ZoneKind};

/// Size and fleet of a generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GenProfile {
    pub horizon: usize,
    pub start_hour: usize,
    pub chp: usize,
    pub con: usize,
    pub electric_storage: bool,
    pub thermal_storage: bool,
    pub boiler: bool,
    pub wind: bool,
    pub pv: bool,
    pub tiers: usize,
    /// Multiplies zone sizes, loads and unit capacities.
    pub scale: f64,
}

impl GenProfile {
    /// Full day: two CHP units, one conventional unit, both storages, a
    /// boiler, wind and PV, three price tiers.
    pub fn day() -> Self {
        GenProfile {
            horizon: 24,
            start_hour: 0,
            chp: 2,
            con: 1,
            electric_storage: true,
            thermal_storage: true,
            boiler: true,
            wind: true,
            pv: true,
            tiers: 3,
            scale: 1.0,
        }
    }

    /// A few hours with one CHP and one conventional unit, small enough for
    /// brute-force enumeration of prices.
    pub fn tiny(horizon: usize, tiers: usize, start_hour: usize) -> Self {
        GenProfile {
            horizon,
            start_hour,
            chp: 1,
            con: 1,
            electric_storage: false,
            thermal_storage: false,
            boiler: false,
            wind: false,
            pv: false,
            tiers,
            scale: 0.1,
        }
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    let r = (v * f).round() / f;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Deterministic scenario for `seed`. Hour `t` of the horizon is clock hour
/// `(start_hour + t) % 24`.
pub fn generate_scenario(seed: u64, profile: &GenProfile) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_len = profile.horizon;
    let s = profile.scale;
    let clock = |t: usize| ((profile.start_hour + t) % 24) as f64;
    let mut noise = |amp: f64| rng.gen_range(-amp..=amp);

    // coldest around 05:00
    let outdoor: Vec<f64> = (0..t_len)
        .map(|t| round_to(-7.0 - 5.0 * (2.0 * PI * (clock(t) - 5.0) / 24.0).cos() + noise(0.4), 2))
        .collect();
    // morning and evening peaks
    let load: Vec<f64> = (0..t_len)
        .map(|t| {
            let h = clock(t);
            let bump = |c: f64, w: f64| (-(h - c).powi(2) / (2.0 * w * w)).exp();
            let shape = 0.62 + 0.28 * bump(9.0, 2.0) + 0.38 * bump(19.0, 2.5) + 0.12 * bump(14.0, 3.0);
            round_to(3000.0 * s * shape * (1.0 + noise(0.03)), 1)
        })
        .collect();
    let cut: Vec<f64> = load.iter().map(|l| round_to(0.05 * l, 1)).collect();
    // windier at night
    let wind: Vec<f64> = (0..t_len)
        .map(|t| {
            let base = 0.55 + 0.3 * (2.0 * PI * (clock(t) - 3.0) / 24.0).cos();
            round_to((700.0 * s * base * (1.0 + noise(0.15))).max(0.0), 1)
        })
        .collect();
    let pv: Vec<f64> = (0..t_len)
        .map(|t| {
            let h = clock(t);
            if (6.0..20.0).contains(&h) {
                let x = (PI * (h - 6.0) / 14.0).sin().max(0.0);
                round_to(500.0 * s * x * x * (1.0 + noise(0.1)).max(0.0), 1)
            } else {
                0.0
            }
        })
        .collect();

    let mut residential = BuildingZone::new(ZoneKind::Residential, 60_000.0 * s, 150_000.0 * s, 0.6);
    let mut public = BuildingZone::new(ZoneKind::Public, 60_000.0 * s, 300_000.0 * s, 0.6);
    residential.surface_area_m2 = round_to(residential.surface_area_m2, 3);
    residential.volume_m3 = round_to(residential.volume_m3, 3);
    public.surface_area_m2 = round_to(public.surface_area_m2, 3);
    public.volume_m3 = round_to(public.volume_m3, 3);

    let mean_heat: f64 = [&residential, &public]
        .iter()
        .map(|z| comfort_reference_loads(z, &outdoor, 3600.0).iter().sum::<f64>() / 1000.0)
        .sum::<f64>()
        / t_len as f64;

    let chp_templates = [
        ChpUnit {
            cost_a: 4e-5,
            cost_b: 0.18,
            cost_c: 20.0,
            cv_ratio: 0.15,
            p_min_kw: 200.0,
            p_max_kw: 1200.0,
            h_min_kw: 0.0,
            h_max_kw: 1400.0,
            ramp_kw_per_h: Some(500.0),
            reserve_cost: 0.01,
        },
        ChpUnit {
            cost_a: 6e-5,
            cost_b: 0.2,
            cost_c: 15.0,
            cv_ratio: 0.18,
            p_min_kw: 100.0,
            p_max_kw: 800.0,
            h_min_kw: 0.0,
            h_max_kw: 1000.0,
            ramp_kw_per_h: Some(400.0),
            reserve_cost: 0.012,
        },
    ];
    let chp = (0..profile.chp)
        .map(|n| {
            let mut u = chp_templates[n % 2].clone();
            u.cost_a /= s;
            u.cost_c *= s;
            for v in [&mut u.p_min_kw, &mut u.p_max_kw, &mut u.h_min_kw, &mut u.h_max_kw] {
                *v *= s;
            }
            u.ramp_kw_per_h = u.ramp_kw_per_h.map(|r| r * s);
            if profile.chp == 1 {
                // a lone unit has to cover the whole heat demand
                u.h_max_kw *= 2.0;
            }
            u
        })
        .collect();
    // with a single CHP the conventional units carry the evening peak
    let con_max = if profile.chp >= 2 { 2000.0 } else { 3000.0 };
    let con = (0..profile.con)
        .map(|_| ConUnit {
            cost_a: 5e-5 / s,
            cost_b: 0.3,
            cost_c: 10.0 * s,
            p_min_kw: 0.0,
            p_max_kw: con_max * s,
            ramp_kw_per_h: None,
            reserve_cost: 0.015,
        })
        .collect();
    let mut storage = Vec::new();
    if profile.electric_storage {
        storage.push(Storage {
            kind: StorageKind::Electric,
            capacity_kwh: 800.0 * s,
            p_charge_max_kw: 200.0 * s,
            p_discharge_max_kw: 200.0 * s,
            eta_charge: 0.95,
            eta_discharge: 0.95,
            soc_init_kwh: 400.0 * s,
            soc_min_kwh: 80.0 * s,
            soc_max_kwh: 760.0 * s,
            cycling_cost: 0.005,
            reserve_cost: 0.008,
        });
    }
    if profile.thermal_storage {
        storage.push(Storage {
            kind: StorageKind::Thermal,
            capacity_kwh: 1500.0 * s,
            p_charge_max_kw: 400.0 * s,
            p_discharge_max_kw: 400.0 * s,
            eta_charge: 0.92,
            eta_discharge: 0.92,
            soc_init_kwh: 600.0 * s,
            soc_min_kwh: 100.0 * s,
            soc_max_kwh: 1400.0 * s,
            cycling_cost: 0.003,
            reserve_cost: 0.0,
        });
    }
    let boilers = if profile.boiler {
        vec![ElectricBoiler {
            p_max_kw: 600.0 * s,
            eta_eb: 0.98,
        }]
    } else {
        Vec::new()
    };
    let mut renewables = Vec::new();
    if profile.wind {
        renewables.push(Renewable {
            kind: RenewableKind::Wind,
            availability_kw: wind,
            curtail_penalty: 0.05,
        });
    }
    if profile.pv {
        renewables.push(Renewable {
            kind: RenewableKind::Pv,
            availability_kw: pv,
            curtail_penalty: 0.05,
        });
    }

    let tiers = profile.tiers;
    let price = |min: f64, max: f64, mean: f64| {
        let mut spec = PriceSpec { min, max, mean, tiers };
        let eps = spec.mean_tolerance(None, t_len);
        if !spec.mean_reachable(t_len, eps) {
            // snap to the nearest mean some tier sequence attains
            let units = ((mean - min) * t_len as f64 / spec.step()).round();
            spec.mean = round_to(min + units * spec.step() / t_len as f64, 9);
        }
        spec
    };
    Scenario {
        name: format!("synthetic-{seed}"),
        horizon: t_len,
        dt_s: 3600.0,
        start_hour: profile.start_hour,
        outdoor_temp_c: outdoor,
        base_electric_load_kw: load,
        residential,
        public,
        comfort: ComfortPolicy::default(),
        residential_share: 0.5,
        chp,
        con,
        storage,
        boilers,
        renewables,
        electric_price: price(0.35, 0.85, 0.6),
        heat_price: price(0.2, 0.5, 0.35),
        comfort_penalty: round_to(1.0 / mean_heat, 9),
        cut_max_kw: cut,
        shift_max_kw: round_to(200.0 * s, 3),
        reserve_fraction: 0.05,
        price_mean_tolerance: None,
    }
}
