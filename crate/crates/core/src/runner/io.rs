//! Scenario files: a TOML document with named sections plus `hour,value`
//! CSV profiles referenced by relative path.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::devices::{
    validate_scenario, ChpUnit, ConUnit, ElectricBoiler, PriceSpec, Renewable, RenewableKind, Scenario, Storage,
};
use crate::error::{CoreError, Result};
use crate::thermal::{BuildingZone, ComfortPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Header,
    profiles: Profiles,
    #[serde(default)]
    comfort: ComfortPolicy,
    zones: Zones,
    prices: Prices,
    #[serde(default)]
    chp: Vec<ChpUnit>,
    #[serde(default)]
    con: Vec<ConUnit>,
    #[serde(default)]
    storage: Vec<Storage>,
    #[serde(default)]
    boiler: Vec<ElectricBoiler>,
    #[serde(default)]
    renewable: Vec<RenewableEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    horizon: usize,
    #[serde(default = "default_dt")]
    dt_s: f64,
    #[serde(default)]
    start_hour: usize,
    #[serde(default = "default_share")]
    residential_share: f64,
    comfort_penalty: f64,
    #[serde(default)]
    shift_max_kw: f64,
    #[serde(default = "default_reserve")]
    reserve_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    price_mean_tolerance: Option<f64>,
}

fn default_dt() -> f64 {
    3600.0
}
fn default_share() -> f64 {
    0.5
}
fn default_reserve() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Profiles {
    outdoor_temp_c: String,
    electric_load_kw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cut_max_kw: Option<String>,
    /// Used when no `cut_max_kw` file is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cut_max_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Zones {
    residential: BuildingZone,
    public: BuildingZone,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Prices {
    electric: PriceSpec,
    heat: PriceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RenewableEntry {
    kind: RenewableKind,
    profile: String,
    curtail_penalty: f64,
}

/// Reads a `hour,value` CSV; hours must run `0..n` in order.
pub fn read_profile(path: &Path) -> Result<Vec<f64>> {
    let parse_err = |message: String| CoreError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => CoreError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "hour" || &headers[1] != "value" {
        return Err(parse_err(format!("expected header `hour,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let line = i + 2;
        let hour: usize = record[0]
            .parse()
            .map_err(|_| parse_err(format!("line {line}: bad hour `{}`", &record[0])))?;
        if hour != i {
            return Err(parse_err(format!("line {line}: expected hour {i}, found {hour}")));
        }
        let v: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("line {line}: bad value `{}`", &record[1])))?;
        values.push(v);
    }
    Ok(values)
}

pub fn write_profile(path: &Path, values: &[f64]) -> Result<()> {
    let mut text = String::from("hour,value\n");
    for (h, v) in values.iter().enumerate() {
        text.push_str(&format!("{h},{v}\n"));
    }
    write_file(path, &text)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a scenario file and its profiles, then validates it. Every
/// violation is reported, not only the first.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let scenario = parse_scenario(path)?;
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        return Err(CoreError::Validation(violations));
    }
    Ok(scenario)
}

/// Parses without validating.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| CoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| CoreError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let t_len = file.scenario.horizon;
    let profile = |rel: &str| -> Result<Vec<f64>> {
        let p = dir.join(rel);
        let v = read_profile(&p)?;
        if v.len() != t_len {
            return Err(CoreError::Shape(format!(
                "{}: {} rows for a horizon of {t_len}",
                p.display(),
                v.len()
            )));
        }
        Ok(v)
    };
    let outdoor = profile(&file.profiles.outdoor_temp_c)?;
    let load = profile(&file.profiles.electric_load_kw)?;
    let cut = match (&file.profiles.cut_max_kw, file.profiles.cut_max_fraction) {
        (Some(p), _) => profile(p)?,
        (None, f) => load.iter().map(|l| l * f.unwrap_or(0.0)).collect(),
    };
    let mut renewables = Vec::with_capacity(file.renewable.len());
    for r in &file.renewable {
        renewables.push(Renewable {
            kind: r.kind,
            availability_kw: profile(&r.profile)?,
            curtail_penalty: r.curtail_penalty,
        });
    }
    let h = file.scenario;
    Ok(Scenario {
        name: h.name,
        horizon: h.horizon,
        dt_s: h.dt_s,
        start_hour: h.start_hour,
        outdoor_temp_c: outdoor,
        base_electric_load_kw: load,
        residential: file.zones.residential,
        public: file.zones.public,
        comfort: file.comfort,
        residential_share: h.residential_share,
        chp: file.chp,
        con: file.con,
        storage: file.storage,
        boilers: file.boiler,
        renewables,
        electric_price: file.prices.electric,
        heat_price: file.prices.heat,
        comfort_penalty: h.comfort_penalty,
        cut_max_kw: cut,
        shift_max_kw: h.shift_max_kw,
        reserve_fraction: h.reserve_fraction,
        price_mean_tolerance: h.price_mean_tolerance,
    })
}

fn renewable_file(kind: RenewableKind, index: usize, count: usize) -> String {
    let base = match kind {
        RenewableKind::Wind => "wind_avail_kW",
        RenewableKind::Pv => "pv_avail_kW",
    };
    if count > 1 {
        format!("{base}_{index}.csv")
    } else {
        format!("{base}.csv")
    }
}

/// Writes `file_name` and its profile CSVs into `dir`; returns every path written.
pub fn save_scenario(scenario: &Scenario, dir: &Path, file_name: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| CoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let mut emit = |name: &str, values: &[f64]| -> Result<String> {
        let p = dir.join(name);
        write_profile(&p, values)?;
        written.push(p);
        Ok(name.to_string())
    };
    let outdoor = emit("outdoor_temp_C.csv", &scenario.outdoor_temp_c)?;
    let load = emit("electric_load_kW.csv", &scenario.base_electric_load_kw)?;
    let cut = emit("cut_max_kW.csv", &scenario.cut_max_kw)?;
    let mut renewable = Vec::new();
    for (k, r) in scenario.renewables.iter().enumerate() {
        let same_kind = scenario.renewables.iter().filter(|o| o.kind == r.kind).count();
        let index = scenario.renewables[..k].iter().filter(|o| o.kind == r.kind).count();
        let profile = emit(&renewable_file(r.kind, index, same_kind), &r.availability_kw)?;
        renewable.push(RenewableEntry {
            kind: r.kind,
            profile,
            curtail_penalty: r.curtail_penalty,
        });
    }
    let file = ScenarioFile {
        scenario: Header {
            name: scenario.name.clone(),
            horizon: scenario.horizon,
            dt_s: scenario.dt_s,
            start_hour: scenario.start_hour,
            residential_share: scenario.residential_share,
            comfort_penalty: scenario.comfort_penalty,
            shift_max_kw: scenario.shift_max_kw,
            reserve_fraction: scenario.reserve_fraction,
            price_mean_tolerance: scenario.price_mean_tolerance,
        },
        profiles: Profiles {
            outdoor_temp_c: outdoor,
            electric_load_kw: load,
            cut_max_kw: Some(cut),
            cut_max_fraction: None,
        },
        comfort: scenario.comfort.clone(),
        zones: Zones {
            residential: scenario.residential.clone(),
            public: scenario.public.clone(),
        },
        prices: Prices {
            electric: scenario.electric_price.clone(),
            heat: scenario.heat_price.clone(),
        },
        chp: scenario.chp.clone(),
        con: scenario.con.clone(),
        storage: scenario.storage.clone(),
        boiler: scenario.boilers.clone(),
        renewable,
    };
    let text = toml::to_string(&file).map_err(|e| CoreError::Parse {
        path: dir.join(file_name),
        message: e.to_string(),
    })?;
    let p = dir.join(file_name);
    write_file(&p, &text)?;
    written.push(p);
    Ok(written)
}
