//! Flat `key = value` experiment configuration.
//!
//! Entries are separated by newlines or `;`, and `#` starts a comment. Keys
//! not given keep their defaults. Any key can also be overridden through an
//! environment variable named `WPMEC_<KEY>` (upper case).

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use wpmec_core::{ApParams, DeviceParams, FadingParams, Policy, RepairRule, RunOptions, SystemParams, WeightScaling};

pub const ENV_PREFIX: &str = "WPMEC_";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// File name or `environment`.
    pub origin: String,
    /// 1-based line; 0 when the error is not tied to a line.
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}: {}", self.origin, self.line, self.msg)
        } else {
            write!(f, "{}: {}", self.origin, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Penalty,
    ArrivalScale,
    NumAps,
    NumDevices,
    Placeholders,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Penalty => "V",
            SweepAxis::ArrivalScale => "arrival_scale",
            SweepAxis::NumAps => "M",
            SweepAxis::NumDevices => "N",
            SweepAxis::Placeholders => "placeholders",
        }
    }

    fn parse(s: &str) -> Option<SweepAxis> {
        Some(match s.to_ascii_lowercase().as_str() {
            "v" | "penalty" => SweepAxis::Penalty,
            "arrival_scale" => SweepAxis::ArrivalScale,
            "m" | "num_aps" => SweepAxis::NumAps,
            "n" | "num_devices" => SweepAxis::NumDevices,
            "placeholders" => SweepAxis::Placeholders,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Fully resolved experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub sys: SystemParams,
    pub device: DeviceParams,
    pub ap: ApParams,
    pub fading: FadingParams,
    pub area_side: f64,
    /// Multiplies both ends of the arrival range.
    pub arrival_scale: f64,
    pub warmup: usize,
    pub decimation: usize,
    pub divergence_ratio: f64,
    pub battery_series: bool,
    pub write_series: bool,
    pub policies: Vec<Policy>,
    pub sweep: Option<Sweep>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Worker threads; 0 picks the available parallelism.
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sys: SystemParams::default(),
            device: DeviceParams::default(),
            ap: ApParams::default(),
            fading: FadingParams::default(),
            area_side: 10.0,
            arrival_scale: 1.0,
            warmup: 2000,
            decimation: 10,
            divergence_ratio: 3.0,
            battery_series: false,
            write_series: true,
            policies: Policy::ALL.to_vec(),
            sweep: None,
            seeds: (1..=10).collect(),
            output: PathBuf::from("results"),
            workers: 0,
        }
    }
}

fn num(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn count(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let out = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn positive(x: f64) -> Result<f64, String> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be > 0"))
    }
}

fn non_negative(x: f64) -> Result<f64, String> {
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be >= 0"))
    }
}

fn at_least_one(n: usize) -> Result<usize, String> {
    if n >= 1 {
        Ok(n)
    } else {
        Err("must be at least 1".into())
    }
}

fn open_unit(x: f64) -> Result<f64, String> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} must lie in (0, 1)"))
    }
}

impl Config {
    /// Apply one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "n" | "num_devices" => self.sys.num_devices = at_least_one(count(v)?)?,
            "m" | "num_aps" => self.sys.num_aps = at_least_one(count(v)?)?,
            "slot_len" => self.sys.slot_len = positive(num(v)?)?,
            "bandwidth" => self.sys.bandwidth = positive(num(v)?)?,
            "v" | "penalty" => self.sys.penalty = non_negative(num(v)?)?,
            "beta_q" => self.sys.beta_q = positive(num(v)?)?,
            "beta_b" => self.sys.beta_b = positive(num(v)?)?,
            "weight_scaling" => {
                self.sys.weight_scaling = match v.to_ascii_lowercase().as_str() {
                    "linear" => WeightScaling::Linear,
                    "squared" => WeightScaling::Squared,
                    _ => return Err(format!("unknown weight_scaling `{v}` (valid: linear, squared)")),
                }
            }
            "repair" => {
                self.sys.repair = match v.to_ascii_lowercase().as_str() {
                    "weighted" => RepairRule::Weighted,
                    "energy_balance" => RepairRule::EnergyBalance,
                    _ => return Err(format!("unknown repair `{v}` (valid: weighted, energy_balance)")),
                }
            }
            "ema_rate" => self.sys.ema_rate = open_unit(num(v)?)?,
            "placeholder_gain" => self.sys.placeholder_gain = non_negative(num(v)?)?,
            "placeholders" => self.sys.placeholders = flag(v)?,
            "horizon" => self.sys.horizon = count(v)?,
            "mu" => self.device.mu = open_unit(num(v)?)?,
            "kappa" => self.device.kappa = positive(num(v)?)?,
            "phi" => self.device.phi = positive(num(v)?)?,
            "nu" => {
                let x = num(v)?;
                if x <= 1.0 {
                    return Err(format!("{x} must be > 1"));
                }
                self.device.nu = x;
            }
            "f_max" => self.device.f_max = positive(num(v)?)?,
            "p_off_max" => self.device.p_off_max = non_negative(num(v)?)?,
            "b_max" => self.device.b_max = positive(num(v)?)?,
            "arrival_lo" => self.device.arrival_lo = non_negative(num(v)?)?,
            "arrival_hi" => self.device.arrival_hi = non_negative(num(v)?)?,
            "arrival_scale" => self.arrival_scale = non_negative(num(v)?)?,
            "p_wpt_max" => self.ap.p_wpt_max = non_negative(num(v)?)?,
            "noise" => self.ap.noise = positive(num(v)?)?,
            "eta" => self.ap.eta = non_negative(num(v)?)?,
            "theta_up" => self.fading.theta_up = positive(num(v)?)?,
            "theta_down" => self.fading.theta_down = positive(num(v)?)?,
            "pathloss_exp" => self.fading.pathloss_exp = positive(num(v)?)?,
            "area_side" => self.area_side = positive(num(v)?)?,
            "warmup" => self.warmup = count(v)?,
            "decimation" => self.decimation = at_least_one(count(v)?)?,
            "divergence_ratio" => self.divergence_ratio = positive(num(v)?)?,
            "battery_series" => self.battery_series = flag(v)?,
            "series" => self.write_series = flag(v)?,
            "policy" | "policies" => {
                self.policies = list(v, |s| s.parse::<Policy>().map_err(|e| e.to_string()))?;
            }
            "sweep" => {
                if v.eq_ignore_ascii_case("none") {
                    self.sweep = None;
                } else {
                    let axis = SweepAxis::parse(v)
                        .ok_or_else(|| format!("unknown sweep axis `{v}` (valid: V, arrival_scale, M, N, placeholders)"))?;
                    let values = self.sweep.take().map(|s| s.values).unwrap_or_default();
                    self.sweep = Some(Sweep { axis, values });
                }
            }
            "values" => {
                let values = list(v, num)?;
                match &mut self.sweep {
                    Some(s) => s.values = values,
                    None => return Err("`values` needs a preceding `sweep`".into()),
                }
            }
            "seeds" => self.seeds = list(v, |s| s.parse::<u64>().map_err(|_| format!("`{s}` is not a seed")))?,
            "output" => self.output = PathBuf::from(v),
            "workers" => self.workers = count(v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parse `text`, starting from the defaults.
    pub fn parse(text: &str, origin: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        for (ln, line) in text.lines().enumerate() {
            let err = |msg: String| ConfigError { origin: origin.to_string(), line: ln + 1, msg };
            let body = line.split('#').next().unwrap_or("");
            for entry in body.split(';') {
                if entry.trim().is_empty() {
                    continue;
                }
                let (key, value) = entry.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{}`", entry.trim())))?;
                cfg.set(key, value).map_err(|msg| err(format!("{}: {msg}", key.trim())))?;
            }
        }
        cfg.check().map_err(|msg| ConfigError { origin: origin.to_string(), line: 0, msg })?;
        Ok(cfg)
    }

    /// Apply `WPMEC_<KEY>` overrides from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        let err = |msg: String| ConfigError { origin: "environment".into(), line: 0, msg };
        let mut vars: Vec<(String, String)> =
            vars.into_iter().filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v))).collect();
        // `sweep` must precede `values`.
        vars.sort_by_key(|(k, _)| k != "sweep");
        for (key, value) in vars {
            self.set(&key, &value).map_err(|msg| err(format!("{ENV_PREFIX}{}: {msg}", key.to_ascii_uppercase())))?;
        }
        self.check().map_err(err)
    }

    /// Cross-key consistency checks.
    pub fn check(&self) -> Result<(), String> {
        if self.device.arrival_lo > self.device.arrival_hi {
            return Err("arrival_lo must not exceed arrival_hi".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(format!("sweep over {} has no values", s.axis.name()));
            }
            for &x in &s.values {
                let ok = match s.axis {
                    SweepAxis::Penalty | SweepAxis::ArrivalScale => x >= 0.0,
                    SweepAxis::NumAps | SweepAxis::NumDevices => x >= 1.0 && x.fract() == 0.0,
                    SweepAxis::Placeholders => x == 0.0 || x == 1.0,
                };
                if !ok {
                    return Err(format!("sweep value {x} is out of range for {}", s.axis.name()));
                }
            }
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err("seeds must be distinct".into());
        }
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            warmup: self.warmup,
            decimation: self.decimation,
            divergence_ratio: self.divergence_ratio,
            record_batteries: self.battery_series,
            fading: self.fading,
        }
    }

    /// Every key with its resolved value, in a form [`Config::parse`] reads back exactly.
    pub fn to_text(&self) -> String {
        let (s, d, a, f) = (&self.sys, &self.device, &self.ap, &self.fading);
        let join = |xs: Vec<String>| xs.join(",");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("num_devices", s.num_devices.to_string());
        put("num_aps", s.num_aps.to_string());
        put("slot_len", s.slot_len.to_string());
        put("bandwidth", s.bandwidth.to_string());
        put("penalty", s.penalty.to_string());
        put("beta_q", s.beta_q.to_string());
        put("beta_b", s.beta_b.to_string());
        put("weight_scaling", s.weight_scaling.name().to_string());
        put("repair", s.repair.name().to_string());
        put("ema_rate", s.ema_rate.to_string());
        put("placeholder_gain", s.placeholder_gain.to_string());
        put("placeholders", s.placeholders.to_string());
        put("horizon", s.horizon.to_string());
        put("mu", d.mu.to_string());
        put("kappa", d.kappa.to_string());
        put("phi", d.phi.to_string());
        put("nu", d.nu.to_string());
        put("f_max", d.f_max.to_string());
        put("p_off_max", d.p_off_max.to_string());
        put("b_max", d.b_max.to_string());
        put("arrival_lo", d.arrival_lo.to_string());
        put("arrival_hi", d.arrival_hi.to_string());
        put("arrival_scale", self.arrival_scale.to_string());
        put("p_wpt_max", a.p_wpt_max.to_string());
        put("noise", a.noise.to_string());
        put("eta", a.eta.to_string());
        put("theta_up", f.theta_up.to_string());
        put("theta_down", f.theta_down.to_string());
        put("pathloss_exp", f.pathloss_exp.to_string());
        put("area_side", self.area_side.to_string());
        put("warmup", self.warmup.to_string());
        put("decimation", self.decimation.to_string());
        put("divergence_ratio", self.divergence_ratio.to_string());
        put("battery_series", self.battery_series.to_string());
        put("series", self.write_series.to_string());
        put("policy", join(self.policies.iter().map(|p| p.name().to_string()).collect()));
        match &self.sweep {
            Some(sw) => {
                put("sweep", sw.axis.name().to_string());
                put("values", join(sw.values.iter().map(f64::to_string).collect()));
            }
            None => put("sweep", "none".to_string()),
        }
        put("seeds", join(self.seeds.iter().map(u64::to_string).collect()));
        put("output", self.output.display().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = Config::parse("", "t").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!((cfg.sys.num_devices, cfg.sys.num_aps), (30, 5));
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.policies.len(), 4);
    }

    #[test]
    fn sweep_and_comments() {
        let cfg = Config::parse("# fig 5\nsweep = V; values = 1e4,3e4,1e5  # three points\npolicy = proposed, lco\n", "t").unwrap();
        let sw = cfg.sweep.unwrap();
        assert_eq!(sw.axis, SweepAxis::Penalty);
        assert_eq!(sw.values, vec![1e4, 3e4, 1e5]);
        assert_eq!(cfg.policies, vec![Policy::Proposed, Policy::Lco]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Config::parse("N = 3\n\npolicy = bogus\n", "cfg").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.msg.contains("proposed") && e.msg.contains("myopic"), "{e}");
        assert_eq!(Config::parse("horizon = 1\nfoo = 2", "cfg").unwrap_err().line, 2);
        assert!(Config::parse("V = abc", "cfg").unwrap_err().msg.contains("not a number"));
        assert!(Config::parse("mu = 1.5", "cfg").is_err());
        assert!(Config::parse("nu = 1", "cfg").is_err());
        assert!(Config::parse("N = 0", "cfg").is_err());
        assert!(Config::parse("just words", "cfg").is_err());
        assert!(Config::parse("values = 1,2", "cfg").is_err());
    }

    #[test]
    fn cross_key_checks() {
        assert!(Config::parse("arrival_lo = 5; arrival_hi = 4", "t").is_err());
        assert!(Config::parse("sweep = M; values = 1, 2.5", "t").is_err());
        assert!(Config::parse("sweep = placeholders", "t").is_err());
        assert!(Config::parse("seeds = 1,2,1", "t").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = Config::default();
        let vars = [("WPMEC_VALUES", "1,2"), ("WPMEC_SWEEP", "m"), ("WPMEC_V", "250"), ("PATH", "/bin")];
        cfg.apply_env(vars.iter().map(|(k, v)| (k.to_string(), v.to_string()))).unwrap();
        assert_eq!(cfg.sys.penalty, 250.0);
        assert_eq!(cfg.sweep, Some(Sweep { axis: SweepAxis::NumAps, values: vec![1.0, 2.0] }));
        let bad = [("WPMEC_HORIZON".to_string(), "-3".to_string())];
        let e = Config::default().apply_env(bad).unwrap_err();
        assert!(e.msg.contains("WPMEC_HORIZON"), "{e}");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let src = "V = 12345.678901234567; kappa = 1.23456789e-28; sweep = arrival_scale; values = 0.1,0.3333333333333333\nseeds = 7,3\npolicy = fo\nweight_scaling = squared\nrepair = energy_balance";
        let cfg = Config::parse(src, "t").unwrap();
        let again = Config::parse(&cfg.to_text(), "t").unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_text(), again.to_text());
    }
}
