//! Flat key-value configuration files with dotted keys
//! (`tlinkage.tau=0.15`), used for both the pipeline config and scenario
//! specs. Parse errors always name the offending key.

use std::collections::{BTreeMap, BTreeSet};

use crate::association::AssocConfig;
use crate::error::{Error, Result};
use crate::rectfit::RectFitConfig;
use crate::segmentation::SegmentationConfig;
use crate::sim::{MotionSpec, ScenarioSpec, SensorSpec, VehicleSpec};
use crate::tlinkage::TLinkageConfig;
use crate::tracking::TrackingConfig;

/// Parsed key-value file; tracks consumed keys so unknown keys can be
/// reported by name.
pub struct KvMap {
    entries: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
}

impl KvMap {
    /// Parse `key=value` lines; `#` starts a comment, blank lines are fine.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected key=value, got {:?}",
                    lineno + 1,
                    raw.trim()
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self {
            entries,
            consumed: BTreeSet::new(),
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    pub fn get_f64(&mut self, key: &str, into: &mut f64) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: not a number: {v:?}")))?;
        }
        Ok(())
    }

    pub fn get_usize(&mut self, key: &str, into: &mut usize) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: not an integer: {v:?}")))?;
        }
        Ok(())
    }

    pub fn get_u32(&mut self, key: &str, into: &mut u32) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: not an integer: {v:?}")))?;
        }
        Ok(())
    }

    pub fn get_u64(&mut self, key: &str, into: &mut u64) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: not an integer: {v:?}")))?;
        }
        Ok(())
    }

    pub fn get_u8(&mut self, key: &str, into: &mut u8) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: not an integer: {v:?}")))?;
        }
        Ok(())
    }

    pub fn get_string(&mut self, key: &str) -> Option<String> {
        self.take(key)
    }

    /// Error on any key never consumed.
    pub fn finish(self) -> Result<()> {
        for key in self.entries.keys() {
            if !self.consumed.contains(key) {
                return Err(Error::Parse(format!("unknown key: {key}")));
            }
        }
        Ok(())
    }
}

/// Every stage's configuration in one place.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub segmentation: SegmentationConfig,
    pub tlinkage: TLinkageConfig,
    pub rectfit: RectFitConfig,
    pub assoc: AssocConfig,
    pub track: TrackingConfig,
    /// Cap on points fed to T-linkage per segment (deterministic stride
    /// subsample); rectangle fitting always sees the full segment.
    pub tlinkage_max_points: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationConfig::default(),
            tlinkage: TLinkageConfig::default(),
            rectfit: RectFitConfig::default(),
            assoc: AssocConfig::default(),
            track: TrackingConfig::default(),
            tlinkage_max_points: 120,
        }
    }
}

impl PipelineConfig {
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut kv = KvMap::parse(text)?;
        let mut cfg = Self::default();

        kv.get_f64("segmentation.d0", &mut cfg.segmentation.d0)?;
        kv.get_f64("segmentation.k", &mut cfg.segmentation.k)?;
        kv.get_f64("segmentation.merge_dist", &mut cfg.segmentation.merge_dist)?;
        kv.get_usize("segmentation.min_points", &mut cfg.segmentation.min_points)?;

        kv.get_usize("tlinkage.m", &mut cfg.tlinkage.m)?;
        kv.get_f64("tlinkage.tau", &mut cfg.tlinkage.tau)?;
        kv.get_usize("tlinkage.min_cluster_size", &mut cfg.tlinkage.min_cluster_size)?;
        kv.get_u64("tlinkage.seed", &mut cfg.tlinkage.seed)?;

        kv.get_f64("rectfit.step_deg", &mut cfg.rectfit.step_deg)?;
        kv.get_f64("rectfit.min_width", &mut cfg.rectfit.min_width)?;
        kv.get_f64("rectfit.closeness_dmin", &mut cfg.rectfit.closeness_dmin)?;

        kv.get_f64("assoc.eps", &mut cfg.assoc.eps)?;
        kv.get_f64("assoc.heading_weight", &mut cfg.assoc.heading_weight)?;

        kv.get_f64("track.q_stationary", &mut cfg.track.q_stationary)?;
        kv.get_f64("track.q_cv_vel", &mut cfg.track.q_cv_vel)?;
        kv.get_f64("track.q_ca_acc", &mut cfg.track.q_ca_acc)?;
        kv.get_f64("track.q_single_cv", &mut cfg.track.q_single_cv)?;
        kv.get_f64("track.r_pos_std", &mut cfg.track.r_pos_std)?;
        kv.get_f64("track.r_theta_std_deg", &mut cfg.track.r_theta_std_deg)?;
        kv.get_u32("track.confirm_hits", &mut cfg.track.confirm_hits)?;
        kv.get_u32("track.max_misses", &mut cfg.track.max_misses)?;
        kv.get_f64("track.p_floor", &mut cfg.track.p_floor)?;
        if let Some(mode) = kv.get_string("track.mode") {
            cfg.track.single_model = match mode.as_str() {
                "mma" => false,
                "single_cv" => true,
                other => {
                    return Err(Error::Parse(format!(
                        "track.mode: expected mma or single_cv, got {other:?}"
                    )))
                }
            };
        }

        kv.get_usize("pipeline.tlinkage_max_points", &mut cfg.tlinkage_max_points)?;

        kv.finish()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let s = self;
        format!(
            "segmentation.d0={}\nsegmentation.k={}\nsegmentation.merge_dist={}\nsegmentation.min_points={}\n\
             tlinkage.m={}\ntlinkage.tau={}\ntlinkage.min_cluster_size={}\ntlinkage.seed={}\n\
             rectfit.step_deg={}\nrectfit.min_width={}\nrectfit.closeness_dmin={}\n\
             assoc.eps={}\nassoc.heading_weight={}\n\
             track.q_stationary={}\ntrack.q_cv_vel={}\ntrack.q_ca_acc={}\ntrack.q_single_cv={}\n\
             track.r_pos_std={}\ntrack.r_theta_std_deg={}\n\
             track.confirm_hits={}\ntrack.max_misses={}\ntrack.p_floor={}\ntrack.mode={}\n\
             pipeline.tlinkage_max_points={}\n",
            s.segmentation.d0,
            s.segmentation.k,
            s.segmentation.merge_dist,
            s.segmentation.min_points,
            s.tlinkage.m,
            s.tlinkage.tau,
            s.tlinkage.min_cluster_size,
            s.tlinkage.seed,
            s.rectfit.step_deg,
            s.rectfit.min_width,
            s.rectfit.closeness_dmin,
            s.assoc.eps,
            s.assoc.heading_weight,
            s.track.q_stationary,
            s.track.q_cv_vel,
            s.track.q_ca_acc,
            s.track.q_single_cv,
            s.track.r_pos_std,
            s.track.r_theta_std_deg,
            s.track.confirm_hits,
            s.track.max_misses,
            s.track.p_floor,
            if s.track.single_model { "single_cv" } else { "mma" },
            s.tlinkage_max_points,
        )
    }
}

impl ScenarioSpec {
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut kv = KvMap::parse(text).map_err(scenario_err)?;
        let mut spec = ScenarioSpec {
            duration: 0.0,
            scan_rate: 0.0,
            sensor: SensorSpec::default(),
            vehicles: Vec::new(),
        };
        kv.get_f64("duration", &mut spec.duration).map_err(scenario_err)?;
        kv.get_f64("scan_rate", &mut spec.scan_rate).map_err(scenario_err)?;

        let mut res_deg = spec.sensor.angular_res.to_degrees();
        kv.get_f64("sensor.angular_res_deg", &mut res_deg).map_err(scenario_err)?;
        spec.sensor.angular_res = res_deg.to_radians();
        kv.get_f64("sensor.max_range", &mut spec.sensor.max_range).map_err(scenario_err)?;
        kv.get_u8("sensor.layers", &mut spec.sensor.layers).map_err(scenario_err)?;
        kv.get_f64("sensor.noise_sigma", &mut spec.sensor.noise_sigma).map_err(scenario_err)?;
        kv.get_f64("sensor.outlier_rate", &mut spec.sensor.outlier_rate).map_err(scenario_err)?;
        let mut jitter_deg = spec.sensor.bearing_jitter.to_degrees();
        kv.get_f64("sensor.bearing_jitter_deg", &mut jitter_deg).map_err(scenario_err)?;
        spec.sensor.bearing_jitter = jitter_deg.to_radians();

        // Vehicle indices present in the file.
        let mut indices = BTreeSet::new();
        for key in kv.entries.keys() {
            if let Some(rest) = key.strip_prefix("vehicle.") {
                let Some((idx, _)) = rest.split_once('.') else {
                    return Err(Error::InvalidSpec(format!("{key}: malformed vehicle key")));
                };
                let idx: usize = idx.parse().map_err(|_| {
                    Error::InvalidSpec(format!("{key}: vehicle index must be an integer"))
                })?;
                indices.insert(idx);
            }
        }
        for (expected, &idx) in indices.iter().enumerate() {
            if idx != expected {
                return Err(Error::InvalidSpec(format!(
                    "vehicle.{idx}: vehicle indices must be contiguous from 0"
                )));
            }
        }

        for idx in indices {
            let p = |field: &str| format!("vehicle.{idx}.{field}");
            let mut v = VehicleSpec {
                length: 4.5,
                width: 1.8,
                x: f64::NAN,
                y: f64::NAN,
                theta: 0.0,
                motion: MotionSpec::Stationary,
                spawn_time: 0.0,
                despawn_time: None,
            };
            kv.get_f64(&p("length"), &mut v.length).map_err(scenario_err)?;
            kv.get_f64(&p("width"), &mut v.width).map_err(scenario_err)?;
            kv.get_f64(&p("x"), &mut v.x).map_err(scenario_err)?;
            kv.get_f64(&p("y"), &mut v.y).map_err(scenario_err)?;
            let mut theta_deg = 0.0;
            kv.get_f64(&p("theta_deg"), &mut theta_deg).map_err(scenario_err)?;
            v.theta = theta_deg.to_radians();
            kv.get_f64(&p("spawn_time"), &mut v.spawn_time).map_err(scenario_err)?;
            if kv.raw(&p("despawn_time")).is_some() {
                let mut d = 0.0;
                kv.get_f64(&p("despawn_time"), &mut d).map_err(scenario_err)?;
                v.despawn_time = Some(d);
            }
            if v.x.is_nan() {
                return Err(Error::InvalidSpec(format!("{}: missing", p("x"))));
            }
            if v.y.is_nan() {
                return Err(Error::InvalidSpec(format!("{}: missing", p("y"))));
            }

            let motion_key = p("motion");
            let motion = kv.get_string(&motion_key).unwrap_or_else(|| "stationary".into());
            let (mut vx, mut vy, mut ax, mut ay) = (0.0, 0.0, 0.0, 0.0);
            kv.get_f64(&p("vx"), &mut vx).map_err(scenario_err)?;
            kv.get_f64(&p("vy"), &mut vy).map_err(scenario_err)?;
            kv.get_f64(&p("ax"), &mut ax).map_err(scenario_err)?;
            kv.get_f64(&p("ay"), &mut ay).map_err(scenario_err)?;
            v.motion = match motion.as_str() {
                "stationary" => MotionSpec::Stationary,
                "const_velocity" | "cv" => MotionSpec::ConstVelocity { vx, vy },
                "const_acceleration" | "ca" => MotionSpec::ConstAcceleration { vx, vy, ax, ay },
                other => {
                    return Err(Error::InvalidSpec(format!(
                        "{motion_key}: unknown motion {other:?}"
                    )))
                }
            };
            spec.vehicles.push(v);
        }

        kv.finish().map_err(scenario_err)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("duration={}\n", self.duration));
        out.push_str(&format!("scan_rate={}\n", self.scan_rate));
        out.push_str(&format!(
            "sensor.angular_res_deg={}\n",
            self.sensor.angular_res.to_degrees()
        ));
        out.push_str(&format!("sensor.max_range={}\n", self.sensor.max_range));
        out.push_str(&format!("sensor.layers={}\n", self.sensor.layers));
        out.push_str(&format!("sensor.noise_sigma={}\n", self.sensor.noise_sigma));
        out.push_str(&format!("sensor.outlier_rate={}\n", self.sensor.outlier_rate));
        out.push_str(&format!(
            "sensor.bearing_jitter_deg={}\n",
            self.sensor.bearing_jitter.to_degrees()
        ));
        for (i, v) in self.vehicles.iter().enumerate() {
            out.push_str(&format!("vehicle.{i}.length={}\n", v.length));
            out.push_str(&format!("vehicle.{i}.width={}\n", v.width));
            out.push_str(&format!("vehicle.{i}.x={}\n", v.x));
            out.push_str(&format!("vehicle.{i}.y={}\n", v.y));
            out.push_str(&format!("vehicle.{i}.theta_deg={}\n", v.theta.to_degrees()));
            out.push_str(&format!("vehicle.{i}.spawn_time={}\n", v.spawn_time));
            if let Some(d) = v.despawn_time {
                out.push_str(&format!("vehicle.{i}.despawn_time={d}\n"));
            }
            match v.motion {
                MotionSpec::Stationary => {
                    out.push_str(&format!("vehicle.{i}.motion=stationary\n"));
                }
                MotionSpec::ConstVelocity { vx, vy } => {
                    out.push_str(&format!("vehicle.{i}.motion=const_velocity\n"));
                    out.push_str(&format!("vehicle.{i}.vx={vx}\n"));
                    out.push_str(&format!("vehicle.{i}.vy={vy}\n"));
                }
                MotionSpec::ConstAcceleration { vx, vy, ax, ay } => {
                    out.push_str(&format!("vehicle.{i}.motion=const_acceleration\n"));
                    out.push_str(&format!("vehicle.{i}.vx={vx}\n"));
                    out.push_str(&format!("vehicle.{i}.vy={vy}\n"));
                    out.push_str(&format!("vehicle.{i}.ax={ax}\n"));
                    out.push_str(&format!("vehicle.{i}.ay={ay}\n"));
                }
            }
        }
        out
    }
}

fn scenario_err(e: Error) -> Error {
    match e {
        Error::Parse(msg) => Error::InvalidSpec(msg),
        other => other,
    }
}
