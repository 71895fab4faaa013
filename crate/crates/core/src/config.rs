//! Tracker configuration and the plain-text `key = value` config format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix2x4, Matrix4};

use crate::affinity::DEFAULT_ALPHA;
use crate::error::{Error, Result};
use crate::gmphd::ModelParams;
use crate::kcf::KcfParams;

/// Object classes of the KITTI-MOTS convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectClass {
    Car = 1,
    Pedestrian = 2,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 2] = [ObjectClass::Car, ObjectClass::Pedestrian];

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(Self::Car),
            2 => Some(Self::Pedestrian),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Car => "car",
            Self::Pedestrian => "pedestrian",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" | "cars" | "1" => Ok(Self::Car),
            "ped" | "pedestrian" | "pedestrians" | "2" => Ok(Self::Pedestrian),
            other => Err(Error::Config(format!("unknown class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    Off,
    BoxIou,
    MaskIou,
}

/// Which association modules run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pipeline {
    /// Fuse appearance into segment-to-track costs; otherwise position only.
    pub saf_s2ta: bool,
    pub merge: MergeMode,
    /// Track-to-track re-identification of lost tracks.
    pub t2ta: bool,
}

impl Pipeline {
    /// Ablation presets `p1`..`p5`:
    ///
    /// | preset | S2TA      | merging  | T2TA |
    /// |--------|-----------|----------|------|
    /// | p1     | position  | -        | -    |
    /// | p2     | fused     | -        | -    |
    /// | p3     | fused     | box IoU  | -    |
    /// | p4     | fused     | mask IoU | -    |
    /// | p5     | fused     | mask IoU | yes  |
    pub fn preset(level: u8) -> Option<Self> {
        let p = match level {
            1 => Self { saf_s2ta: false, merge: MergeMode::Off, t2ta: false },
            2 => Self { saf_s2ta: true, merge: MergeMode::Off, t2ta: false },
            3 => Self { saf_s2ta: true, merge: MergeMode::BoxIou, t2ta: false },
            4 => Self { saf_s2ta: true, merge: MergeMode::MaskIou, t2ta: false },
            5 => Self { saf_s2ta: true, merge: MergeMode::MaskIou, t2ta: true },
            _ => return None,
        };
        Some(p)
    }

    /// Whether any stage needs per-track appearance models.
    pub fn uses_appearance(&self) -> bool {
        self.saf_s2ta || self.t2ta
    }
}

impl Default for Pipeline {
    fn default() -> Self {
        Self::preset(5).unwrap()
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        t.strip_prefix('p')
            .and_then(|n| n.parse::<u8>().ok())
            .and_then(Self::preset)
            .ok_or_else(|| Error::Config(format!("unknown pipeline {s:?}, expected p1..p5")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Mask merging threshold.
    pub t_m: f64,
    pub alpha: f64,
    pub max_lost_age: u32,
    /// Maximum age of a live track to be a re-identification candidate.
    pub t2ta_window: u32,
    pub min_hits: u32,
    pub conf_car: f64,
    pub conf_ped: f64,
    pub params: ModelParams,
    pub kcf: KcfParams,
    pub pipeline: Pipeline,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            t_m: 0.4,
            alpha: DEFAULT_ALPHA,
            max_lost_age: 30,
            t2ta_window: 10,
            min_hits: 1,
            conf_car: 0.6,
            conf_ped: 0.7,
            params: ModelParams::default(),
            kcf: KcfParams::default(),
            pipeline: Pipeline::default(),
        }
    }
}

impl TrackerConfig {
    pub fn with_pipeline(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            ..Self::default()
        }
    }

    pub fn threshold(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::Car => self.conf_car,
            ObjectClass::Pedestrian => self.conf_ped,
        }
    }

    /// Applies `key = value` overrides from a config file.
    pub fn load_overrides(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let text = std::fs::read_to_string(path.as_ref())?;
        self.apply_overrides(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "t_m" => self.t_m = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "max_lost_age" => self.max_lost_age = num(key, value)?,
            "t2ta_window" => self.t2ta_window = num(key, value)?,
            "min_hits" => self.min_hits = num(key, value)?,
            "conf_car" => self.conf_car = num(key, value)?,
            "conf_ped" => self.conf_ped = num(key, value)?,
            "pipeline" => self.pipeline = value.parse()?,
            "f" => self.params.f = Matrix4::from_row_slice(&numbers(key, value, 16)?),
            "q" => self.params.q = Matrix4::from_row_slice(&numbers(key, value, 16)?),
            "p0" => self.params.p0 = Matrix4::from_row_slice(&numbers(key, value, 16)?),
            "r" => self.params.r = Matrix2::from_row_slice(&numbers(key, value, 4)?),
            "h" => self.params.h = Matrix2x4::from_row_slice(&numbers(key, value, 8)?),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}

fn numbers(key: &str, value: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = value
        .trim_matches(|c| c == '[' || c == ']')
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::Config(format!(
            "{key}: expected {expected} numbers, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_compose() {
        let p: Vec<Pipeline> = (1..=5).map(|l| Pipeline::preset(l).unwrap()).collect();
        assert!(!p[0].saf_s2ta && p[0].merge == MergeMode::Off && !p[0].t2ta);
        assert!(p[1].saf_s2ta && p[1].merge == MergeMode::Off);
        assert_eq!(p[2].merge, MergeMode::BoxIou);
        assert_eq!(p[3].merge, MergeMode::MaskIou);
        assert!(p[4].saf_s2ta && p[4].merge == MergeMode::MaskIou && p[4].t2ta);
        assert!(Pipeline::preset(6).is_none());
        assert_eq!("P4".parse::<Pipeline>().unwrap(), p[3]);
        assert!("q1".parse::<Pipeline>().is_err());
    }

    #[test]
    fn defaults() {
        let c = TrackerConfig::default();
        assert_eq!(c.t_m, 0.4);
        assert_eq!(c.alpha, 100.0);
        assert_eq!((c.max_lost_age, c.t2ta_window, c.min_hits), (30, 10, 1));
        assert_eq!((c.conf_car, c.conf_ped), (0.6, 0.7));
        assert_eq!(c.params, ModelParams::default());
    }

    #[test]
    fn overrides() {
        let mut c = TrackerConfig::default();
        c.apply_overrides(
            "# comment\n t_m = 0.5 \nalpha=50 # trailing\n\nr = 1, 0, 0, 2\npipeline = p2\n",
        )
        .unwrap();
        assert_eq!(c.t_m, 0.5);
        assert_eq!(c.alpha, 50.0);
        assert_eq!(c.params.r, Matrix2::new(1.0, 0.0, 0.0, 2.0));
        assert_eq!(c.pipeline, Pipeline::preset(2).unwrap());
        assert!(c.apply_overrides("bogus = 1").is_err());
        assert!(c.apply_overrides("q = 1 2 3").is_err());
        assert!(c.apply_overrides("t_m 0.3").is_err());
    }
}
