//! Experiment configuration: one flat JSON document.
//!
//! Serialization round-trips exactly (field order is fixed by the struct),
//! and the sha-256 of the canonical serialized form identifies a run.

use crate::error::{Error, Result};
use crate::groups::{Group, Region};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const KINDS: [&str; 5] = [
    "accumulate",
    "folner",
    "traceid",
    "affine-counterexample",
    "oracle-antiwick",
];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// region sequence constructor for folner runs: "dilation" | "convex"
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
    /// number of probe points sampled inside the compact set from `seed`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compact_set: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compact_per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_per_axis: Option<usize>,
    /// half-width of the h_S quadrature window around the identity
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hs_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hs_per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_bounds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_timings: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_group: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_linalg: Option<f64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !KINDS.contains(&self.kind.as_str()) {
            return Err(Error::Config(format!(
                "unknown kind `{}` (expected one of {KINDS:?})",
                self.kind
            )));
        }
        for (name, v) in [
            ("state_n", self.state_n),
            ("quad_per_axis", self.quad_per_axis),
            ("measure_per_axis", self.measure_per_axis),
            ("hs_per_axis", self.hs_per_axis),
            ("compact_per_axis", self.compact_per_axis),
        ] {
            if let Some(v) = v {
                if v == 0 || !v.is_power_of_two() {
                    return Err(Error::Config(format!("{name} must be a power of two, got {v}")));
                }
            }
        }
        if let Some(deltas) = &self.deltas {
            for &d in deltas {
                if !(0.0 < d && d < 1.0) {
                    return Err(Error::Config(format!("delta {d} outside (0, 1)")));
                }
            }
        }
        if let Some(scales) = &self.scales {
            if scales.iter().any(|&r| r <= 0.0) {
                return Err(Error::Config("scales must be positive".into()));
            }
        }
        if let Some(seq) = &self.sequence {
            if seq != "dilation" && seq != "convex" {
                return Err(Error::Config(format!(
                    "sequence must be `dilation` or `convex`, got `{seq}`"
                )));
            }
        }
        Ok(())
    }

    pub fn group(&self) -> Result<Group> {
        let name = self.group.as_deref().unwrap_or(match self.kind.as_str() {
            "affine-counterexample" => "affine",
            "folner" => "euclidean2",
            _ => "phase_plane",
        });
        parse_group(name)
    }

    pub fn region(&self, group: Group) -> Result<Region> {
        let default = match group {
            Group::Affine => "box(0,1,1,2.718281828459045)",
            _ => "disk(1)",
        };
        parse_region(self.region.as_deref().unwrap_or(default))
    }
}

pub fn parse_group(name: &str) -> Result<Group> {
    match name {
        "phase_plane" => Ok(Group::PhasePlane),
        "affine" => Ok(Group::Affine),
        "heisenberg" => Ok(Group::Heisenberg),
        "euclidean1" => Ok(Group::Euclidean(1)),
        "euclidean2" => Ok(Group::Euclidean(2)),
        "euclidean3" => Ok(Group::Euclidean(3)),
        other => Err(Error::Config(format!("unknown group `{other}`"))),
    }
}

/// Region grammar: `disk(r)`, `disk(r,cx,cy)`, `box(x0,x1,y0,y1)`,
/// `interval(a,b)`, `annulus(r0,r1)`, `annulus(r0,r1,cx,cy)`,
/// `halfbox(x0,x1,y0,y1,nx,ny,c)`.
pub fn parse_region(text: &str) -> Result<Region> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        Some(i) if text.ends_with(')') => (&text[..i], &text[i + 1..text.len() - 1]),
        _ => return Err(Error::Config(format!("bad region spec `{text}`"))),
    };
    let nums: Vec<f64> = args
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{t}` in region `{text}`")))
        })
        .collect::<Result<_>>()?;
    match (name, nums.len()) {
        ("disk", 1) => Ok(Region::disk([0.0, 0.0], nums[0])),
        ("disk", 3) => Ok(Region::disk([nums[1], nums[2]], nums[0])),
        ("box", 4) => Ok(Region::rect([nums[0], nums[2]], [nums[1], nums[3]])),
        ("interval", 2) => Ok(Region::interval(nums[0], nums[1])),
        ("annulus", 2) => Ok(Region::annulus([0.0, 0.0], nums[0], nums[1])),
        ("annulus", 4) => Ok(Region::annulus([nums[2], nums[3]], nums[0], nums[1])),
        ("halfbox", 7) => Ok(Region::half_plane_box(
            [nums[0], nums[2]],
            [nums[1], nums[3]],
            [nums[4], nums[5]],
            nums[6],
        )),
        _ => Err(Error::Config(format!("bad region spec `{text}`"))),
    }
}
