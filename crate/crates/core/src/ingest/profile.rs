//! Declarative per-dataset preprocessing recipes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Six calendar component columns (year, month, day, hour, minute, second)
/// for the start and end of each flow, collapsed into two epoch-second columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampMerge {
    pub start: Vec<String>,
    pub end: Vec<String>,
    #[serde(default = "default_start_name")]
    pub start_name: String,
    #[serde(default = "default_end_name")]
    pub end_name: String,
}

fn default_start_name() -> String {
    "stimestamp".into()
}

fn default_end_name() -> String {
    "etimestamp".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    /// Columns known to be constant in the full dataset. Informational: the
    /// zero-variance stage finds constant columns on its own and reports any
    /// listed name it did not remove.
    #[serde(default)]
    pub zero_columns_expected: Vec<String>,
    #[serde(default)]
    pub timestamp_merge: Option<TimestampMerge>,
    pub label_column: String,
    pub class_names: Vec<String>,
    /// Raw label token -> class name, for datasets whose raw labels are finer
    /// grained than the class list. Tokens not present map to themselves.
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
}

pub const CSE2018_CLASSES: [&str; 7] = [
    "Benign",
    "DDoS",
    "DoS",
    "Brute Force",
    "Botnet",
    "Infiltration",
    "Web attacks",
];

/// Full-dataset class counts, in class order.
pub const CSE2018_COUNTS: [u64; 7] = [13_484_708, 1_263_933, 654_300, 380_949, 286_191, 161_934, 987];

pub const LITNET2020_CLASSES: [&str; 13] = [
    "none",
    "Smurf",
    "ICMP-flood",
    "UDP-flood",
    "TCP SYN-flood",
    "HTTP-flood",
    "LAND attack",
    "Blaster Worm",
    "Code Red Worm",
    "Spam bot's detection",
    "Reaper Worm",
    "Scanning/Spread",
    "Packet fragmentation attack",
];

pub const LITNET2020_COUNTS: [u64; 13] = [
    36_423_860, 118_958, 23_256, 93_583, 1_580_016, 22_959, 52_417, 24_291, 1_255_702, 747, 1_176, 6_232, 477,
];

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl DatasetProfile {
    pub fn builtin_names() -> &'static [&'static str] {
        &["cse2018", "litnet2020", "synth-cse2018", "synth-litnet2020"]
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "cse2018" => Ok(Self::cse2018()),
            "litnet2020" => Ok(Self::litnet2020()),
            "synth-cse2018" => Ok(Self::synthetic(name, strings(&CSE2018_CLASSES))),
            "synth-litnet2020" => Ok(Self::synthetic(name, strings(&LITNET2020_CLASSES))),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }

    /// Resolves a built-in profile name, or reads a JSON profile document.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if Self::builtin_names().contains(&name_or_path) {
            return Self::builtin(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let profile: DatasetProfile = serde_json::from_str(&text)?;
            profile.validate()?;
            return Ok(profile);
        }
        Err(Error::UnknownProfile(name_or_path.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "profile `{}` has no class names",
                self.name
            )));
        }
        if self.drop_columns.contains(&self.label_column) {
            return Err(Error::DropLabel(self.label_column.clone()));
        }
        if let Some(merge) = &self.timestamp_merge {
            if merge.start.len() != 6 || merge.end.len() != 6 {
                return Err(Error::InvalidParameter(
                    "timestamp merge needs six start and six end components".into(),
                ));
            }
        }
        Ok(())
    }

    /// Profile for generated data: no drops, no timestamp merge.
    pub fn synthetic(name: &str, class_names: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            drop_columns: Vec::new(),
            zero_columns_expected: Vec::new(),
            timestamp_merge: None,
            label_column: "Label".into(),
            class_names,
            label_map: BTreeMap::new(),
        }
    }

    pub fn cse2018() -> Self {
        let label_map = [
            ("DDOS attack-HOIC", "DDoS"),
            ("DDOS attack-LOIC-UDP", "DDoS"),
            ("DDoS attacks-LOIC-HTTP", "DDoS"),
            ("DoS attacks-GoldenEye", "DoS"),
            ("DoS attacks-Hulk", "DoS"),
            ("DoS attacks-SlowHTTPTest", "DoS"),
            ("DoS attacks-Slowloris", "DoS"),
            ("FTP-BruteForce", "Brute Force"),
            ("SSH-Bruteforce", "Brute Force"),
            ("Bot", "Botnet"),
            ("Infilteration", "Infiltration"),
            ("Brute Force -Web", "Web attacks"),
            ("Brute Force -XSS", "Web attacks"),
            ("SQL Injection", "Web attacks"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self {
            name: "cse2018".into(),
            drop_columns: strings(&["Timestamp", "Flow Byts/s", "Flow Pkts/s"]),
            zero_columns_expected: strings(&[
                "Bwd PSH Flags",
                "Bwd URG Flags",
                "Fwd Byts/b Avg",
                "Fwd Pkts/b Avg",
                "Fwd Blk Rate Avg",
                "Bwd Byts/b Avg",
                "Bwd Pkts/b Avg",
                "Bwd Blk Rate Avg",
            ]),
            timestamp_merge: None,
            label_column: "Label".into(),
            class_names: strings(&CSE2018_CLASSES),
            label_map,
        }
    }

    pub fn litnet2020() -> Self {
        let mut zero = strings(&[
            "fwd", "opkt", "obyt", "smk", "dmk", "dtos", "_dir", "nh", "nhb", "svln", "dvl", "ismc", "odmc", "idmc",
            "osmc",
        ]);
        zero.extend((1..=10).map(|i| format!("mpls{i}")));
        zero.extend(strings(&["cl", "sl", "al", "ra", "eng", "tr"]));
        let parts = ["year", "month", "day", "hour", "min", "second"];
        Self {
            name: "litnet2020".into(),
            drop_columns: strings(&["ID", "attack_a"]),
            zero_columns_expected: zero,
            timestamp_merge: Some(TimestampMerge {
                start: parts.iter().map(|p| format!("ts_{p}")).collect(),
                end: parts.iter().map(|p| format!("te_{p}")).collect(),
                start_name: default_start_name(),
                end_name: default_end_name(),
            }),
            label_column: "attack_t".into(),
            class_names: strings(&LITNET2020_CLASSES),
            label_map: BTreeMap::new(),
        }
    }

    /// Class name a raw label token maps to.
    pub fn class_for<'a>(&'a self, token: &'a str) -> &'a str {
        self.label_map.get(token).map(String::as_str).unwrap_or(token)
    }
}
