//! Built-in catalogue of publicly converted multi-agent datasets.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub source: String,
    pub environment: String,
    pub scenario: String,
    pub quality_label: String,
    pub url: Option<String>,
}

const OG_MARL_QUALITIES: &[&str] = &["good", "medium", "poor"];
const D4RL_STYLE: &[&str] = &["expert", "medium-replay", "medium", "random"];
const CFCQL_QUALITIES: &[&str] = &["expert", "medium-replay", "medium", "mixed"];
const OMIGA_MUJOCO: &[&str] = &["expert", "medium-expert", "medium-replay", "medium"];

/// (source, environment, scenarios, qualities)
const TABLE: &[(&str, &str, &[&str], &[&str])] = &[
    (
        "OG-MARL",
        "MAMuJoCo",
        &["2halfcheetah", "2ant", "4ant"],
        OG_MARL_QUALITIES,
    ),
    (
        "OG-MARL",
        "SMACv1",
        &["2s3z", "3m", "3s5z_vs_3s6z", "5m_vs_6m", "8m"],
        OG_MARL_QUALITIES,
    ),
    (
        "OG-MARL",
        "SMACv2",
        &["terran_5_vs_5", "zerg_5_vs_5"],
        &["replay"],
    ),
    ("OMAR", "MAMuJoCo", &["2halfcheetah"], D4RL_STYLE),
    (
        "OMAR",
        "MPE",
        &["simple-spread", "simple-tag", "simple-world"],
        D4RL_STYLE,
    ),
    (
        "CFCQL",
        "SMACv1",
        &["2s3z", "3s_vs_5z", "5m_vs_6m", "6h_vs_8z"],
        CFCQL_QUALITIES,
    ),
    (
        "OMIGA",
        "SMACv1",
        &["corridor", "2c_vs_64zg", "5m_vs_6m", "6h_vs_8z"],
        OG_MARL_QUALITIES,
    ),
    (
        "OMIGA",
        "MAMuJoCo",
        &["2ant", "3hopper", "6halfcheetah"],
        OMIGA_MUJOCO,
    ),
    (
        "AlberDICE",
        "RWARE",
        &[
            "tiny-2g",
            "tiny-4g",
            "tiny-6ag",
            "small-2ag",
            "small-4ag",
            "small-6ag",
        ],
        &["expert"],
    ),
];

/// Every known converted dataset, one entry per
/// (source, environment, scenario, quality). Download URLs are not bundled.
pub fn registry() -> Vec<RegistryEntry> {
    TABLE
        .iter()
        .flat_map(|&(source, environment, scenarios, qualities)| {
            scenarios.iter().flat_map(move |&scenario| {
                qualities.iter().map(move |&quality| RegistryEntry {
                    source: source.into(),
                    environment: environment.into(),
                    scenario: scenario.into(),
                    quality_label: quality.into(),
                    url: None,
                })
            })
        })
        .collect()
}
