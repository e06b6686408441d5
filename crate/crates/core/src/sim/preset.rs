//! Scenarios bundled with the library.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-experiment",
        description: "8 routers, 12 symmetric flows, 0.1% loss around R2 and R6, T=10s, 60s",
        text: include_str!("../../scenarios/paper-experiment.toml"),
    },
    Preset {
        name: "out-of-band",
        description: "3-router line, out-of-band responses (forward direction only), 1% loss",
        text: include_str!("../../scenarios/out-of-band.toml"),
    },
    Preset {
        name: "margin-violation",
        description: "link delay longer than the delay margin; reports deviate and are flagged",
        text: include_str!("../../scenarios/margin-violation.toml"),
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioConfig;

    #[test]
    fn presets_parse() {
        for p in PRESETS {
            ScenarioConfig::from_toml(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn paper_preset_shape() {
        let config = ScenarioConfig::from_toml(preset("paper-experiment").unwrap().text).unwrap();
        assert_eq!(config.nodes.len(), 8);
        assert_eq!(config.flows.len(), 12);
        assert_eq!(config.sessions.len(), 6);
        let lossy: Vec<_> = config.links.iter().filter(|l| l.loss_rate > 0.0).collect();
        assert!(lossy.iter().all(|l| [&l.a, &l.b].iter().any(|n| *n == "R2" || *n == "R6")));
        assert_eq!(lossy.len(), 6);
        // R1 -> R8 goes through R2 and R7.
        let r1_r8 = config
            .policies
            .iter()
            .find(|p| p.node == "R1" && p.destination.to_string() == "fd00:8::/64")
            .unwrap();
        assert_eq!(r1_r8.sid_list.to_string(), "fcff:2::100,fcff:7::100,fcff:8::d6:1");
    }
}
