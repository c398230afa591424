//! The bundled household: seventeen ambient channels, the rules that tie ten
//! of them to activities, the wristband rules and an app privacy map. The
//! synthetic generator and the rule classifier both read these.

use crate::abstraction::rules::RuleSet;
use crate::abstraction::taxonomy::{LabelTaxonomy, TaxonomySet};
use crate::ingest::{PrivacyMap, SensorRegistry, SleepKind};
use crate::source::Source;

pub const REGISTRY_CSV: &str = include_str!("../assets/registry.csv");
pub const AMBIENT_RULES_CSV: &str = include_str!("../assets/ambient_rules.csv");
pub const WRISTBAND_RULES_CSV: &str = include_str!("../assets/wristband_rules.csv");
pub const PRIVACY_MAP_CSV: &str = include_str!("../assets/privacy_map.csv");
pub const TAXONOMIES_TOML: &str = include_str!("../assets/taxonomies.toml");

pub fn taxonomy(source: Source) -> LabelTaxonomy {
    TaxonomySet::reference().taxonomy(source).expect("bundled taxonomy")
}

pub fn taxonomies() -> Vec<LabelTaxonomy> {
    Source::ALL.into_iter().map(taxonomy).collect()
}

pub fn ambient_registry() -> SensorRegistry {
    SensorRegistry::from_reader(REGISTRY_CSV.as_bytes()).expect("bundled registry")
}

pub fn ambient_rules() -> RuleSet {
    RuleSet::from_reader(
        AMBIENT_RULES_CSV.as_bytes(),
        &ambient_registry(),
        &taxonomy(Source::Ambient),
    )
    .expect("bundled ambient rules")
}

/// One channel per sleep kind.
pub fn wristband_registry() -> SensorRegistry {
    SensorRegistry::from_channels(&SleepKind::CHANNELS, "sleep").expect("wristband channels")
}

pub fn wristband_rules() -> RuleSet {
    RuleSet::from_reader(
        WRISTBAND_RULES_CSV.as_bytes(),
        &wristband_registry(),
        &taxonomy(Source::Wristband),
    )
    .expect("bundled wristband rules")
}

/// One channel per taxonomy activity, then any further labels in the order
/// given.
pub fn smartphone_registry(taxonomy: &LabelTaxonomy, extra_labels: &[String]) -> SensorRegistry {
    let mut channels: Vec<String> = taxonomy.activities().to_vec();
    for l in extra_labels {
        if !channels.contains(l) {
            channels.push(l.clone());
        }
    }
    SensorRegistry::from_channels(&channels, "app").expect("app channels")
}

/// Rising edge starts the app's activity, falling edge ends it.
pub fn smartphone_rules(registry: &SensorRegistry, taxonomy: &LabelTaxonomy) -> RuleSet {
    RuleSet::lifecycle(registry, taxonomy)
}

pub fn privacy_map() -> PrivacyMap {
    PrivacyMap::from_reader(PRIVACY_MAP_CSV.as_bytes()).expect("bundled privacy map")
}
