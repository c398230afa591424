use std::io;
use std::path::{Path, PathBuf};

use super::{Household, RoutineSpec, ScenarioBundle};
use crate::abstraction::labels::write_truth_labels;
use crate::fsio::write_atomic;
use crate::ingest::{write_ambient_log, write_smartphone_log, write_wristband_log, AppUsageRecord};
use crate::integrate::{write_event_log, EventLogFormat};

/// Files written by [`write_bundle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub registry: PathBuf,
    pub ambient: PathBuf,
    pub smartphone: PathBuf,
    pub wristband: PathBuf,
    pub privacy_map: PathBuf,
    pub ambient_rules: PathBuf,
    pub wristband_rules: PathBuf,
    pub truth_log: PathBuf,
    pub truth_labels: PathBuf,
    pub routine: PathBuf,
}

impl BundlePaths {
    pub fn in_dir(dir: &Path) -> Self {
        BundlePaths {
            registry: dir.join("registry.csv"),
            ambient: dir.join("ambient.csv"),
            smartphone: dir.join("smartphone.csv"),
            wristband: dir.join("wristband.csv"),
            privacy_map: dir.join("privacy_map.csv"),
            ambient_rules: dir.join("ambient_rules.csv"),
            wristband_rules: dir.join("wristband_rules.csv"),
            truth_log: dir.join("truth_log.csv"),
            truth_labels: dir.join("truth_labels.csv"),
            routine: dir.join("routine.toml"),
        }
    }
}

fn to_io<E: std::fmt::Display>(e: E) -> io::Error {
    io::Error::other(e.to_string())
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes the raw logs with app names as the phone reports them, the tables
/// needed to process them, the ground truth and the routine that produced it.
pub fn write_bundle(bundle: &ScenarioBundle, dir: &Path, spec: &RoutineSpec) -> io::Result<BundlePaths> {
    let paths = BundlePaths::in_dir(dir);
    let household = Household::reference();
    let raw: Vec<AppUsageRecord> = bundle
        .smartphone
        .iter()
        .zip(&bundle.smartphone_apps)
        .map(|(r, name)| AppUsageRecord {
            app_label: name.clone(),
            ..r.clone()
        })
        .collect();

    let files: [(&PathBuf, Vec<u8>); 10] = [
        (
            &paths.registry,
            render(|b| bundle.registry.write_csv(b).map_err(to_io))?,
        ),
        (
            &paths.ambient,
            render(|b| write_ambient_log(b, &bundle.ambient).map_err(to_io))?,
        ),
        (
            &paths.smartphone,
            render(|b| write_smartphone_log(b, &raw).map_err(to_io))?,
        ),
        (
            &paths.wristband,
            render(|b| write_wristband_log(b, &bundle.wristband).map_err(to_io))?,
        ),
        (
            &paths.privacy_map,
            render(|b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["app_name", "label"])?;
                for (app, label) in &bundle.app_map {
                    w.write_record([app, label])?;
                }
                w.flush()
            })?,
        ),
        (
            &paths.ambient_rules,
            render(|b| household.rules.write_csv(b).map_err(to_io))?,
        ),
        (
            &paths.wristband_rules,
            render(|b| household.wristband_rules.write_csv(b).map_err(to_io))?,
        ),
        (
            &paths.truth_log,
            render(|b| write_event_log(b, &bundle.truth_log, EventLogFormat::default()).map_err(to_io))?,
        ),
        (
            &paths.truth_labels,
            render(|b| write_truth_labels(b, &bundle.truth_labels).map_err(to_io))?,
        ),
        (&paths.routine, toml::to_string(spec).map_err(to_io)?.into_bytes()),
    ];
    for (path, bytes) in files {
        write_atomic(path, &bytes)?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::labels::read_labels;
    use crate::ingest::{parse_smartphone_log, PrivacyMap, SmartphoneSchema, Strictness};
    use crate::integrate::read_event_log;
    use crate::reference;
    use crate::synth::generate_scenario;
    use std::fs::File;

    #[test]
    fn bundle_files_read_back() {
        let spec = RoutineSpec::default();
        let b = generate_scenario(2, 2, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = write_bundle(&b, dir.path(), &spec).unwrap();
        assert_eq!(read_event_log(File::open(&p.truth_log).unwrap()).unwrap(), b.truth_log);
        let labels = read_labels(File::open(&p.truth_labels).unwrap(), &reference::taxonomies()).unwrap();
        assert_eq!(labels.len(), b.truth_labels.len());
        let map = PrivacyMap::load(&p.privacy_map).unwrap();
        let phone = parse_smartphone_log(
            File::open(&p.smartphone).unwrap(),
            &map,
            SmartphoneSchema::Intervals,
            Strictness::FailFast,
        )
        .unwrap();
        assert_eq!(phone.records, b.smartphone);
    }
}
