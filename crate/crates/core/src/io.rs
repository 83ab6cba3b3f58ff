//! Worker profile ingest: CSV with an `id,quality,cost` header, or a JSON
//! array of `{"id", "quality", "cost"}` objects.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::bonus::{AbilityProfile, AbilityWorker};
use crate::error::{Error, Result};
use crate::worker::{validate_workers, WorkerProfile};

pub fn workers_from_csv<R: Read>(reader: R) -> Result<Vec<WorkerProfile>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_headers(rdr.headers()?, &["id", "quality", "cost"])?;
    let workers = rdr.deserialize().collect::<Result<Vec<WorkerProfile>, _>>()?;
    validate_workers(&workers, false)?;
    Ok(workers)
}

pub fn workers_from_json<R: Read>(reader: R) -> Result<Vec<WorkerProfile>> {
    let workers: Vec<WorkerProfile> = serde_json::from_reader(reader)?;
    validate_workers(&workers, false)?;
    Ok(workers)
}

/// Loads workers, choosing the format by extension (`.json`, else CSV).
pub fn load_workers(path: &Path) -> Result<Vec<WorkerProfile>> {
    let file = File::open(path)?;
    if is_json(path) {
        workers_from_json(file)
    } else {
        workers_from_csv(file)
    }
}

pub fn workers_to_csv(workers: &[WorkerProfile]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for w in workers {
        wtr.serialize(w)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

/// Ability profile from CSV with an `id,ability,cost` header.
pub fn abilities_from_csv<R: Read>(reader: R) -> Result<AbilityProfile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_headers(rdr.headers()?, &["id", "ability", "cost"])?;
    let workers = rdr.deserialize().collect::<Result<Vec<AbilityWorker>, _>>()?;
    let profile = AbilityProfile { workers };
    profile.validate()?;
    Ok(profile)
}

pub fn load_abilities(path: &Path) -> Result<AbilityProfile> {
    let file = File::open(path)?;
    if is_json(path) {
        let workers: Vec<AbilityWorker> = serde_json::from_reader(file)?;
        let profile = AbilityProfile { workers };
        profile.validate()?;
        Ok(profile)
    } else {
        abilities_from_csv(file)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn check_headers(found: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = found.iter().collect();
    if got != want {
        return Err(Error::invalid(format!(
            "expected CSV header {}, found {}",
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}
