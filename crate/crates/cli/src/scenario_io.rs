//! Plain-text scenario files.
//!
//! A scenario directory holds `observations.csv` (one observation per line:
//! `epoch, sat_id, sat_x, sat_y, sat_z, pseudorange, phase_or_blank,
//! elevation, outlier_flag`), `truth.csv` (`epoch, x, y, z, clock, tropo`)
//! and, for generated scenarios, the generating `scenario.toml`. Floats are
//! written with 17 significant digits; lines starting with `#` are comments.
//! Truth carrier-phase ambiguities are not stored.

use std::path::{Path, PathBuf};

use gnss_fgo_core::models::SatelliteObservation;
use gnss_fgo_core::sim::{Scenario, ScenarioConfig};
use gnss_fgo_core::state::EpochState;
use gnss_fgo_core::SatId;
use nalgebra::Vector3;
use serde::Deserialize;

use crate::error::CliError;

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const CONFIG_FILE: &str = "scenario.toml";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Deserialize)]
struct ObservationRecord {
    epoch: usize,
    sat_id: String,
    sat_x: f64,
    sat_y: f64,
    sat_z: f64,
    pseudorange: f64,
    phase: Option<f64>,
    elevation: f64,
    outlier_flag: u8,
}

#[derive(Deserialize)]
struct TruthRecord {
    epoch: usize,
    x: f64,
    y: f64,
    z: f64,
    clock: f64,
    tropo: f64,
}

pub fn write_scenario(scenario: &Scenario, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let mut obs = String::from(
        "# epoch,sat_id,sat_x,sat_y,sat_z,pseudorange,phase_or_blank,elevation,outlier_flag\n",
    );
    for (k, (epoch, labels)) in scenario
        .observations
        .iter()
        .zip(&scenario.outlier_labels)
        .enumerate()
    {
        for (o, flag) in epoch.iter().zip(labels) {
            let phase = o.carrier_phase_range.map(num).unwrap_or_default();
            obs.push_str(&format!(
                "{k},{},{},{},{},{},{phase},{},{}\n",
                o.sat_id,
                num(o.sat_position.x),
                num(o.sat_position.y),
                num(o.sat_position.z),
                num(o.pseudorange),
                num(o.elevation),
                u8::from(*flag)
            ));
        }
    }
    let path = dir.join(OBSERVATIONS_FILE);
    std::fs::write(&path, obs).map_err(|e| CliError::io(path, e))?;

    let mut truth = String::from("# epoch,x,y,z,clock,tropo\n");
    for (k, t) in scenario.truth.iter().enumerate() {
        truth.push_str(&format!(
            "{k},{},{},{},{},{}\n",
            num(t.position.x),
            num(t.position.y),
            num(t.position.z),
            num(t.clock_bias),
            num(t.zenith_tropo)
        ));
    }
    let path = dir.join(TRUTH_FILE);
    std::fs::write(&path, truth).map_err(|e| CliError::io(path, e))?;

    if let Some(config) = &scenario.config {
        let text = toml::to_string_pretty(config).map_err(|e| CliError::Config(e.to_string()))?;
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_error(path: &Path, message: impl std::fmt::Display) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn record_line(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => parse_error(path, format!("line {}: {e}", p.line())),
        None => parse_error(path, e),
    }
}

pub fn read_scenario(dir: &Path) -> Result<Scenario, CliError> {
    let truth_path = dir.join(TRUTH_FILE);
    let mut truth: Vec<EpochState> = Vec::new();
    for rec in reader(&truth_path)?.deserialize::<TruthRecord>() {
        let rec = rec.map_err(|e| record_line(&truth_path, e))?;
        if rec.epoch != truth.len() {
            return Err(parse_error(
                &truth_path,
                format!("expected epoch {}, found {}", truth.len(), rec.epoch),
            ));
        }
        truth.push(EpochState::new(Vector3::new(rec.x, rec.y, rec.z), rec.clock, rec.tropo));
    }
    if truth.is_empty() {
        return Err(parse_error(&truth_path, "no epochs"));
    }

    let obs_path = dir.join(OBSERVATIONS_FILE);
    let mut observations = vec![Vec::new(); truth.len()];
    let mut outlier_labels = vec![Vec::new(); truth.len()];
    let mut rdr = reader(&obs_path)?;
    for rec in rdr.deserialize::<ObservationRecord>() {
        let rec = rec.map_err(|e| record_line(&obs_path, e))?;
        let slot = observations
            .get_mut(rec.epoch)
            .ok_or_else(|| parse_error(&obs_path, format!("epoch {} has no truth record", rec.epoch)))?;
        let obs = SatelliteObservation::new(
            SatId(rec.sat_id),
            Vector3::new(rec.sat_x, rec.sat_y, rec.sat_z),
            rec.pseudorange,
            rec.phase,
            rec.elevation,
        )
        .map_err(|e| parse_error(&obs_path, format!("epoch {}: {e}", rec.epoch)))?;
        slot.push(obs);
        outlier_labels[rec.epoch].push(match rec.outlier_flag {
            0 => false,
            1 => true,
            other => return Err(parse_error(&obs_path, format!("outlier_flag must be 0 or 1, got {other}"))),
        });
    }

    let config_path = dir.join(CONFIG_FILE);
    let config = if config_path.exists() {
        let text = std::fs::read_to_string(&config_path).map_err(|e| CliError::io(&config_path, e))?;
        Some(toml::from_str::<ScenarioConfig>(&text).map_err(|e| parse_error(&config_path, e))?)
    } else {
        None
    };

    Ok(Scenario {
        config,
        truth,
        observations,
        outlier_labels,
    })
}

/// Resolves a scenario source directory from a path that may point at the
/// directory or at one of its files.
pub fn scenario_dir(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        path.to_path_buf()
    }
}
