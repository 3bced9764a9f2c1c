//! Bundled scenario suite: one single-fault scenario per row of the fault
//! detection table, plus the dead-node and partition controls.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::scenario::Scenario;
use crate::network::{CoreException, FaultEvent, FaultKind};
use crate::node::{Dims, NodeCoord, Quantity};
use crate::registers::{Direction, HostComponent, TriState};
use crate::supervisor::DiagnosticPath;

pub const MATRIX_DIMS: Dims = Dims::new(3, 3, 3);
pub const FAULT_TIME: u64 = 100;
pub const MATRIX_DURATION: u64 = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub name: &'static str,
    pub scenario: Scenario,
    pub expected_path: DiagnosticPath,
    /// False for the control scenarios that are not detection table rows.
    pub table_row: bool,
}

impl MatrixRow {
    pub fn fault(&self) -> &FaultEvent {
        &self.scenario.faults[0]
    }
}

pub fn fault_matrix(seed: u64) -> Vec<MatrixRow> {
    let target = NodeCoord::new(1, 1, 1);
    let dnp = DiagnosticPath::DnpFmHostService;
    let host = DiagnosticPath::HostService;
    let relay = DiagnosticPath::MeshRelay;
    let rows: [(&str, FaultKind, DiagnosticPath, bool); 13] = [
        (
            "link-sick",
            FaultKind::LinkSick {
                dir: Direction::XPlus,
                error_rate: 0.1,
            },
            dnp,
            true,
        ),
        (
            "link-cable-cut",
            FaultKind::LinkCableCut { dir: Direction::XPlus },
            dnp,
            true,
        ),
        (
            "link-logic-failure",
            FaultKind::LinkLogicFailure { dir: Direction::YMinus },
            dnp,
            true,
        ),
        (
            "temperature-alarm",
            FaultKind::Sensor {
                quantity: Quantity::Temperature,
                value: 90,
            },
            dnp,
            true,
        ),
        (
            "power-warning",
            FaultKind::Sensor {
                quantity: Quantity::Power,
                value: 45,
            },
            dnp,
            true,
        ),
        (
            "voltage-alarm",
            FaultKind::Sensor {
                quantity: Quantity::Voltage,
                value: 95,
            },
            dnp,
            true,
        ),
        (
            "core-sick",
            FaultKind::CoreSick {
                exception: CoreException::Rdma,
            },
            host,
            true,
        ),
        ("core-meltdown", FaultKind::CoreMeltdown, host, true),
        (
            "host-memory",
            FaultKind::HostComponent {
                component: HostComponent::Memory,
                status: TriState::Broken,
            },
            host,
            true,
        ),
        (
            "host-service-net",
            FaultKind::HostComponent {
                component: HostComponent::ServiceNet,
                status: TriState::Broken,
            },
            relay,
            true,
        ),
        ("host-breakdown", FaultKind::HostBreakdown, relay, true),
        ("service-link-cut", FaultKind::ServiceLinkCut, relay, false),
        ("node-kill", FaultKind::NodeKill, dnp, false),
    ];
    rows.into_iter()
        .map(|(name, kind, expected_path, table_row)| MatrixRow {
            name,
            scenario: Scenario::new(MATRIX_DIMS, MATRIX_DURATION, seed)
                .with_fault(FaultEvent::new(FAULT_TIME, target, kind)),
            expected_path,
            table_row,
        })
        .collect()
}

/// Writes every matrix scenario as `<name>.toml` into `dir`.
pub fn write_matrix(dir: &Path, seed: u64) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    fault_matrix(seed)
        .into_iter()
        .map(|row| {
            let path = dir.join(format!("{}.toml", row.name));
            fs::write(&path, row.scenario.to_toml_string())?;
            Ok(path)
        })
        .collect()
}
