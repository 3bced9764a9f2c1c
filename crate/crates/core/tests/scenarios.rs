use std::path::PathBuf;

use lofamo::network::CoreException;
use lofamo::sim::{run, run_batch, Scenario};
use lofamo::supervisor::{Component, DiagnosticPath, HealthStatus, Inference};
use lofamo::{Dims, Direction, FaultEvent, FaultKind, HostComponent, NodeCoord, Quantity, TriState};

const CENTER: NodeCoord = NodeCoord::new(1, 1, 1);

fn cube3(seed: u64) -> Scenario {
    Scenario::new(Dims::new(3, 3, 3), 400, seed)
}

/// Compare against a checked-in file; `LOFAMO_BLESS=1` rewrites it instead.
fn check_golden(name: &str, actual: &str) {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("LOFAMO_BLESS").is_some() {
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, actual).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    assert_eq!(actual, want, "{} differs", p.display());
}

#[test]
fn quiet_2x2x2_is_healthy() {
    let out = run(&Scenario::new(Dims::new(2, 2, 2), 500, 0)).unwrap();
    assert!(out.report.is_all_healthy());
    assert!(out.report.inferences.is_empty());
    assert_eq!(out.trace.of_kind("fault").count(), 0);
}

#[test]
fn center_host_breakdown_via_mesh_relay() {
    let sc = cube3(1).with_fault(FaultEvent::new(100, CENTER, FaultKind::HostBreakdown));
    let out = run(&sc).unwrap();
    let rec = out.report.record(CENTER, Component::Host).unwrap();
    assert_eq!(rec.status, HealthStatus::Down);
    assert_eq!(rec.provenance.path, DiagnosticPath::MeshRelay);
    assert!(CENTER.neighbors(sc.dims).contains(&rec.provenance.reporter));
}

#[test]
fn trace_time_never_decreases() {
    let sc = cube3(3)
        .with_fault(FaultEvent::new(
            40,
            NodeCoord::new(0, 0, 0),
            FaultKind::LinkSick {
                dir: Direction::ZPlus,
                error_rate: 0.3,
            },
        ))
        .with_fault(FaultEvent::new(90, CENTER, FaultKind::NodeKill));
    let out = run(&sc).unwrap();
    let times: Vec<u64> = out.trace.iter().map(|e| e.time).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    // nothing about a fault shows up at the supervisor before it happened
    for ev in out.trace.of_kind("supervisor.update") {
        if ev.get("node") == Some("(1,1,1)") || ev.get("component") == Some("link-Z-") {
            assert!(ev.time >= 40);
        }
    }
    for a in &out.awareness {
        assert!(a.observed.is_some(), "{:?}", a.event);
    }
}

#[test]
fn two_link_faults_distinct_provenance() {
    let sc = cube3(5)
        .with_fault(FaultEvent::new(
            100,
            NodeCoord::new(0, 0, 0),
            FaultKind::LinkCableCut { dir: Direction::XPlus },
        ))
        .with_fault(FaultEvent::new(
            100,
            NodeCoord::new(2, 2, 2),
            FaultKind::LinkLogicFailure { dir: Direction::YPlus },
        ));
    let out = run(&sc).unwrap();
    let broken: Vec<_> = out
        .report
        .records
        .iter()
        .filter(|r| r.status == HealthStatus::Broken)
        .collect();
    // cable cut seen at both ends, logic failure only at the far end
    assert_eq!(broken.len(), 3);
    let reporters: std::collections::BTreeSet<_> = broken.iter().map(|r| r.provenance.reporter).collect();
    assert_eq!(reporters.len(), 3);
    assert!(broken
        .iter()
        .all(|r| r.provenance.path == DiagnosticPath::DnpFmHostService));
    assert!(out
        .report
        .record(NodeCoord::new(2, 2, 2), Component::Link(Direction::YPlus))
        .is_none());
    assert!(out
        .report
        .record(NodeCoord::new(2, 0, 2), Component::Link(Direction::YMinus))
        .is_some());
}

#[test]
fn node_kill_golden() {
    let sc = cube3(42).with_fault(FaultEvent::new(100, CENTER, FaultKind::NodeKill));
    check_golden("node_kill_health.txt", &run(&sc).unwrap().report.to_string());
}

#[test]
fn host_breakdown_golden() {
    let sc = cube3(42).with_fault(FaultEvent::new(100, CENTER, FaultKind::HostBreakdown));
    let out = run(&sc).unwrap();
    check_golden("host_breakdown_health.txt", &out.report.to_string());
    check_golden("host_breakdown_trace.tsv", &out.trace.to_tsv());
}

#[test]
fn recovery_clears_entry() {
    let sc = cube3(8)
        .with_fault(FaultEvent::new(
            100,
            CENTER,
            FaultKind::HostComponent {
                component: HostComponent::Memory,
                status: TriState::Broken,
            },
        ))
        .with_fault(FaultEvent::new(
            200,
            CENTER,
            FaultKind::HostComponent {
                component: HostComponent::Memory,
                status: TriState::Normal,
            },
        ));
    let out = run(&sc).unwrap();
    let rec = out
        .report
        .record(CENTER, Component::HostPart(HostComponent::Memory))
        .unwrap();
    assert_eq!(rec.status, HealthStatus::Normal);
    assert!(rec.time > 200);
    assert!(out.report.is_all_healthy());
}

#[test]
fn maxhops_exception_is_core_sick() {
    // a zero hop limit makes every relayed packet an exception at the receiver
    let mut sc = cube3(2).with_fault(FaultEvent::new(100, CENTER, FaultKind::HostBreakdown));
    sc.protocol.maxhops = 0;
    let out = run(&sc).unwrap();
    assert!(out.trace.of_kind("mesh.reject").count() >= 1);
    let sick = out
        .report
        .records
        .iter()
        .filter(|r| r.component == Component::DnpCore && r.status == HealthStatus::Sick)
        .count();
    assert_eq!(sick, 6);
    assert!(out.report.record(CENTER, Component::Host).is_none());
}

#[derive(Default)]
struct Oracle {
    host_dead: bool,
    service_cut: bool,
    dnp_melted: bool,
    link_broken_toward: bool,
}

impl Oracle {
    fn apply(&mut self, k: &FaultKind) {
        match k {
            FaultKind::HostBreakdown => self.host_dead = true,
            FaultKind::ServiceLinkCut => self.service_cut = true,
            FaultKind::HostComponent {
                component: HostComponent::ServiceNet,
                status: TriState::Broken,
            } => self.service_cut = true,
            FaultKind::CoreMeltdown => self.dnp_melted = true,
            FaultKind::NodeKill => {
                self.host_dead = true;
                self.dnp_melted = true;
            }
            FaultKind::LinkCableCut { .. } | FaultKind::LinkLogicFailure { .. } => self.link_broken_toward = true,
            _ => {}
        }
    }

    /// `Some(true)` for NodeDead, `Some(false)` for SilentNode.
    fn verdict(&self) -> Option<bool> {
        let silent = self.host_dead || self.service_cut;
        let corroborated = self.host_dead || self.dnp_melted || self.link_broken_toward;
        silent.then_some(corroborated)
    }
}

fn catalogue() -> Vec<FaultKind> {
    vec![
        FaultKind::LinkSick {
            dir: Direction::XPlus,
            error_rate: 0.1,
        },
        FaultKind::LinkCableCut { dir: Direction::XPlus },
        FaultKind::LinkLogicFailure { dir: Direction::YMinus },
        FaultKind::Sensor {
            quantity: Quantity::Temperature,
            value: 90,
        },
        FaultKind::CoreSick {
            exception: CoreException::Engine,
        },
        FaultKind::CoreMeltdown,
        FaultKind::HostComponent {
            component: HostComponent::Memory,
            status: TriState::Broken,
        },
        FaultKind::HostComponent {
            component: HostComponent::ServiceNet,
            status: TriState::Broken,
        },
        FaultKind::HostBreakdown,
        FaultKind::ServiceLinkCut,
        FaultKind::NodeKill,
    ]
}

#[test]
fn single_and_double_fault_inference_matches_oracle() {
    let kinds = catalogue();
    let mut cases: Vec<Vec<FaultKind>> = kinds.iter().map(|k| vec![*k]).collect();
    for i in 0..kinds.len() {
        for j in i + 1..kinds.len() {
            cases.push(vec![kinds[i], kinds[j]]);
        }
    }
    let scenarios: Vec<Scenario> = cases
        .iter()
        .enumerate()
        .map(|(n, faults)| {
            faults.iter().enumerate().fold(cube3(n as u64), |sc, (k, f)| {
                sc.with_fault(FaultEvent::new(100 + 10 * k as u64, CENTER, *f))
            })
        })
        .collect();
    for (faults, out) in cases.iter().zip(run_batch(&scenarios)) {
        let out = out.unwrap();
        let mut oracle = Oracle::default();
        faults.iter().for_each(|f| oracle.apply(f));
        let got: Vec<(NodeCoord, bool)> = out.report.inferences.iter().map(|i| (i.node(), i.is_dead())).collect();
        let want: Vec<(NodeCoord, bool)> = oracle.verdict().map(|d| (CENTER, d)).into_iter().collect();
        let labels: Vec<_> = faults.iter().map(FaultKind::label).collect();
        assert_eq!(got, want, "{labels:?}");
        for inf in &out.report.inferences {
            if let Inference::NodeDead { evidence, .. } = inf {
                assert!(!evidence.is_empty());
            }
        }
    }
}
