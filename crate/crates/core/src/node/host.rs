use super::{NodeCoord, Quantity, WatchdogTiming};
use crate::registers::{
    AlertState, CoreStatus, Direction, DnpWatchdogRegister, HostComponent, HostRemoteFaultDescriptor,
    HostWatchdogRegister, RegisterFile, RemoteHostFault, TriState, DNP_WD_ADDR, HOST_WD_ADDR, REMOTE_FAULT_ADDR,
};
use crate::supervisor::{Component, Report, ReportKind, Via};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnpCheckOutcome {
    Fresh(DnpWatchdogRegister),
    Missed,
    DnpDeclaredDown,
}

/// Fault manager process running on the host.
#[derive(Debug, Clone)]
pub struct HostFaultManager {
    pub coord: NodeCoord,
    /// `write_period` is the host register update period, `read_period`
    /// the DNP watchdog polling period.
    pub timing: WatchdogTiming,
    neighbors: [NodeCoord; 6],
    components: HostWatchdogRegister,
    carrier_up: bool,
    published: HostWatchdogRegister,
    consecutive_invalid_reads: u32,
    dnp_declared_down: bool,
    last_dnp: DnpWatchdogRegister,
    known_neighbors: [Option<RemoteHostFault>; 6],
}

impl HostFaultManager {
    pub fn new(coord: NodeCoord, neighbors: [NodeCoord; 6], timing: WatchdogTiming) -> Self {
        HostFaultManager {
            coord,
            timing,
            neighbors,
            components: HostWatchdogRegister::default(),
            carrier_up: true,
            published: HostWatchdogRegister::default(),
            consecutive_invalid_reads: 0,
            dnp_declared_down: false,
            last_dnp: DnpWatchdogRegister::healthy(),
            known_neighbors: [None; 6],
        }
    }

    /// Sets the locally detected status of a host component.
    pub fn set_component(&mut self, c: HostComponent, status: TriState) {
        self.components.set_component(c, status);
    }

    /// Service port carrier as seen by the NIC.
    pub fn set_carrier(&mut self, up: bool) {
        self.carrier_up = up;
    }

    pub fn component(&self, c: HostComponent) -> TriState {
        match c {
            HostComponent::ServiceNet if !self.carrier_up => TriState::Broken,
            _ => self.components.component(c),
        }
    }

    /// Reports leave over the service network unless it is known broken.
    pub fn can_use_service_net(&self) -> bool {
        self.component(HostComponent::ServiceNet) != TriState::Broken
    }

    pub fn dnp_declared_down(&self) -> bool {
        self.dnp_declared_down
    }

    pub fn consecutive_invalid_reads(&self) -> u32 {
        self.consecutive_invalid_reads
    }

    fn own(&self, kind: ReportKind, now: u64) -> Report {
        Report::new(self.coord, self.coord, kind, Via::ServiceNet, now)
    }

    fn relayed(&self, subject: NodeCoord, kind: ReportKind, now: u64) -> Report {
        Report::new(self.coord, subject, kind, Via::MeshRelay, now)
    }

    /// Writes a validated host watchdog word and reports any component
    /// whose status changed since the previous update.
    pub fn update_watchdog(&mut self, regs: &mut RegisterFile, now: u64) -> Vec<Report> {
        let mut reg = HostWatchdogRegister::healthy();
        for c in HostComponent::ALL {
            reg.set_component(c, self.component(c));
        }
        regs.write(HOST_WD_ADDR, reg.encode())
            .expect("host watchdog word fits its mask");
        let reports = HostComponent::ALL
            .into_iter()
            .filter(|c| reg.component(*c) != self.published.component(*c))
            .map(|c| self.own(ReportKind::HostComponent(c, reg.component(c)), now))
            .collect();
        self.published = reg;
        reports
    }

    /// Reads and invalidates the DNP watchdog register.
    pub fn check_dnp(&mut self, regs: &mut RegisterFile) -> DnpCheckOutcome {
        let word = regs.read(DNP_WD_ADDR).expect("dnp wd is mapped");
        match DnpWatchdogRegister::decode(word) {
            Ok(reg) if reg.valid => {
                regs.write(DNP_WD_ADDR, word & !1)
                    .expect("clearing valid stays in mask");
                self.consecutive_invalid_reads = 0;
                DnpCheckOutcome::Fresh(reg)
            }
            _ => {
                self.consecutive_invalid_reads = self.consecutive_invalid_reads.saturating_add(1);
                if !self.dnp_declared_down && self.consecutive_invalid_reads >= self.timing.miss_tolerance {
                    self.dnp_declared_down = true;
                    DnpCheckOutcome::DnpDeclaredDown
                } else {
                    DnpCheckOutcome::Missed
                }
            }
        }
    }

    /// Polls the DNP and derives the reports to forward to the supervisor.
    /// A fresh all-normal status yields nothing; only changes and
    /// declarations are reported.
    pub fn poll_dnp(&mut self, regs: &mut RegisterFile, now: u64) -> (DnpCheckOutcome, Vec<Report>) {
        let outcome = self.check_dnp(regs);
        let mut reports = Vec::new();
        match outcome {
            DnpCheckOutcome::DnpDeclaredDown => {
                reports.push(self.own(ReportKind::DnpCoreMeltdown, now));
            }
            DnpCheckOutcome::Missed => {}
            DnpCheckOutcome::Fresh(reg) => {
                if std::mem::take(&mut self.dnp_declared_down) {
                    reports.push(self.own(ReportKind::AllClear(Component::DnpCore), now));
                }
                let remote = regs
                    .read(REMOTE_FAULT_ADDR)
                    .ok()
                    .and_then(|w| HostRemoteFaultDescriptor::decode(w).ok())
                    .unwrap_or_default();
                self.diff_dnp(&reg, &remote, now, &mut reports);
                self.last_dnp = reg;
            }
        }
        (outcome, reports)
    }

    fn diff_dnp(
        &mut self,
        reg: &DnpWatchdogRegister,
        remote: &HostRemoteFaultDescriptor,
        now: u64,
        out: &mut Vec<Report>,
    ) {
        let prev = self.last_dnp;
        for d in Direction::ALL {
            if reg.link(d) != prev.link(d) {
                out.push(self.own(ReportKind::LinkStatus(d, reg.link(d)), now));
            }
        }
        let sensors = [
            (Quantity::Temperature, reg.temperature, prev.temperature),
            (Quantity::Power, reg.power, prev.power),
            (Quantity::Voltage, reg.voltage, prev.voltage),
        ];
        for (q, cur, old) in sensors {
            if cur != old {
                out.push(self.own(ReportKind::SensorAlert(q, cur), now));
            }
        }
        let core_sick = |c: CoreStatus| c != CoreStatus::Normal;
        match (core_sick(prev.dnp_core), core_sick(reg.dnp_core)) {
            (false, true) => out.push(self.own(ReportKind::DnpCoreSick, now)),
            (true, false) => out.push(self.own(ReportKind::AllClear(Component::DnpCore), now)),
            _ => {}
        }
        for d in Direction::ALL {
            let current = reg.host_fails(d).then(|| remote.get(d));
            let known = self.known_neighbors[d.index()];
            if current == known {
                continue;
            }
            let subject = self.neighbors[d.index()];
            match current {
                Some(detail) if detail.is_clear() => {
                    out.push(self.relayed(subject, ReportKind::HostDown, now));
                }
                Some(detail) => {
                    for c in detail.broken() {
                        out.push(self.relayed(subject, ReportKind::HostComponent(c, TriState::Broken), now));
                    }
                }
                None => {
                    out.push(self.relayed(subject, ReportKind::AllClear(Component::Host), now));
                    if let Some(old) = known {
                        for c in old.broken() {
                            out.push(self.relayed(subject, ReportKind::AllClear(Component::HostPart(c)), now));
                        }
                    }
                }
            }
            self.known_neighbors[d.index()] = current;
        }
    }

    pub fn heartbeat(&self, now: u64) -> Report {
        self.own(ReportKind::Heartbeat, now)
    }

    /// The last fresh DNP status this host consumed.
    pub fn last_dnp_status(&self) -> DnpWatchdogRegister {
        self.last_dnp
    }

    pub fn sensor_alert(&self, q: Quantity) -> AlertState {
        match q {
            Quantity::Temperature => self.last_dnp.temperature,
            Quantity::Power => self.last_dnp.power,
            Quantity::Voltage => self.last_dnp.voltage,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::Dims;

    fn host() -> (HostFaultManager, RegisterFile) {
        let dims = Dims::new(3, 3, 3);
        let c = NodeCoord::new(1, 1, 1);
        (
            HostFaultManager::new(c, c.neighbors(dims), WatchdogTiming::default()),
            RegisterFile::default(),
        )
    }

    fn publish(regs: &mut RegisterFile, reg: DnpWatchdogRegister) {
        regs.write(DNP_WD_ADDR, reg.encode()).unwrap();
    }

    #[test]
    fn healthy_update_writes_one() {
        let (mut h, mut regs) = host();
        assert!(h.update_watchdog(&mut regs, 0).is_empty());
        assert_eq!(regs.read(HOST_WD_ADDR).unwrap(), 1);
    }

    #[test]
    fn broken_service_net_update() {
        let (mut h, mut regs) = host();
        h.set_component(HostComponent::ServiceNet, TriState::Broken);
        let reports = h.update_watchdog(&mut regs, 7);
        assert_eq!(regs.read(HOST_WD_ADDR).unwrap() >> 1 & 0b11, 0b10);
        assert_eq!(reports.len(), 1);
        assert!(!h.can_use_service_net());
    }

    #[test]
    fn memory_sick_peripheral_broken() {
        let (mut h, mut regs) = host();
        h.set_component(HostComponent::Memory, TriState::Sick);
        h.set_component(HostComponent::Peripheral0, TriState::Broken);
        h.update_watchdog(&mut regs, 0);
        let word = regs.read(HOST_WD_ADDR).unwrap();
        // independent placement: valid | 01 << 3 | 10 << 5
        assert_eq!(word, 1 | (1 << 3) | (2 << 5));
    }

    #[test]
    fn carrier_loss_reads_as_broken_service_net() {
        let (mut h, mut regs) = host();
        h.set_carrier(false);
        let reports = h.update_watchdog(&mut regs, 3);
        assert_eq!(
            reports[0].kind,
            ReportKind::HostComponent(HostComponent::ServiceNet, TriState::Broken)
        );
    }

    #[test]
    fn fresh_link_broken_reports() {
        let (mut h, mut regs) = host();
        let mut reg = DnpWatchdogRegister::healthy();
        reg.link_status[Direction::XMinus.index()] = TriState::Broken;
        publish(&mut regs, reg);
        let (outcome, reports) = h.poll_dnp(&mut regs, 20);
        assert_eq!(outcome, DnpCheckOutcome::Fresh(reg));
        assert_eq!(regs.read(DNP_WD_ADDR).unwrap() & 1, 0);
        assert_eq!(reports.len(), 1);
        assert_eq!(
            reports[0].kind,
            ReportKind::LinkStatus(Direction::XMinus, TriState::Broken)
        );
        assert_eq!(reports[0].via, Via::ServiceNet);
        assert_eq!(reports[0].subject, h.coord);

        // same status again: heartbeat only, nothing reported
        publish(&mut regs, reg);
        assert!(h.poll_dnp(&mut regs, 32).1.is_empty());
    }

    #[test]
    fn healthy_fresh_no_report() {
        let (mut h, mut regs) = host();
        publish(&mut regs, DnpWatchdogRegister::healthy());
        let (outcome, reports) = h.poll_dnp(&mut regs, 0);
        assert!(matches!(outcome, DnpCheckOutcome::Fresh(_)));
        assert!(reports.is_empty());
    }

    #[test]
    fn stale_dnp_declared_after_k() {
        let (mut h, mut regs) = host();
        assert_eq!(h.poll_dnp(&mut regs, 12).0, DnpCheckOutcome::Missed);
        let (outcome, reports) = h.poll_dnp(&mut regs, 24);
        assert_eq!(outcome, DnpCheckOutcome::DnpDeclaredDown);
        assert_eq!(reports[0].kind, ReportKind::DnpCoreMeltdown);
        assert_eq!(h.poll_dnp(&mut regs, 36).0, DnpCheckOutcome::Missed);
    }

    #[test]
    fn neighbour_host_down_is_relayed_with_neighbour_subject() {
        let (mut h, mut regs) = host();
        let mut reg = DnpWatchdogRegister::healthy();
        reg.neighbor_host_fail[Direction::ZPlus.index()] = true;
        publish(&mut regs, reg);
        let (_, reports) = h.poll_dnp(&mut regs, 50);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.kind, ReportKind::HostDown);
        assert_eq!(r.subject, NodeCoord::new(1, 1, 2));
        assert_eq!(r.reporter, h.coord);
        assert_eq!(r.via, Via::MeshRelay);
    }

    #[test]
    fn neighbour_component_fault_uses_descriptor() {
        let (mut h, mut regs) = host();
        let mut desc = HostRemoteFaultDescriptor::default();
        desc.set(
            Direction::YMinus,
            RemoteHostFault {
                service_net_broken: true,
                ..Default::default()
            },
        );
        regs.write(REMOTE_FAULT_ADDR, desc.encode()).unwrap();
        let mut reg = DnpWatchdogRegister::healthy();
        reg.neighbor_host_fail[Direction::YMinus.index()] = true;
        publish(&mut regs, reg);
        let (_, reports) = h.poll_dnp(&mut regs, 50);
        assert_eq!(
            reports.iter().map(|r| r.kind).collect::<Vec<_>>(),
            vec![ReportKind::HostComponent(HostComponent::ServiceNet, TriState::Broken)]
        );
        assert_eq!(reports[0].subject, NodeCoord::new(1, 0, 1));

        // clearing the neighbour flag produces all-clear reports
        regs.write(REMOTE_FAULT_ADDR, 0).unwrap();
        publish(&mut regs, DnpWatchdogRegister::healthy());
        let (_, reports) = h.poll_dnp(&mut regs, 62);
        assert_eq!(
            reports.iter().map(|r| r.kind).collect::<Vec<_>>(),
            vec![
                ReportKind::AllClear(Component::Host),
                ReportKind::AllClear(Component::HostPart(HostComponent::ServiceNet))
            ]
        );
    }

    #[test]
    fn sensor_and_core_changes() {
        let (mut h, mut regs) = host();
        let mut reg = DnpWatchdogRegister::healthy();
        reg.temperature = AlertState::Alarm;
        reg.dnp_core = CoreStatus::Sick;
        publish(&mut regs, reg);
        let kinds: Vec<_> = h.poll_dnp(&mut regs, 0).1.into_iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ReportKind::SensorAlert(Quantity::Temperature, AlertState::Alarm),
                ReportKind::DnpCoreSick
            ]
        );
        assert_eq!(h.sensor_alert(Quantity::Temperature), AlertState::Alarm);
        publish(&mut regs, DnpWatchdogRegister::healthy());
        let kinds: Vec<_> = h.poll_dnp(&mut regs, 12).1.into_iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ReportKind::SensorAlert(Quantity::Temperature, AlertState::Normal),
                ReportKind::AllClear(Component::DnpCore)
            ]
        );
    }
}
