use super::{LinkMonitor, NodeCoord, NodeError, Quantity, SensorBlock, SensorLimits, WatchdogTiming};
use crate::network::{DiagnosticPacket, OriginKind};
use crate::registers::{
    pack_thresholds, temp_encode, CoreStatus, Direction, DnpWatchdogRegister, HostRemoteFaultDescriptor,
    HostWatchdogRegister, RegisterError, RegisterFile, TriState, DNP_WD_ADDR, HOST_WD_ADDR, MAXHOPS_ADDR, POWER_ADDR,
    POWER_THRESHOLDS_ADDR, REMOTE_FAULT_ADDR, ROUTER_EXCEPTIONS_ADDR, TEMPERATURE_ADDR, TEMP_THRESHOLDS_ADDR,
    VOLTAGE_ADDR, VOLTAGE_THRESHOLDS_ADDR,
};

/// Router exception bit raised when a diagnostic packet exceeds maxhops.
pub const MAXHOPS_EXCEPTION_BIT: u32 = 1 << 0;

pub const DEFAULT_MAXHOPS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostCheckOutcome {
    Fresh(HostWatchdogRegister),
    Missed,
    HostDeclaredDown,
}

/// Fault manager living inside the DNP.
///
/// Owns the register file that holds both watchdog registers; the host
/// side reaches it over the bus.
#[derive(Debug, Clone)]
pub struct DnpFaultManager {
    pub coord: NodeCoord,
    pub regfile: RegisterFile,
    pub link_monitors: [LinkMonitor; 6],
    pub sensors: SensorBlock,
    /// `write_period` is the DNP register update period, `read_period`
    /// the host watchdog polling period.
    pub timing: WatchdogTiming,
    limits: SensorLimits,
    consecutive_invalid_reads: u32,
    host_declared_down: bool,
    meltdown: bool,
    neighbor_host_fail: [bool; 6],
    remote: HostRemoteFaultDescriptor,
    relayed: Option<OriginKind>,
}

fn sensor_byte(q: Quantity, value: i32) -> Result<u8, RegisterError> {
    match q {
        Quantity::Temperature => temp_encode(value),
        Quantity::Power | Quantity::Voltage => u8::try_from(value).map_err(|_| RegisterError::OutOfRange(value)),
    }
}

const fn value_addr(q: Quantity) -> u32 {
    match q {
        Quantity::Temperature => TEMPERATURE_ADDR,
        Quantity::Power => POWER_ADDR,
        Quantity::Voltage => VOLTAGE_ADDR,
    }
}

const fn threshold_addr(q: Quantity) -> u32 {
    match q {
        Quantity::Temperature => TEMP_THRESHOLDS_ADDR,
        Quantity::Power => POWER_THRESHOLDS_ADDR,
        Quantity::Voltage => VOLTAGE_THRESHOLDS_ADDR,
    }
}

impl DnpFaultManager {
    pub fn new(coord: NodeCoord, timing: WatchdogTiming) -> Self {
        let mut fm = DnpFaultManager {
            coord,
            regfile: RegisterFile::dnp_vep(true),
            link_monitors: Direction::ALL.map(LinkMonitor::new),
            sensors: SensorBlock::default(),
            timing,
            limits: SensorLimits::default(),
            consecutive_invalid_reads: 0,
            host_declared_down: false,
            meltdown: false,
            neighbor_host_fail: [false; 6],
            remote: HostRemoteFaultDescriptor::default(),
            relayed: None,
        };
        fm.set_limits(SensorLimits::default()).expect("default limits encode");
        fm.set_maxhops(DEFAULT_MAXHOPS).expect("default maxhops fits");
        fm
    }

    pub fn set_limits(&mut self, limits: SensorLimits) -> Result<(), NodeError> {
        for q in Quantity::ALL {
            let b = limits.get(q).bounds();
            let mut bytes = [0u8; 4];
            for (dst, v) in bytes.iter_mut().zip(b) {
                *dst = sensor_byte(q, v)?;
            }
            self.regfile.write(threshold_addr(q), pack_thresholds(bytes))?;
        }
        self.limits = limits;
        Ok(())
    }

    pub fn limits(&self) -> SensorLimits {
        self.limits
    }

    pub fn set_maxhops(&mut self, maxhops: u32) -> Result<(), NodeError> {
        Ok(self.regfile.write(MAXHOPS_ADDR, maxhops)?)
    }

    pub fn set_sensor(&mut self, q: Quantity, value: i32) -> Result<(), NodeError> {
        sensor_byte(q, value)?;
        self.sensors.set(q, value);
        Ok(())
    }

    pub fn configure_links(&mut self, error_ratio_threshold: f64, window: u32) {
        self.link_monitors = Direction::ALL.map(|d| LinkMonitor::with_window(d, error_ratio_threshold, window));
    }

    pub fn raise_exception(&mut self, addr: u32, bits: u32) -> Result<(), NodeError> {
        Ok(self.regfile.set_bits(addr, bits)?)
    }

    pub fn melt_down(&mut self) {
        self.meltdown = true;
    }

    pub fn is_melted(&self) -> bool {
        self.meltdown
    }

    pub fn host_declared_down(&self) -> bool {
        self.host_declared_down
    }

    pub fn consecutive_invalid_reads(&self) -> u32 {
        self.consecutive_invalid_reads
    }

    pub fn neighbor_host_fail(&self, dir: Direction) -> bool {
        self.neighbor_host_fail[dir.index()]
    }

    pub fn link_status(&self, dir: Direction) -> TriState {
        self.link_monitors[dir.index()].status()
    }

    pub fn core_status(&self) -> CoreStatus {
        if self.regfile.core_exception_raised() {
            CoreStatus::Sick
        } else {
            CoreStatus::Normal
        }
    }

    /// Current status as this manager would publish it.
    pub fn status(&self) -> DnpWatchdogRegister {
        DnpWatchdogRegister {
            valid: true,
            neighbor_host_fail: self.neighbor_host_fail,
            dnp_core: self.core_status(),
            power: self.limits.power.classify(self.sensors.power),
            voltage: self.limits.voltage.classify(self.sensors.voltage),
            temperature: self.limits.temperature.classify(self.sensors.temperature_c),
            link_status: Direction::ALL.map(|d| self.link_status(d)),
        }
    }

    /// Periodic update: mirror sensors into their registers and publish a
    /// validated watchdog word. A melted-down core does nothing.
    pub fn update_watchdog(&mut self) -> Option<DnpWatchdogRegister> {
        if self.meltdown {
            return None;
        }
        for q in Quantity::ALL {
            // values were range-checked by set_sensor
            let byte = sensor_byte(q, self.sensors.get(q)).unwrap_or(0);
            self.regfile
                .write(value_addr(q), byte as u32)
                .expect("sensor registers are byte wide");
        }
        let reg = self.status();
        self.regfile
            .write(DNP_WD_ADDR, reg.encode())
            .expect("watchdog word fits its mask");
        Some(reg)
    }

    /// Reads and invalidates the host watchdog register.
    pub fn check_host(&mut self) -> HostCheckOutcome {
        let word = self.regfile.read(HOST_WD_ADDR).expect("host wd is mapped");
        match HostWatchdogRegister::decode(word) {
            Ok(reg) if reg.valid => {
                self.regfile
                    .write(HOST_WD_ADDR, word & !1)
                    .expect("clearing valid stays in mask");
                self.consecutive_invalid_reads = 0;
                self.host_declared_down = false;
                HostCheckOutcome::Fresh(reg)
            }
            // stale or garbled content counts as a missed update
            _ => {
                self.consecutive_invalid_reads = self.consecutive_invalid_reads.saturating_add(1);
                if !self.host_declared_down && self.consecutive_invalid_reads >= self.timing.miss_tolerance {
                    self.host_declared_down = true;
                    HostCheckOutcome::HostDeclaredDown
                } else {
                    HostCheckOutcome::Missed
                }
            }
        }
    }

    /// What, if anything, must now be relayed to the neighbours given the
    /// latest host check. Only changes are relayed.
    pub fn relay_decision(&mut self, outcome: &HostCheckOutcome) -> Option<OriginKind> {
        let wanted = match outcome {
            HostCheckOutcome::HostDeclaredDown => Some(OriginKind::HostTotalBreakdown),
            HostCheckOutcome::Fresh(reg) if reg.service_net == TriState::Broken => {
                Some(OriginKind::HostComponentFault(reg.broken_components()))
            }
            HostCheckOutcome::Fresh(_) => None,
            HostCheckOutcome::Missed => return None,
        };
        if wanted == self.relayed {
            return None;
        }
        let previous = std::mem::replace(&mut self.relayed, wanted);
        match wanted {
            Some(origin) => Some(origin),
            None if previous.is_some() => Some(OriginKind::AllClear),
            None => None,
        }
    }

    /// One diagnostic packet per link that is not broken.
    pub fn relay_host_fault(
        &self,
        origin: OriginKind,
        now: u64,
    ) -> Result<Vec<(Direction, DiagnosticPacket)>, NodeError> {
        let packets: Vec<_> = Direction::ALL
            .into_iter()
            .filter(|d| self.link_status(*d) != TriState::Broken)
            .map(|d| (d, DiagnosticPacket::new(self.coord, origin, now)))
            .collect();
        if packets.is_empty() {
            return Err(NodeError::NoLiveLinks);
        }
        Ok(packets)
    }

    /// Handles a diagnostic packet that arrived on port `port`.
    pub fn receive_diagnostic(&mut self, port: Direction, pkt: &DiagnosticPacket) -> Result<(), NodeError> {
        let maxhops = self.regfile.read(MAXHOPS_ADDR)?;
        if pkt.hops > maxhops {
            self.regfile.set_bits(ROUTER_EXCEPTIONS_ADDR, MAXHOPS_EXCEPTION_BIT)?;
            return Err(NodeError::HopLimitExceeded {
                hops: pkt.hops,
                maxhops,
            });
        }
        self.link_monitors[port.index()].record_good(1);
        let i = port.index();
        match pkt.origin {
            OriginKind::HostTotalBreakdown => {
                self.neighbor_host_fail[i] = true;
                self.remote.set(port, Default::default());
            }
            OriginKind::HostComponentFault(detail) => {
                self.neighbor_host_fail[i] = true;
                self.remote.set(port, detail);
            }
            OriginKind::AllClear => {
                self.neighbor_host_fail[i] = false;
                self.remote.set(port, Default::default());
            }
        }
        self.regfile.write(REMOTE_FAULT_ADDR, self.remote.encode())?;
        Ok(())
    }

    /// A packet on `port` failed its CRC and was discarded.
    pub fn receive_corrupted(&mut self, port: Direction) {
        self.link_monitors[port.index()].record_errors(1);
    }
}
