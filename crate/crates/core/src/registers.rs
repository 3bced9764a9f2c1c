//! Bit-exact codecs for the three watchdog/status registers and the DNP
//! register file they live in.
//!
//! Layouts (bit 0 is the least significant bit):
//!
//! ```text
//! DNP local/global watchdog (mask 0x07ffffff)
//!   0       valid
//!   1..=6   neighbour host fails, Z- Z+ Y- Y+ X- X+
//!   7..=8   DNP core status
//!   9..=10  power      11..=12 voltage      13..=14 temperature
//!   15..=26 link status, 2 bits each, Z- Z+ Y- Y+ X- X+
//!
//! Host watchdog (mask 0x000001ff)
//!   0 valid, 1..=2 service net, 3..=4 memory, 5..=6 peripheral 0, 7..=8 peripheral 1
//!
//! Host remote fault descriptor (mask 0x00ffffff)
//!   4 bits per direction d at 4d..4d+3: service net, memory, peripheral 0, peripheral 1
//! ```
//!
//! Every 2-bit status field treats `11` as an illegal code.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegisterError {
    #[error("{field} field illegal code {code:02b}")]
    IllegalEncoding { field: String, code: u32 },
    #[error("{register}: reserved bits set ({bits:#010x})")]
    ReservedBits { register: &'static str, bits: u32 },
    #[error("temperature {0} C is outside [-128, 127]")]
    OutOfRange(i32),
    #[error("unmapped register address {0:#010x}")]
    UnmappedAddress(u32),
    #[error("write of {word:#010x} to {addr:#010x} exceeds mask {mask:#010x}")]
    MaskViolation { addr: u32, word: u32, mask: u32 },
    #[error("malformed dump line {line}: {reason}")]
    MalformedDump { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, RegisterError>;

/// Status of a link or host component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriState {
    #[default]
    Normal,
    Sick,
    Broken,
}

impl TriState {
    pub const fn code(self) -> u32 {
        match self {
            TriState::Normal => 0b00,
            TriState::Sick => 0b01,
            TriState::Broken => 0b10,
        }
    }

    pub fn from_code(code: u32, field: &str) -> Result<Self> {
        match code {
            0b00 => Ok(TriState::Normal),
            0b01 => Ok(TriState::Sick),
            0b10 => Ok(TriState::Broken),
            _ => Err(illegal(field, code)),
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            TriState::Normal => "NORMAL",
            TriState::Sick => "SICK",
            TriState::Broken => "BROKEN",
        }
    }
}

/// Status of a sensed quantity (power, voltage, temperature).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlertState {
    #[default]
    Normal,
    Warning,
    Alarm,
}

impl AlertState {
    pub const fn code(self) -> u32 {
        match self {
            AlertState::Normal => 0b00,
            AlertState::Warning => 0b01,
            AlertState::Alarm => 0b10,
        }
    }

    pub fn from_code(code: u32, field: &str) -> Result<Self> {
        match code {
            0b00 => Ok(AlertState::Normal),
            0b01 => Ok(AlertState::Warning),
            0b10 => Ok(AlertState::Alarm),
            _ => Err(illegal(field, code)),
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            AlertState::Normal => "NORMAL",
            AlertState::Warning => "WARNING",
            AlertState::Alarm => "ALARM",
        }
    }
}

/// DNP core status field. `Reserved` is the unassigned `10` code: it decodes
/// but fault managers never write it (a dead core is signalled by a stale
/// valid bit instead).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CoreStatus {
    #[default]
    Normal,
    Sick,
    Reserved,
}

impl CoreStatus {
    pub const fn code(self) -> u32 {
        match self {
            CoreStatus::Normal => 0b00,
            CoreStatus::Sick => 0b01,
            CoreStatus::Reserved => 0b10,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0b00 => Ok(CoreStatus::Normal),
            0b01 => Ok(CoreStatus::Sick),
            0b10 => Ok(CoreStatus::Reserved),
            _ => Err(illegal("dnp_core", code)),
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            CoreStatus::Normal => "NORMAL",
            CoreStatus::Sick => "SICK",
            CoreStatus::Reserved => "RESERVED",
        }
    }
}

fn illegal(field: &str, code: u32) -> RegisterError {
    RegisterError::IllegalEncoding {
        field: field.to_string(),
        code,
    }
}

/// One of the six torus directions. The declaration order is the field
/// order used by every register: Z-, Z+, Y-, Y+, X-, X+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "Z-")]
    ZMinus,
    #[serde(rename = "Z+")]
    ZPlus,
    #[serde(rename = "Y-")]
    YMinus,
    #[serde(rename = "Y+")]
    YPlus,
    #[serde(rename = "X-")]
    XMinus,
    #[serde(rename = "X+")]
    XPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::ZMinus,
        Direction::ZPlus,
        Direction::YMinus,
        Direction::YPlus,
        Direction::XMinus,
        Direction::XPlus,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn from_index(i: usize) -> Direction {
        Direction::ALL[i]
    }

    pub const fn axis(self) -> Axis {
        match self {
            Direction::ZMinus | Direction::ZPlus => Axis::Z,
            Direction::YMinus | Direction::YPlus => Axis::Y,
            Direction::XMinus | Direction::XPlus => Axis::X,
        }
    }

    pub const fn is_positive(self) -> bool {
        matches!(self, Direction::ZPlus | Direction::YPlus | Direction::XPlus)
    }

    pub const fn opposite(self) -> Direction {
        match self {
            Direction::ZMinus => Direction::ZPlus,
            Direction::ZPlus => Direction::ZMinus,
            Direction::YMinus => Direction::YPlus,
            Direction::YPlus => Direction::YMinus,
            Direction::XMinus => Direction::XPlus,
            Direction::XPlus => Direction::XMinus,
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            Direction::ZMinus => "Z-",
            Direction::ZPlus => "Z+",
            Direction::YMinus => "Y-",
            Direction::YPlus => "Y+",
            Direction::XMinus => "X-",
            Direction::XPlus => "X+",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Direction::ALL
            .into_iter()
            .find(|d| d.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown direction {s:?}"))
    }
}

/// Host-side components tracked by the host watchdog register, in field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HostComponent {
    ServiceNet,
    Memory,
    Peripheral0,
    Peripheral1,
}

impl HostComponent {
    pub const ALL: [HostComponent; 4] = [
        HostComponent::ServiceNet,
        HostComponent::Memory,
        HostComponent::Peripheral0,
        HostComponent::Peripheral1,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn label(self) -> &'static str {
        match self {
            HostComponent::ServiceNet => "service_net",
            HostComponent::Memory => "memory",
            HostComponent::Peripheral0 => "peripheral0",
            HostComponent::Peripheral1 => "peripheral1",
        }
    }
}

#[inline]
fn field(word: u32, shift: u32, width: u32) -> u32 {
    (word >> shift) & ((1 << width) - 1)
}

#[inline]
fn bit(word: u32, shift: u32) -> bool {
    word >> shift & 1 == 1
}

fn check_reserved(word: u32, mask: u32, register: &'static str) -> Result<()> {
    let extra = word & !mask;
    if extra != 0 {
        return Err(RegisterError::ReservedBits { register, bits: extra });
    }
    Ok(())
}

pub const DNP_WD_MASK: u32 = 0x07ff_ffff;
pub const HOST_WD_MASK: u32 = 0x0000_01ff;
pub const REMOTE_FAULT_MASK: u32 = 0x00ff_ffff;

const NEIGHBOR_HOST_SHIFT: u32 = 1;
const CORE_SHIFT: u32 = 7;
const POWER_SHIFT: u32 = 9;
const VOLTAGE_SHIFT: u32 = 11;
const TEMPERATURE_SHIFT: u32 = 13;
const LINK_SHIFT: u32 = 15;

/// DNP local/global watchdog register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DnpWatchdogRegister {
    pub valid: bool,
    /// Indexed by [`Direction::index`]; `true` means the neighbour host fails.
    pub neighbor_host_fail: [bool; 6],
    pub dnp_core: CoreStatus,
    pub power: AlertState,
    pub voltage: AlertState,
    pub temperature: AlertState,
    /// Indexed by [`Direction::index`].
    pub link_status: [TriState; 6],
}

impl DnpWatchdogRegister {
    pub fn healthy() -> Self {
        DnpWatchdogRegister {
            valid: true,
            ..Default::default()
        }
    }

    pub fn link(&self, dir: Direction) -> TriState {
        self.link_status[dir.index()]
    }

    pub fn host_fails(&self, dir: Direction) -> bool {
        self.neighbor_host_fail[dir.index()]
    }

    pub fn encode(&self) -> u32 {
        let mut word = self.valid as u32;
        for (i, &fail) in self.neighbor_host_fail.iter().enumerate() {
            word |= (fail as u32) << (NEIGHBOR_HOST_SHIFT + i as u32);
        }
        word |= self.dnp_core.code() << CORE_SHIFT;
        word |= self.power.code() << POWER_SHIFT;
        word |= self.voltage.code() << VOLTAGE_SHIFT;
        word |= self.temperature.code() << TEMPERATURE_SHIFT;
        for (i, status) in self.link_status.iter().enumerate() {
            word |= status.code() << (LINK_SHIFT + 2 * i as u32);
        }
        word
    }

    pub fn decode(word: u32) -> Result<Self> {
        check_reserved(word, DNP_WD_MASK, "dnp-wd")?;
        let mut neighbor_host_fail = [false; 6];
        for (i, fail) in neighbor_host_fail.iter_mut().enumerate() {
            *fail = bit(word, NEIGHBOR_HOST_SHIFT + i as u32);
        }
        let mut link_status = [TriState::Normal; 6];
        for (i, status) in link_status.iter_mut().enumerate() {
            let name = format!("link {}", Direction::from_index(i));
            *status = TriState::from_code(field(word, LINK_SHIFT + 2 * i as u32, 2), &name)?;
        }
        Ok(DnpWatchdogRegister {
            valid: bit(word, 0),
            neighbor_host_fail,
            dnp_core: CoreStatus::from_code(field(word, CORE_SHIFT, 2))?,
            power: AlertState::from_code(field(word, POWER_SHIFT, 2), "power")?,
            voltage: AlertState::from_code(field(word, VOLTAGE_SHIFT, 2), "voltage")?,
            temperature: AlertState::from_code(field(word, TEMPERATURE_SHIFT, 2), "temperature")?,
            link_status,
        })
    }
}

impl fmt::Display for DnpWatchdogRegister {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.valid { "valid" } else { "not-valid" })?;
        let failing: Vec<&str> = Direction::ALL
            .iter()
            .filter(|d| self.host_fails(**d))
            .map(|d| d.label())
            .collect();
        if failing.is_empty() {
            f.write_str("; neighbor_hosts=ok")?;
        } else {
            write!(f, "; neighbor_hosts_failing={}", failing.join(","))?;
        }
        write!(
            f,
            "; dnp_core={}; power={}; voltage={}; temperature={}",
            self.dnp_core.label(),
            self.power.label(),
            self.voltage.label(),
            self.temperature.label()
        )?;
        for d in Direction::ALL {
            write!(f, "; link_{}={}", d, self.link(d).label())?;
        }
        Ok(())
    }
}

/// Host local watchdog register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HostWatchdogRegister {
    pub valid: bool,
    pub service_net: TriState,
    pub memory: TriState,
    pub peripheral0: TriState,
    pub peripheral1: TriState,
}

impl HostWatchdogRegister {
    pub fn healthy() -> Self {
        HostWatchdogRegister {
            valid: true,
            ..Default::default()
        }
    }

    pub fn component(&self, c: HostComponent) -> TriState {
        match c {
            HostComponent::ServiceNet => self.service_net,
            HostComponent::Memory => self.memory,
            HostComponent::Peripheral0 => self.peripheral0,
            HostComponent::Peripheral1 => self.peripheral1,
        }
    }

    pub fn set_component(&mut self, c: HostComponent, status: TriState) {
        match c {
            HostComponent::ServiceNet => self.service_net = status,
            HostComponent::Memory => self.memory = status,
            HostComponent::Peripheral0 => self.peripheral0 = status,
            HostComponent::Peripheral1 => self.peripheral1 = status,
        }
    }

    /// Broken components, as the nibble relayed to neighbours.
    pub fn broken_components(&self) -> RemoteHostFault {
        RemoteHostFault {
            service_net_broken: self.service_net == TriState::Broken,
            memory_broken: self.memory == TriState::Broken,
            peripheral0_broken: self.peripheral0 == TriState::Broken,
            peripheral1_broken: self.peripheral1 == TriState::Broken,
        }
    }

    pub fn encode(&self) -> u32 {
        let mut word = self.valid as u32;
        for c in HostComponent::ALL {
            word |= self.component(c).code() << (1 + 2 * c.index() as u32);
        }
        word
    }

    pub fn decode(word: u32) -> Result<Self> {
        check_reserved(word, HOST_WD_MASK, "host-wd")?;
        let mut reg = HostWatchdogRegister {
            valid: bit(word, 0),
            ..Default::default()
        };
        for c in HostComponent::ALL {
            let status = TriState::from_code(field(word, 1 + 2 * c.index() as u32, 2), c.label())?;
            reg.set_component(c, status);
        }
        Ok(reg)
    }
}

impl fmt::Display for HostWatchdogRegister {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.valid { "valid" } else { "not-valid" })?;
        for c in HostComponent::ALL {
            write!(f, "; {}={}", c.label(), self.component(c).label())?;
        }
        Ok(())
    }
}

/// Broken-component flags for one neighbouring host (one nibble of the
/// remote fault descriptor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RemoteHostFault {
    pub service_net_broken: bool,
    pub memory_broken: bool,
    pub peripheral0_broken: bool,
    pub peripheral1_broken: bool,
}

impl RemoteHostFault {
    pub fn from_nibble(nibble: u32) -> Self {
        RemoteHostFault {
            service_net_broken: bit(nibble, 0),
            memory_broken: bit(nibble, 1),
            peripheral0_broken: bit(nibble, 2),
            peripheral1_broken: bit(nibble, 3),
        }
    }

    pub fn nibble(&self) -> u32 {
        self.service_net_broken as u32
            | (self.memory_broken as u32) << 1
            | (self.peripheral0_broken as u32) << 2
            | (self.peripheral1_broken as u32) << 3
    }

    pub fn is_clear(&self) -> bool {
        self.nibble() == 0
    }

    pub fn is_broken(&self, c: HostComponent) -> bool {
        bit(self.nibble(), c.index() as u32)
    }

    pub fn broken(&self) -> impl Iterator<Item = HostComponent> + '_ {
        HostComponent::ALL.into_iter().filter(|c| self.is_broken(*c))
    }
}

/// Host remote fault descriptor register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HostRemoteFaultDescriptor {
    /// Indexed by [`Direction::index`].
    pub per_direction: [RemoteHostFault; 6],
}

impl HostRemoteFaultDescriptor {
    pub fn get(&self, dir: Direction) -> RemoteHostFault {
        self.per_direction[dir.index()]
    }

    pub fn set(&mut self, dir: Direction, fault: RemoteHostFault) {
        self.per_direction[dir.index()] = fault;
    }

    pub fn encode(&self) -> u32 {
        self.per_direction
            .iter()
            .enumerate()
            .fold(0, |word, (i, f)| word | f.nibble() << (4 * i))
    }

    pub fn decode(word: u32) -> Result<Self> {
        check_reserved(word, REMOTE_FAULT_MASK, "remote-fault")?;
        let mut per_direction = [RemoteHostFault::default(); 6];
        for (i, f) in per_direction.iter_mut().enumerate() {
            *f = RemoteHostFault::from_nibble(field(word, 4 * i as u32, 4));
        }
        Ok(HostRemoteFaultDescriptor { per_direction })
    }
}

impl fmt::Display for HostRemoteFaultDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut any = false;
        for d in Direction::ALL {
            let fault = self.get(d);
            for c in fault.broken() {
                if any {
                    f.write_str("; ")?;
                }
                write!(f, "{}_{}=BROKEN", d, c.label())?;
                any = true;
            }
        }
        if !any {
            f.write_str("no remote faults")?;
        }
        Ok(())
    }
}

pub fn encode_dnp_wd(reg: &DnpWatchdogRegister) -> u32 {
    reg.encode()
}

pub fn decode_dnp_wd(word: u32) -> Result<DnpWatchdogRegister> {
    DnpWatchdogRegister::decode(word)
}

pub fn encode_host_wd(reg: &HostWatchdogRegister) -> u32 {
    reg.encode()
}

pub fn decode_host_wd(word: u32) -> Result<HostWatchdogRegister> {
    HostWatchdogRegister::decode(word)
}

pub fn encode_remote_fault(reg: &HostRemoteFaultDescriptor) -> u32 {
    reg.encode()
}

pub fn decode_remote_fault(word: u32) -> Result<HostRemoteFaultDescriptor> {
    HostRemoteFaultDescriptor::decode(word)
}

/// Temperature register byte: offset-128 encoding of whole degrees Celsius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemperatureCode(pub u8);

impl TemperatureCode {
    pub fn from_celsius(celsius: i32) -> Result<Self> {
        temp_encode(celsius).map(TemperatureCode)
    }

    pub fn celsius(self) -> i32 {
        temp_decode(self.0)
    }
}

pub fn temp_encode(celsius: i32) -> Result<u8> {
    if !(-128..=127).contains(&celsius) {
        return Err(RegisterError::OutOfRange(celsius));
    }
    Ok((celsius + 128) as u8)
}

pub fn temp_decode(raw: u8) -> i32 {
    raw as i32 - 128
}

/// Packs four threshold bytes (lowest boundary first) into one little-endian word.
pub fn pack_thresholds(bounds: [u8; 4]) -> u32 {
    u32::from_le_bytes(bounds)
}

pub fn unpack_thresholds(word: u32) -> [u8; 4] {
    word.to_le_bytes()
}

pub const DNP_WD_ADDR: u32 = 0x0000_0ec0;
pub const HOST_WD_ADDR: u32 = 0x0000_0ec4;
pub const REMOTE_FAULT_ADDR: u32 = 0x0000_0ec8;
pub const TEMPERATURE_ADDR: u32 = 0x0000_0f40;
/// Artifact-assigned: the source address map leaves power and voltage TBD.
pub const POWER_ADDR: u32 = 0x0000_0f44;
/// Artifact-assigned.
pub const VOLTAGE_ADDR: u32 = 0x0000_0f48;
pub const TEMP_THRESHOLDS_ADDR: u32 = 0x0000_0f00;
/// Artifact-assigned.
pub const POWER_THRESHOLDS_ADDR: u32 = 0x0000_0f10;
/// Artifact-assigned.
pub const VOLTAGE_THRESHOLDS_ADDR: u32 = 0x0000_0f20;
pub const MAXHOPS_ADDR: u32 = 0x0000_0008;
pub const ROUTER_EXCEPTIONS_ADDR: u32 = 0x0000_0140;
pub const ROUTER_EXCEPTIONS_HI_ADDR: u32 = 0x0000_0144;
pub const CHANNEL_XP_EXCEPTIONS_ADDR: u32 = 0x0000_0440;
pub const CHANNEL_XM_EXCEPTIONS_ADDR: u32 = 0x0000_0540;
pub const CHANNEL_YP_EXCEPTIONS_ADDR: u32 = 0x0000_0640;
pub const CHANNEL_YM_EXCEPTIONS_ADDR: u32 = 0x0000_0740;
pub const CHANNEL_ZP_EXCEPTIONS_ADDR: u32 = 0x0000_0840;
pub const CHANNEL_ZM_EXCEPTIONS_ADDR: u32 = 0x0000_0940;
pub const RDMA_EXCEPTIONS_ADDR: u32 = 0x0000_0240;
pub const ENGINE_EXCEPTIONS_ADDR: u32 = 0x0000_00c0;

/// Exception registers whose non-zero content makes the DNP core sick.
pub const CORE_EXCEPTION_ADDRS: [u32; 4] = [
    ROUTER_EXCEPTIONS_ADDR,
    ROUTER_EXCEPTIONS_HI_ADDR,
    RDMA_EXCEPTIONS_ADDR,
    ENGINE_EXCEPTIONS_ADDR,
];

/// `(address, mask, name)` for every mapped DNP-VEP register.
pub const DNP_VEP_MAP: [(u32, u32, &str); 20] = [
    (DNP_WD_ADDR, DNP_WD_MASK, "dnp-wd"),
    (HOST_WD_ADDR, HOST_WD_MASK, "host-wd"),
    (REMOTE_FAULT_ADDR, REMOTE_FAULT_MASK, "remote-fault"),
    (TEMPERATURE_ADDR, 0x0000_00ff, "temp"),
    (POWER_ADDR, 0x0000_00ff, "power"),
    (VOLTAGE_ADDR, 0x0000_00ff, "voltage"),
    (TEMP_THRESHOLDS_ADDR, 0xffff_ffff, "temp-thresholds"),
    (POWER_THRESHOLDS_ADDR, 0xffff_ffff, "power-thresholds"),
    (VOLTAGE_THRESHOLDS_ADDR, 0xffff_ffff, "voltage-thresholds"),
    (MAXHOPS_ADDR, 0x0000_00ff, "maxhops"),
    (ROUTER_EXCEPTIONS_ADDR, 0xffff_ffff, "router-exceptions"),
    (ROUTER_EXCEPTIONS_HI_ADDR, 0x0000_3fff, "router-exceptions-hi"),
    (CHANNEL_XP_EXCEPTIONS_ADDR, 0x0000_00ff, "channel-xp-exceptions"),
    (CHANNEL_XM_EXCEPTIONS_ADDR, 0x0000_00ff, "channel-xm-exceptions"),
    (CHANNEL_YP_EXCEPTIONS_ADDR, 0x0000_00ff, "channel-yp-exceptions"),
    (CHANNEL_YM_EXCEPTIONS_ADDR, 0x0000_00ff, "channel-ym-exceptions"),
    (CHANNEL_ZP_EXCEPTIONS_ADDR, 0x0000_00ff, "channel-zp-exceptions"),
    (CHANNEL_ZM_EXCEPTIONS_ADDR, 0x0000_00ff, "channel-zm-exceptions"),
    (RDMA_EXCEPTIONS_ADDR, 0x0000_00ff, "rdma-exceptions"),
    (ENGINE_EXCEPTIONS_ADDR, 0x0000_0fff, "engine-exceptions"),
];

pub fn register_name(addr: u32) -> Option<&'static str> {
    DNP_VEP_MAP.iter().find(|(a, _, _)| *a == addr).map(|(_, _, n)| *n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    mask: u32,
    value: u32,
}

/// Memory-mapped DNP register file.
///
/// In strict mode a write carrying bits outside the register mask is
/// rejected; in permissive mode those bits are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    slots: BTreeMap<u32, Slot>,
    strict: bool,
}

impl Default for RegisterFile {
    fn default() -> Self {
        RegisterFile::dnp_vep(true)
    }
}

impl RegisterFile {
    /// All DNP-VEP registers, zeroed.
    pub fn dnp_vep(strict: bool) -> Self {
        let slots = DNP_VEP_MAP
            .iter()
            .map(|&(addr, mask, _)| (addr, Slot { mask, value: 0 }))
            .collect();
        RegisterFile { slots, strict }
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn mask(&self, addr: u32) -> Result<u32> {
        self.slots
            .get(&addr)
            .map(|s| s.mask)
            .ok_or(RegisterError::UnmappedAddress(addr))
    }

    pub fn read(&self, addr: u32) -> Result<u32> {
        self.slots
            .get(&addr)
            .map(|s| s.value)
            .ok_or(RegisterError::UnmappedAddress(addr))
    }

    pub fn write(&mut self, addr: u32, word: u32) -> Result<()> {
        let strict = self.strict;
        let slot = self.slots.get_mut(&addr).ok_or(RegisterError::UnmappedAddress(addr))?;
        if strict && word & !slot.mask != 0 {
            return Err(RegisterError::MaskViolation {
                addr,
                word,
                mask: slot.mask,
            });
        }
        slot.value = word & slot.mask;
        Ok(())
    }

    /// ORs `bits` into a register.
    pub fn set_bits(&mut self, addr: u32, bits: u32) -> Result<()> {
        let current = self.read(addr)?;
        self.write(addr, current | bits)
    }

    pub fn core_exception_raised(&self) -> bool {
        CORE_EXCEPTION_ADDRS.iter().any(|a| self.read(*a).unwrap_or(0) != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.slots.iter().map(|(a, s)| (*a, s.value))
    }

    /// `address: value` lines, eight hex digits each, ascending address.
    pub fn dump(&self) -> String {
        format_dump(self.iter())
    }
}

pub fn format_dump(entries: impl IntoIterator<Item = (u32, u32)>) -> String {
    let mut out = String::new();
    for (addr, value) in entries {
        out.push_str(&format!("{addr:08x}: {value:08x}\n"));
    }
    out
}

/// Parses `address: value` lines. Blank lines and `#` comments are skipped.
pub fn parse_dump(text: &str) -> Result<Vec<(u32, u32)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| RegisterError::MalformedDump {
            line: i + 1,
            reason: reason.to_string(),
        };
        let (addr, value) = line
            .split_once(':')
            .ok_or_else(|| malformed("expected `address: value`"))?;
        let (addr, value) = (addr.trim(), value.trim());
        if addr.len() != 8 || value.len() != 8 {
            return Err(malformed("fields must be 8 hex digits"));
        }
        let addr = u32::from_str_radix(addr, 16).map_err(|_| malformed("bad address"))?;
        let value = u32::from_str_radix(value, 16).map_err(|_| malformed("bad value"))?;
        entries.push((addr, value));
    }
    Ok(entries)
}
