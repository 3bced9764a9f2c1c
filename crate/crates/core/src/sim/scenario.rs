use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::network::{FaultEvent, FaultKind};
use crate::node::{Dims, NodeCoord, Quantity, SensorLimits, SensorThresholds, WatchdogTiming};
use crate::registers::temp_encode;

/// Protocol parameters, all times in ticks.
///
/// The DNP writes its watchdog register every `dnp_write_period` and the
/// host polls it every `host_read_period`; the host writes its own register
/// every `host_write_period` and the DNP polls it every `dnp_read_period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub dnp_write_period: u64,
    pub host_write_period: u64,
    pub dnp_read_period: u64,
    pub host_read_period: u64,
    pub miss_tolerance: u32,
    pub heartbeat_period: u64,
    /// Defaults to three heartbeat periods.
    pub heartbeat_timeout: Option<u64>,
    pub maxhops: u32,
    pub mesh_latency: u64,
    pub service_latency: u64,
    /// Background packets per tick on every healthy directed link.
    pub traffic_per_tick: u32,
    pub link_error_threshold: f64,
    pub link_window: u32,
    pub temperature_thresholds: [i32; 4],
    pub power_thresholds: [i32; 4],
    pub voltage_thresholds: [i32; 4],
    pub strict_masks: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        let limits = SensorLimits::default();
        Protocol {
            dnp_write_period: 5,
            host_write_period: 5,
            dnp_read_period: 12,
            host_read_period: 12,
            miss_tolerance: 2,
            heartbeat_period: 50,
            heartbeat_timeout: None,
            maxhops: 16,
            mesh_latency: 2,
            service_latency: 3,
            traffic_per_tick: 8,
            link_error_threshold: crate::node::DEFAULT_ERROR_THRESHOLD,
            link_window: crate::node::DEFAULT_WINDOW,
            temperature_thresholds: limits.temperature.bounds(),
            power_thresholds: limits.power.bounds(),
            voltage_thresholds: limits.voltage.bounds(),
            strict_masks: true,
        }
    }
}

impl Protocol {
    pub fn heartbeat_timeout(&self) -> u64 {
        self.heartbeat_timeout.unwrap_or(3 * self.heartbeat_period)
    }

    pub fn dnp_timing(&self) -> WatchdogTiming {
        WatchdogTiming {
            write_period: self.dnp_write_period,
            read_period: self.dnp_read_period,
            miss_tolerance: self.miss_tolerance,
        }
    }

    pub fn host_timing(&self) -> WatchdogTiming {
        WatchdogTiming {
            write_period: self.host_write_period,
            read_period: self.host_read_period,
            miss_tolerance: self.miss_tolerance,
        }
    }

    fn thresholds(&self, q: Quantity) -> [i32; 4] {
        match q {
            Quantity::Temperature => self.temperature_thresholds,
            Quantity::Power => self.power_thresholds,
            Quantity::Voltage => self.voltage_thresholds,
        }
    }

    /// Sensor limits; fails when a threshold set is not sorted.
    pub fn limits(&self) -> Result<SensorLimits, crate::node::NodeError> {
        Ok(SensorLimits {
            temperature: SensorThresholds::new(self.temperature_thresholds)?,
            power: SensorThresholds::new(self.power_thresholds)?,
            voltage: SensorThresholds::new(self.voltage_thresholds)?,
        })
    }

    /// Upper bound on injection-to-map latency for a single fault:
    /// K read periods, one mesh hop, one service hop and one heartbeat
    /// period of slack.
    pub fn awareness_bound(&self) -> u64 {
        let t_read = self.dnp_read_period.max(self.host_read_period);
        self.miss_tolerance as u64 * t_read + self.mesh_latency + self.service_latency + self.heartbeat_period
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dims: Dims,
    pub duration: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub faults: Vec<FaultEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn encodable(q: Quantity, v: i32) -> bool {
    match q {
        Quantity::Temperature => temp_encode(v).is_ok(),
        Quantity::Power | Quantity::Voltage => (0..=255).contains(&v),
    }
}

impl Scenario {
    pub fn new(dims: Dims, duration: u64, seed: u64) -> Self {
        Scenario {
            dims,
            duration,
            seed,
            protocol: Protocol::default(),
            faults: Vec::new(),
        }
    }

    pub fn with_fault(mut self, event: FaultEvent) -> Self {
        self.faults.push(event);
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let p = &self.protocol;
        let d = self.dims;
        if d.nx == 0 || d.ny == 0 || d.nz == 0 {
            v.push(Violation::new(
                "dims",
                format!("every extent must be at least 1, got {d}"),
            ));
        }
        if self.duration == 0 {
            v.push(Violation::new("duration", "must be positive"));
        }
        let periods = [
            ("dnp_write_period", p.dnp_write_period),
            ("host_write_period", p.host_write_period),
            ("dnp_read_period", p.dnp_read_period),
            ("host_read_period", p.host_read_period),
            ("heartbeat_period", p.heartbeat_period),
        ];
        for (name, val) in periods {
            if val == 0 {
                v.push(Violation::new(format!("protocol.{name}"), "must be positive"));
            }
        }
        if p.dnp_write_period >= p.host_read_period {
            v.push(Violation::new(
                "protocol.dnp_write_period",
                format!(
                    "watchdog period order: write period {} must be below read period {}",
                    p.dnp_write_period, p.host_read_period
                ),
            ));
        }
        if p.host_write_period >= p.dnp_read_period {
            v.push(Violation::new(
                "protocol.host_write_period",
                format!(
                    "watchdog period order: write period {} must be below read period {}",
                    p.host_write_period, p.dnp_read_period
                ),
            ));
        }
        if p.miss_tolerance == 0 {
            v.push(Violation::new("protocol.miss_tolerance", "must be at least 1"));
        }
        if p.heartbeat_timeout() <= p.heartbeat_period {
            v.push(Violation::new(
                "protocol.heartbeat_timeout",
                "must exceed the heartbeat period",
            ));
        }
        if !(0.0..=1.0).contains(&p.link_error_threshold) {
            v.push(Violation::new("protocol.link_error_threshold", "must lie in [0, 1]"));
        }
        if p.link_window == 0 {
            v.push(Violation::new("protocol.link_window", "must be positive"));
        }
        for q in Quantity::ALL {
            let field = format!("protocol.{}_thresholds", q.label());
            let b = p.thresholds(q);
            if !b.windows(2).all(|w| w[0] <= w[1]) {
                v.push(Violation::new(field, format!("unsorted thresholds {b:?}")));
            } else if !b.iter().all(|x| encodable(q, *x)) {
                v.push(Violation::new(
                    field,
                    format!("thresholds {b:?} do not fit the register"),
                ));
            }
        }
        for (i, f) in self.faults.iter().enumerate() {
            let field = format!("faults[{i}]");
            if f.time > self.duration {
                v.push(Violation::new(
                    field.clone(),
                    format!("event at t={} is after duration {}", f.time, self.duration),
                ));
            }
            if !d.contains(f.node) {
                v.push(Violation::new(field.clone(), format!("node {} outside {d}", f.node)));
            }
            match f.kind {
                FaultKind::LinkSick { error_rate, .. } if !(0.0..=1.0).contains(&error_rate) => {
                    v.push(Violation::new(field, format!("error rate {error_rate} outside [0, 1]")));
                }
                FaultKind::Sensor { quantity, value } if !encodable(quantity, value) => {
                    v.push(Violation::new(
                        field,
                        format!("{quantity} value {value} does not fit the register"),
                    ));
                }
                _ => {}
            }
        }
        v
    }

    /// Single-fault scenarios are the ones the latency bound applies to.
    pub fn is_single_fault(&self) -> bool {
        self.faults.len() == 1
    }

    pub fn node_count(&self) -> usize {
        self.dims.node_count()
    }

    pub fn center(&self) -> NodeCoord {
        NodeCoord::new(self.dims.nx / 2, self.dims.ny / 2, self.dims.nz / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registers::Direction;

    fn base() -> Scenario {
        Scenario::new(Dims::new(3, 3, 3), 400, 7)
    }

    #[test]
    fn default_is_valid() {
        assert!(base().validate().is_empty());
    }

    #[test]
    fn period_order_violation() {
        let mut sc = base();
        sc.protocol.dnp_write_period = 12;
        sc.protocol.host_write_period = 12;
        sc.protocol.dnp_read_period = 5;
        sc.protocol.host_read_period = 5;
        let v = sc.validate();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.message.contains("watchdog period order")));
        let mut sc = base();
        sc.protocol.host_write_period = 12;
        assert_eq!(sc.validate().len(), 1);
    }

    #[test]
    fn event_after_duration() {
        let sc = base().with_fault(FaultEvent::new(401, NodeCoord::new(0, 0, 0), FaultKind::HostBreakdown));
        let v = sc.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "faults[0]");
    }

    #[test]
    fn out_of_range_and_bad_params() {
        let sc = base()
            .with_fault(FaultEvent::new(1, NodeCoord::new(3, 0, 0), FaultKind::NodeKill))
            .with_fault(FaultEvent::new(
                1,
                NodeCoord::new(0, 0, 0),
                FaultKind::LinkSick {
                    dir: Direction::XPlus,
                    error_rate: 1.5,
                },
            ))
            .with_fault(FaultEvent::new(
                1,
                NodeCoord::new(0, 0, 0),
                FaultKind::Sensor {
                    quantity: Quantity::Temperature,
                    value: 200,
                },
            ));
        let fields: Vec<_> = sc.validate().into_iter().map(|v| v.field).collect();
        assert_eq!(fields, ["faults[0]", "faults[1]", "faults[2]"]);
    }

    #[test]
    fn unsorted_thresholds_and_zero_dims() {
        let mut sc = base();
        sc.protocol.power_thresholds = [5, 2, 40, 50];
        sc.dims = Dims::new(0, 3, 3);
        let v = sc.validate();
        assert!(v.iter().any(|x| x.field == "dims"));
        assert!(v.iter().any(|x| x.message.contains("unsorted thresholds")));
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            dims = [3, 3, 3]
            duration = 400
            seed = 42

            [protocol]
            heartbeat_period = 40

            [[faults]]
            time = 100
            node = [1, 1, 1]
            kind = "host-breakdown"

            [[faults]]
            time = 120
            node = [0, 1, 2]
            kind = "link-sick"
            dir = "X+"
            error_rate = 0.2
        "#;
        let sc = Scenario::from_toml_str(text).unwrap();
        assert_eq!(sc.protocol.heartbeat_period, 40);
        assert_eq!(sc.protocol.heartbeat_timeout(), 120);
        assert_eq!(sc.protocol.dnp_write_period, 5);
        assert_eq!(sc.faults.len(), 2);
        let again = Scenario::from_toml_str(&sc.to_toml_string()).unwrap();
        assert_eq!(again, sc);
    }

    #[test]
    fn unknown_protocol_key_rejected() {
        let text = "dims = [2,2,2]\nduration = 10\n[protocol]\nbogus = 1\n";
        assert!(matches!(Scenario::from_toml_str(text), Err(SimError::Parse(_))));
    }

    #[test]
    fn default_bound() {
        assert_eq!(Protocol::default().awareness_bound(), 2 * 12 + 2 + 3 + 50);
    }
}
