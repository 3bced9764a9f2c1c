use std::fmt;

use serde::{Deserialize, Serialize};

use super::NodeError;
use crate::registers::AlertState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Temperature,
    Power,
    Voltage,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Temperature, Quantity::Power, Quantity::Voltage];

    pub const fn label(self) -> &'static str {
        match self {
            Quantity::Temperature => "temperature",
            Quantity::Power => "power",
            Quantity::Voltage => "voltage",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Four non-decreasing boundaries `b1 <= b2 <= b3 <= b4` splitting the
/// value axis into alarm / warning / normal / warning / alarm zones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i32; 4]", into = "[i32; 4]")]
pub struct SensorThresholds([i32; 4]);

impl SensorThresholds {
    pub fn new(bounds: [i32; 4]) -> Result<Self, NodeError> {
        if bounds.windows(2).all(|w| w[0] <= w[1]) {
            Ok(SensorThresholds(bounds))
        } else {
            Err(NodeError::InvalidThresholds(bounds))
        }
    }

    pub fn bounds(&self) -> [i32; 4] {
        self.0
    }

    pub fn classify(&self, value: i32) -> AlertState {
        let [b1, b2, b3, b4] = self.0;
        if value < b1 || value >= b4 {
            AlertState::Alarm
        } else if value < b2 || value >= b3 {
            AlertState::Warning
        } else {
            AlertState::Normal
        }
    }

    /// Celsius defaults; 85 C is the upper alarm edge.
    pub const fn default_temperature() -> Self {
        SensorThresholds([-10, 0, 70, 85])
    }

    /// Watts.
    pub const fn default_power() -> Self {
        SensorThresholds([2, 5, 40, 50])
    }

    /// Units of 10 mV.
    pub const fn default_voltage() -> Self {
        SensorThresholds([100, 110, 130, 140])
    }
}

impl TryFrom<[i32; 4]> for SensorThresholds {
    type Error = NodeError;

    fn try_from(bounds: [i32; 4]) -> Result<Self, Self::Error> {
        SensorThresholds::new(bounds)
    }
}

impl From<SensorThresholds> for [i32; 4] {
    fn from(t: SensorThresholds) -> Self {
        t.0
    }
}

/// Thresholds for all three sensed quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorLimits {
    pub temperature: SensorThresholds,
    pub power: SensorThresholds,
    pub voltage: SensorThresholds,
}

impl Default for SensorLimits {
    fn default() -> Self {
        SensorLimits {
            temperature: SensorThresholds::default_temperature(),
            power: SensorThresholds::default_power(),
            voltage: SensorThresholds::default_voltage(),
        }
    }
}

impl SensorLimits {
    pub fn get(&self, q: Quantity) -> SensorThresholds {
        match q {
            Quantity::Temperature => self.temperature,
            Quantity::Power => self.power,
            Quantity::Voltage => self.voltage,
        }
    }

    pub fn set(&mut self, q: Quantity, t: SensorThresholds) {
        match q {
            Quantity::Temperature => self.temperature = t,
            Quantity::Power => self.power = t,
            Quantity::Voltage => self.voltage = t,
        }
    }
}

/// Zones are half-open with the lower bound inclusive.
pub fn classify_sensor(value: i32, bounds: [i32; 4]) -> Result<AlertState, NodeError> {
    SensorThresholds::new(bounds).map(|t| t.classify(value))
}

/// Current sensor readings of one DNP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorBlock {
    pub temperature_c: i32,
    pub power: i32,
    pub voltage: i32,
}

impl Default for SensorBlock {
    fn default() -> Self {
        SensorBlock {
            temperature_c: 45,
            power: 20,
            voltage: 120,
        }
    }
}

impl SensorBlock {
    pub fn get(&self, q: Quantity) -> i32 {
        match q {
            Quantity::Temperature => self.temperature_c,
            Quantity::Power => self.power,
            Quantity::Voltage => self.voltage,
        }
    }

    pub fn set(&mut self, q: Quantity, value: i32) {
        match q {
            Quantity::Temperature => self.temperature_c = value,
            Quantity::Power => self.power = value,
            Quantity::Voltage => self.voltage = value,
        }
    }
}
