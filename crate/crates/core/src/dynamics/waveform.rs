//! Piecewise-constant DC schedules and the movement primitives built from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Control voltage used to push or separate ions.
pub const PUSH_VOLTS: f64 = 5.0;
/// Destination-arm center bias that opens a corner.
pub const CORNER_PULL_VOLTS: f64 = -2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub electrode: String,
    #[serde(deserialize_with = "crate::units::de::time")]
    pub t_start: f64,
    #[serde(deserialize_with = "crate::units::de::time")]
    pub t_end: f64,
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub volts: f64,
}

/// Segments per electrode; segments of one electrode never overlap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub segments: Vec<Segment>,
}

impl Waveform {
    pub fn new(mut segments: Vec<Segment>) -> Result<Self, DynamicsError> {
        segments.sort_by(|a, b| a.electrode.cmp(&b.electrode).then(a.t_start.total_cmp(&b.t_start)));
        for s in &segments {
            if !(s.t_end > s.t_start) || !s.volts.is_finite() {
                return Err(DynamicsError::InvalidWaveform(format!("empty or non-finite segment on `{}`", s.electrode)));
            }
        }
        for w in segments.windows(2) {
            if w[0].electrode == w[1].electrode && w[1].t_start < w[0].t_end {
                return Err(DynamicsError::InvalidWaveform(format!("overlapping segments on `{}`", w[0].electrode)));
            }
        }
        Ok(Self { segments })
    }

    /// Voltage on `electrode` at time `t`, if a segment covers it (`[t_start, t_end)`).
    pub fn voltage(&self, electrode: &str, t: f64) -> Option<f64> {
        self.segments
            .iter()
            .find(|s| s.electrode == electrode && t >= s.t_start && t < s.t_end)
            .map(|s| s.volts)
    }

    pub fn electrodes(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.segments.iter().map(|s| s.electrode.as_str()).collect();
        ids.dedup();
        ids
    }

    /// Every scheduled electrode is covered without holes over `[t0, t1)`.
    pub fn check_covers(&self, t0: f64, t1: f64) -> Result<(), DynamicsError> {
        for id in self.electrodes() {
            let mut reach = t0;
            for s in self.segments.iter().filter(|s| s.electrode == id) {
                if s.t_start > reach {
                    break;
                }
                reach = reach.max(s.t_end);
            }
            if reach < t1 {
                return Err(DynamicsError::InvalidWaveform(format!("`{id}` undefined from t = {reach:e}")));
            }
        }
        Ok(())
    }

    /// Voltages at the end of the schedule, per electrode.
    pub fn final_levels(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for s in &self.segments {
            out.insert(s.electrode.clone(), s.volts);
        }
        out
    }

    /// Appends `other` delayed by `offset`.
    pub fn then(&self, other: &Waveform, offset: f64) -> Result<Waveform, DynamicsError> {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().map(|s| Segment { t_start: s.t_start + offset, t_end: s.t_end + offset, ..s.clone() }));
        Waveform::new(segs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("waveform serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DynamicsError> {
        let w: Waveform = serde_json::from_str(text).map_err(|e| DynamicsError::InvalidWaveform(e.to_string()))?;
        Waveform::new(w.segments)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MovementKind {
    Shuttle,
    WellShuttle,
    Split,
    Join,
    Corner,
}

/// Electrodes and timing a primitive acts on.
///
/// `control` is ordered along the direction of travel. SHUTTLE uses `control[0]`, the
/// electrode behind the ion. WELL_SHUTTLE needs four: the well starts over `control[1]`
/// and ends over `control[2]`. SPLIT and JOIN use `control[0]`, the electrode between
/// the ions. CORNER uses `control[0]` in the source arm and `destination_center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementSpec {
    pub kind: MovementKind,
    pub control: Vec<String>,
    #[serde(default)]
    pub destination_center: Option<String>,
    /// Time of the voltage step (s).
    pub t_switch: f64,
    /// End of the schedule (s).
    pub t_end: f64,
    /// Gap between the two CORNER pulses (s).
    #[serde(default)]
    pub corner_delay: f64,
}

pub fn movement_waveform(spec: &MovementSpec, known: &[&str]) -> Result<Waveform, DynamicsError> {
    let need = |n: usize| -> Result<(), DynamicsError> {
        if spec.control.len() < n {
            return Err(DynamicsError::InvalidWaveform(format!("{:?} needs {n} control electrodes", spec.kind)));
        }
        Ok(())
    };
    let mut ids: Vec<&str> = spec.control.iter().map(String::as_str).collect();
    if let Some(d) = &spec.destination_center {
        ids.push(d);
    }
    for id in &ids {
        if !known.contains(id) {
            return Err(DynamicsError::UnknownElectrode(id.to_string()));
        }
    }
    if !(spec.t_switch >= 0.0 && spec.t_end > spec.t_switch) {
        return Err(DynamicsError::InvalidWaveform("need 0 ≤ t_switch < t_end".into()));
    }
    let (ts, te) = (spec.t_switch, spec.t_end);
    let step = |id: &str, before: f64, after: f64| {
        let mut v = Vec::with_capacity(2);
        if ts > 0.0 {
            v.push(Segment { electrode: id.to_string(), t_start: 0.0, t_end: ts, volts: before });
        }
        v.push(Segment { electrode: id.to_string(), t_start: ts, t_end: te, volts: after });
        v
    };
    let segs = match spec.kind {
        MovementKind::Shuttle => {
            need(1)?;
            step(&spec.control[0], 0.0, PUSH_VOLTS)
        }
        MovementKind::WellShuttle => {
            need(4)?;
            let c = &spec.control;
            let mut s = Vec::new();
            s.extend(step(&c[0], PUSH_VOLTS, PUSH_VOLTS));
            s.extend(step(&c[1], 0.0, PUSH_VOLTS));
            s.extend(step(&c[2], PUSH_VOLTS, 0.0));
            s.extend(step(&c[3], PUSH_VOLTS, PUSH_VOLTS));
            s
        }
        MovementKind::Split => {
            need(1)?;
            step(&spec.control[0], 0.0, PUSH_VOLTS)
        }
        MovementKind::Join => {
            need(1)?;
            step(&spec.control[0], PUSH_VOLTS, 0.0)
        }
        MovementKind::Corner => {
            need(1)?;
            let dest = spec
                .destination_center
                .as_deref()
                .ok_or_else(|| DynamicsError::InvalidWaveform("CORNER needs destination_center".into()))?;
            let t2 = ts + spec.corner_delay;
            if !(t2 < te) {
                return Err(DynamicsError::InvalidWaveform("corner delay runs past t_end".into()));
            }
            let mut s = step(dest, 0.0, CORNER_PULL_VOLTS);
            let src = &spec.control[0];
            s.push(Segment { electrode: src.clone(), t_start: 0.0, t_end: t2, volts: 0.0 });
            s.push(Segment { electrode: src.clone(), t_start: t2, t_end: te, volts: PUSH_VOLTS });
            s
        }
    };
    Waveform::new(segs)
}
