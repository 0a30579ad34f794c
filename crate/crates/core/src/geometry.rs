//! Planar strip-electrode layouts, seen in cross-section.
//!
//! Coordinates: `x` runs across the strips in the electrode plane, `y` is the
//! height above that plane. Strips extend infinitely along the trap axis `z`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{self, AMU, ELEMENTARY_CHARGE};

/// Lateral clearance between the outermost strip and the side walls, in units of r1.
pub const DOMAIN_MARGIN_R1: f64 = 10.0;
/// Height of the grounded lid used when no top plate is present, in units of r1.
pub const DEFAULT_LID_HEIGHT_R1: f64 = 20.0;
/// Outer electrode width when none is given, in units of r1.
pub const DEFAULT_OUTER_WIDTH_R1: f64 = 10.0;
/// Smallest side clearance a five-electrode layout accepts, in units of r1.
pub const MIN_DOMAIN_MARGIN_R1: f64 = 1.0;

/// Side clearance and lid height of the solve box, in units of r1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSize {
    pub margin_r1: f64,
    /// Ignored when a top plate sets the height.
    pub lid_r1: f64,
}

impl Default for DomainSize {
    fn default() -> Self {
        Self { margin_r1: DOMAIN_MARGIN_R1, lid_r1: DEFAULT_LID_HEIGHT_R1 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("electrode `{0}` has x_min >= x_max")]
    InvertedStrip(String),
    #[error("electrodes `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("duplicate electrode id `{0}`")]
    DuplicateId(String),
    #[error("domain does not enclose the electrodes with the required margin")]
    DomainTooSmall,
    #[error("operation requires a canonical five-electrode layout")]
    UnsupportedLayout,
    #[error("invalid ion species: {0}")]
    InvalidIon(&'static str),
    #[error("unknown ion preset `{0}` (expected sr88 or microsphere)")]
    UnknownPreset(String),
    #[error(transparent)]
    Unit(#[from] units::UnitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Rf,
    Dc,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub id: String,
    pub role: Role,
    pub x_min: f64,
    pub x_max: f64,
}

impl Electrode {
    pub fn new(id: impl Into<String>, role: Role, x_min: f64, x_max: f64) -> Self {
        Self { id: id.into(), role, x_min, x_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopPlate {
    pub height: f64,
    pub is_dc: bool,
}

/// Solve box: `x_min..x_max` by `0..y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// The five widths and two gaps of the symmetric planar trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveElectrodeDims {
    pub w_c: f64,
    pub w_r: f64,
    pub w_o: f64,
    pub g: f64,
    pub g_prime: f64,
}

impl FiveElectrodeDims {
    /// `(w_c + w_r)/2 + g`
    pub fn r1(&self) -> f64 {
        0.5 * (self.w_c + self.w_r) + self.g
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w_c: self.w_c * s,
            w_r: self.w_r * s,
            w_o: self.w_o * s,
            g: self.g * s,
            g_prime: self.g_prime * s,
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        for (name, value) in [
            ("w_c", self.w_c),
            ("w_r", self.w_r),
            ("w_o", self.w_o),
            ("g", self.g),
            ("g_prime", self.g_prime),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeometryError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapLayout {
    electrodes: Vec<Electrode>,
    top_plate: Option<TopPlate>,
    domain: Domain,
    dims: Option<FiveElectrodeDims>,
}

pub const CENTER: &str = "center";
pub const RF_LEFT: &str = "rf_left";
pub const RF_RIGHT: &str = "rf_right";
pub const OUTER_LEFT: &str = "outer_left";
pub const OUTER_RIGHT: &str = "outer_right";
pub const TOP_PLATE: &str = "top_plate";

/// Build the symmetric outer–gap′–RF–gap–center–gap–RF–gap′–outer layout centered on x = 0.
pub fn five_electrode_layout(
    dims: FiveElectrodeDims,
    h: Option<f64>,
) -> Result<TrapLayout, GeometryError> {
    five_electrode_layout_sized(dims, h, DomainSize::default())
}

/// [`five_electrode_layout`] in a solve box of the given size.
pub fn five_electrode_layout_sized(
    dims: FiveElectrodeDims,
    h: Option<f64>,
    size: DomainSize,
) -> Result<TrapLayout, GeometryError> {
    dims.validate()?;
    if !(size.margin_r1 >= MIN_DOMAIN_MARGIN_R1) {
        return Err(GeometryError::NonPositive { name: "margin_r1 - 1", value: size.margin_r1 - 1.0 });
    }
    if !(size.lid_r1 > 0.0) {
        return Err(GeometryError::NonPositive { name: "lid_r1", value: size.lid_r1 });
    }
    if let Some(h) = h {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GeometryError::NonPositive { name: "h", value: h });
        }
    }
    let FiveElectrodeDims { w_c, w_r, w_o, g, g_prime } = dims;
    let c = 0.5 * w_c;
    let rf_in = c + g;
    let rf_out = rf_in + w_r;
    let o_in = rf_out + g_prime;
    let o_out = o_in + w_o;
    let electrodes = vec![
        Electrode::new(OUTER_LEFT, Role::Ground, -o_out, -o_in),
        Electrode::new(RF_LEFT, Role::Rf, -rf_out, -rf_in),
        Electrode::new(CENTER, Role::Ground, -c, c),
        Electrode::new(RF_RIGHT, Role::Rf, rf_in, rf_out),
        Electrode::new(OUTER_RIGHT, Role::Ground, o_in, o_out),
    ];
    let r1 = dims.r1();
    let half = o_out + size.margin_r1 * r1;
    let domain = Domain {
        x_min: -half,
        x_max: half,
        y_max: h.unwrap_or(size.lid_r1 * r1),
    };
    let top_plate = h.map(|height| TopPlate { height, is_dc: true });
    let layout = TrapLayout { electrodes, top_plate, domain, dims: Some(dims) };
    layout.validate()?;
    Ok(layout)
}

impl TrapLayout {
    /// A general layout; strips are sorted by position and checked for overlap.
    pub fn new(
        mut electrodes: Vec<Electrode>,
        top_plate: Option<TopPlate>,
        domain: Domain,
    ) -> Result<Self, GeometryError> {
        electrodes.sort_by(|a, b| a.x_min.total_cmp(&b.x_min));
        let layout = TrapLayout { electrodes, top_plate, domain, dims: None };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<(), GeometryError> {
        for e in &self.electrodes {
            if !(e.x_min < e.x_max) {
                return Err(GeometryError::InvertedStrip(e.id.clone()));
            }
        }
        for (i, a) in self.electrodes.iter().enumerate() {
            if self.electrodes[..i].iter().any(|b| b.id == a.id) || a.id == TOP_PLATE {
                return Err(GeometryError::DuplicateId(a.id.clone()));
            }
        }
        for w in self.electrodes.windows(2) {
            if w[1].x_min < w[0].x_max {
                return Err(GeometryError::Overlap(w[0].id.clone(), w[1].id.clone()));
            }
        }
        if let Some(tp) = &self.top_plate {
            if !(tp.height > 0.0) {
                return Err(GeometryError::NonPositive { name: "h", value: tp.height });
            }
            if (tp.height - self.domain.y_max).abs() > 1e-12 * tp.height {
                return Err(GeometryError::DomainTooSmall);
            }
        }
        let lo = self.electrodes.first().map_or(0.0, |e| e.x_min);
        let hi = self.electrodes.last().map_or(0.0, |e| e.x_max);
        let margin = self.dims.map_or(0.0, |d| MIN_DOMAIN_MARGIN_R1 * d.r1() * (1.0 - 1e-12));
        if self.domain.x_min > lo - margin || self.domain.x_max < hi + margin || !(self.domain.y_max > 0.0) {
            return Err(GeometryError::DomainTooSmall);
        }
        Ok(())
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn electrode(&self, id: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.id == id)
    }

    pub fn top_plate(&self) -> Option<&TopPlate> {
        self.top_plate.as_ref()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dims(&self) -> Option<&FiveElectrodeDims> {
        self.dims.as_ref()
    }

    /// Characteristic trap size `(w_c + w_r)/2 + g`.
    pub fn r1(&self) -> Result<f64, GeometryError> {
        self.dims.map(|d| d.r1()).ok_or(GeometryError::UnsupportedLayout)
    }

    /// Smallest gap between neighbouring strips.
    pub fn min_gap(&self) -> Option<f64> {
        self.electrodes
            .windows(2)
            .map(|w| w[1].x_min - w[0].x_max)
            .filter(|g| *g > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Ids of all conductors that get a basis potential, top plate last.
    pub fn conductor_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.electrodes.iter().map(|e| e.id.clone()).collect();
        if self.top_plate.is_some() {
            ids.push(TOP_PLATE.to_string());
        }
        ids
    }

    pub fn rf_ids(&self) -> impl Iterator<Item = &str> {
        self.electrodes.iter().filter(|e| e.role == Role::Rf).map(|e| e.id.as_str())
    }

    /// Reflect x → −x. Ids ending in `_left`/`_right` swap.
    pub fn mirrored(&self) -> TrapLayout {
        let swap = |id: &str| {
            if let Some(s) = id.strip_suffix("_left") {
                format!("{s}_right")
            } else if let Some(s) = id.strip_suffix("_right") {
                format!("{s}_left")
            } else {
                id.to_string()
            }
        };
        let mut electrodes: Vec<Electrode> = self
            .electrodes
            .iter()
            .map(|e| Electrode::new(swap(&e.id), e.role, -e.x_max, -e.x_min))
            .collect();
        electrodes.sort_by(|a, b| a.x_min.total_cmp(&b.x_min));
        TrapLayout {
            electrodes,
            top_plate: self.top_plate,
            domain: Domain {
                x_min: -self.domain.x_max,
                x_max: -self.domain.x_min,
                y_max: self.domain.y_max,
            },
            dims: self.dims,
        }
    }

    /// Same layout with the lid/top plate moved to a new height.
    pub fn with_domain_height(&self, y_max: f64) -> Result<TrapLayout, GeometryError> {
        let mut out = self.clone();
        out.domain.y_max = y_max;
        if let Some(tp) = out.top_plate.as_mut() {
            tp.height = y_max;
        }
        out.validate()?;
        Ok(out)
    }

    /// Same layout with a different lateral half-width of the solve box.
    pub fn with_domain_half_width(&self, half: f64) -> Result<TrapLayout, GeometryError> {
        let mut out = self.clone();
        out.domain.x_min = -half;
        out.domain.x_max = half;
        out.validate()?;
        Ok(out)
    }
}

/// Layout file schema. Lengths are in `unit`; `w_o` defaults to 10·r1 and `g_prime` to `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub w_c: f64,
    pub w_r: f64,
    #[serde(default)]
    pub w_o: Option<f64>,
    pub g: f64,
    #[serde(default)]
    pub g_prime: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_unit")]
    pub unit: String,
}

fn default_unit() -> String {
    "m".to_string()
}

impl LayoutFile {
    pub fn build(&self) -> Result<TrapLayout, GeometryError> {
        let s = units::length_unit_scale(&self.unit)?;
        let g = self.g * s;
        let w_c = self.w_c * s;
        let w_r = self.w_r * s;
        let r1 = 0.5 * (w_c + w_r) + g;
        let dims = FiveElectrodeDims {
            w_c,
            w_r,
            w_o: self.w_o.map_or(DEFAULT_OUTER_WIDTH_R1 * r1, |w| w * s),
            g,
            g_prime: self.g_prime.map_or(g, |gp| gp * s),
        };
        five_electrode_layout(dims, self.h.map(|h| h * s))
    }
}

/// Deserializes from a preset name (`sr88`, `microsphere`) or from explicit
/// `charge`, `mass` and `radius`, validated either way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IonSpecies {
    /// Charge (C).
    pub charge: f64,
    /// Mass (kg).
    pub mass: f64,
    /// Sphere radius (m); zero for atomic ions.
    pub radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIon {
    #[serde(deserialize_with = "crate::units::de::charge")]
    charge: f64,
    #[serde(deserialize_with = "crate::units::de::mass")]
    mass: f64,
    #[serde(default, deserialize_with = "crate::units::de::length")]
    radius: f64,
}

impl<'de> Deserialize<'de> for IonSpecies {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Preset(String),
            Explicit(RawIon),
        }
        match Raw::deserialize(d)? {
            Raw::Preset(name) => IonSpecies::preset(&name).map_err(D::Error::custom),
            Raw::Explicit(r) => IonSpecies::new(r.charge, r.mass, r.radius).map_err(D::Error::custom),
        }
    }
}

impl IonSpecies {
    pub fn new(charge: f64, mass: f64, radius: f64) -> Result<Self, GeometryError> {
        if charge == 0.0 || !charge.is_finite() {
            return Err(GeometryError::InvalidIon("charge must be nonzero"));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(GeometryError::InvalidIon("mass must be positive"));
        }
        if !(radius >= 0.0) {
            return Err(GeometryError::InvalidIon("radius must be nonnegative"));
        }
        Ok(Self { charge, mass, radius })
    }

    /// Singly charged strontium-88.
    pub fn sr88_plus() -> Self {
        Self { charge: ELEMENTARY_CHARGE, mass: 87.905_612 * AMU, radius: 0.0 }
    }

    /// Charged aminopolystyrene microsphere, 0.44 μm diameter.
    pub fn microsphere() -> Self {
        Self { charge: 5.3e-17, mass: 4.7e-17, radius: 0.22e-6 }
    }

    pub fn preset(name: &str) -> Result<Self, GeometryError> {
        match name.to_ascii_lowercase().as_str() {
            "sr88" | "sr88+" => Ok(Self::sr88_plus()),
            "microsphere" => Ok(Self::microsphere()),
            _ => Err(GeometryError::UnknownPreset(name.to_string())),
        }
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }
}
