//! EPA Air Quality Index for PM2.5.
//!
//! Everything here is a pure function of an [`AqiScale`]: the breakpoint
//! table, the six health categories and the marker color anchors. The default
//! scale is the pre-2024 EPA PM2.5 table; a replacement can be loaded from a
//! JSON document with the same shape as `default_scale.json`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_SCALE_JSON: &str = include_str!("default_scale.json");

/// Slack used when snapping a float concentration onto the 0.1 grid, so that
/// values like `0.3` (stored as 0.29999…) truncate to 0.3 and not 0.2.
const GRID_EPSILON: f64 = 1e-9;

/// Highest index on the scale.
pub const AQI_MAX: u16 = 500;

#[derive(Debug, Error)]
pub enum AqiError {
    #[error("concentration must be a finite value >= 0, got {0}")]
    InvalidConcentration(f64),
    #[error("AQI {0} is outside 0..=500")]
    IndexOutOfRange(i64),
    #[error("invalid AQI scale: {0}")]
    InvalidScale(String),
    #[error("malformed AQI scale document: {0}")]
    Json(#[from] serde_json::Error),
}

/// PM2.5 mass density in µg/m³.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Concentration(f64);

impl Concentration {
    pub fn new(value: f64) -> Result<Self, AqiError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(AqiError::InvalidConcentration(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Whole tenths of a µg/m³, discarding anything finer.
    fn tenths(self) -> i64 {
        (self.0 * 10.0 + GRID_EPSILON).floor() as i64
    }
}

impl fmt::Display for Concentration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Integer index on the 0–500 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AqiValue(u16);

impl AqiValue {
    pub fn new(value: i64) -> Result<Self, AqiError> {
        if (0..=AQI_MAX as i64).contains(&value) {
            Ok(Self(value as u16))
        } else {
            Err(AqiError::IndexOutOfRange(value))
        }
    }

    pub fn value(self) -> u16 {
        self.0
    }
}

impl fmt::Display for AqiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AqiCategory {
    Good,
    Moderate,
    UnhealthyForSensitiveGroups,
    Unhealthy,
    VeryUnhealthy,
    Hazardous,
}

impl AqiCategory {
    pub const ALL: [AqiCategory; 6] = [
        AqiCategory::Good,
        AqiCategory::Moderate,
        AqiCategory::UnhealthyForSensitiveGroups,
        AqiCategory::Unhealthy,
        AqiCategory::VeryUnhealthy,
        AqiCategory::Hazardous,
    ];

    /// Machine name, identical to the serialized form.
    pub fn name(self) -> &'static str {
        match self {
            AqiCategory::Good => "Good",
            AqiCategory::Moderate => "Moderate",
            AqiCategory::UnhealthyForSensitiveGroups => "UnhealthyForSensitiveGroups",
            AqiCategory::Unhealthy => "Unhealthy",
            AqiCategory::VeryUnhealthy => "VeryUnhealthy",
            AqiCategory::Hazardous => "Hazardous",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AqiCategory::Good => "Good",
            AqiCategory::Moderate => "Moderate",
            AqiCategory::UnhealthyForSensitiveGroups => "Unhealthy for Sensitive Groups",
            AqiCategory::Unhealthy => "Unhealthy",
            AqiCategory::VeryUnhealthy => "Very Unhealthy",
            AqiCategory::Hazardous => "Hazardous",
        }
    }
}

impl fmt::Display for AqiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// 8-bit RGB color. Serialized as a `[r, g, b]` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct ColorRgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl ColorRgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// `#RRGGBB`, uppercase.
    pub fn to_hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }
}

impl From<[u8; 3]> for ColorRgb {
    fn from([r, g, b]: [u8; 3]) -> Self {
        Self { r, g, b }
    }
}

impl From<ColorRgb> for [u8; 3] {
    fn from(c: ColorRgb) -> Self {
        [c.r, c.g, c.b]
    }
}

/// Serializes an optional color as `"#RRGGBB"` or `null`.
pub fn serialize_hex_opt<S: serde::Serializer>(color: &Option<ColorRgb>, s: S) -> Result<S::Ok, S::Error> {
    match color {
        Some(c) => s.serialize_str(&c.to_hex()),
        None => s.serialize_none(),
    }
}

/// One row of the concentration → index table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub conc_low: f64,
    pub conc_high: f64,
    pub index_low: u16,
    pub index_high: u16,
    pub category: AqiCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub name: AqiCategory,
    pub index_low: u16,
    pub index_high: u16,
    pub guidance: String,
    pub reference_color: ColorRgb,
}

impl CategoryInfo {
    pub fn contains(&self, aqi: AqiValue) -> bool {
        (self.index_low..=self.index_high).contains(&aqi.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorAnchor {
    pub aqi: u16,
    pub color: ColorRgb,
}

/// Chart background band: one category expressed in concentration space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationBand {
    pub category: AqiCategory,
    pub conc_low: f64,
    pub conc_high: f64,
    pub index_low: u16,
    pub index_high: u16,
    pub color: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScaleDocument {
    breakpoints: Vec<Breakpoint>,
    categories: Vec<CategoryInfo>,
    #[serde(default = "default_anchors")]
    color_anchors: Vec<ColorAnchor>,
}

fn default_anchors() -> Vec<ColorAnchor> {
    vec![
        ColorAnchor { aqi: 0, color: ColorRgb::new(0, 228, 0) },
        ColorAnchor { aqi: 100, color: ColorRgb::new(255, 255, 0) },
        ColorAnchor { aqi: 200, color: ColorRgb::new(255, 0, 0) },
    ]
}

#[derive(Debug, Clone, Copy)]
struct TenthsRow {
    low: i64,
    high: i64,
    index_low: i64,
    index_high: i64,
}

/// A validated AQI configuration.
#[derive(Debug, Clone)]
pub struct AqiScale {
    doc: ScaleDocument,
    rows: Vec<TenthsRow>,
    source: String,
}

impl AqiScale {
    /// Parses and validates a scale document. The original text is kept so it
    /// can be served back unchanged.
    pub fn from_json(text: &str) -> Result<Self, AqiError> {
        let doc: ScaleDocument = serde_json::from_str(text)?;
        let rows = validate(&doc)?;
        Ok(Self { doc, rows, source: text.to_owned() })
    }

    pub fn source_json(&self) -> &str {
        &self.source
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.doc.breakpoints
    }

    pub fn categories(&self) -> &[CategoryInfo] {
        &self.doc.categories
    }

    pub fn color_anchors(&self) -> &[ColorAnchor] {
        &self.doc.color_anchors
    }

    pub fn pm25_to_aqi(&self, c: Concentration) -> AqiValue {
        let top = self.rows.last().expect("validated scale has rows");
        let tenths = if c.0 * 10.0 > top.high as f64 { top.high + 1 } else { c.tenths() };
        if tenths > top.high {
            return AqiValue(top.index_high as u16);
        }
        let row = self
            .rows
            .iter()
            .find(|r| r.low <= tenths && tenths <= r.high)
            .expect("validated table covers every tenth from zero to its top");
        if row.high == row.low {
            return AqiValue(row.index_low as u16);
        }
        // index_low + (index_high - index_low) * (c - conc_low) / (conc_high - conc_low),
        // rounded half-up in exact integer arithmetic.
        let num = (row.index_high - row.index_low) * (tenths - row.low);
        let den = row.high - row.low;
        let offset = (2 * num + den) / (2 * den);
        AqiValue((row.index_low + offset) as u16)
    }

    pub fn category(&self, aqi: AqiValue) -> &CategoryInfo {
        self.doc.categories.iter().find(|c| c.contains(aqi)).expect("validated categories tile 0..=500")
    }

    pub fn category_of(&self, category: AqiCategory) -> &CategoryInfo {
        self.doc.categories.iter().find(|c| c.name == category).expect("validated scale carries every category")
    }

    /// Piecewise-linear marker fill between the color anchors, clamped to the
    /// first and last anchor outside their range.
    pub fn marker_color(&self, aqi: AqiValue) -> ColorRgb {
        let x = aqi.value() as i64;
        let anchors = &self.doc.color_anchors;
        let first = anchors[0];
        let last = anchors[anchors.len() - 1];
        if x <= first.aqi as i64 {
            return first.color;
        }
        if x >= last.aqi as i64 {
            return last.color;
        }
        let seg = anchors
            .windows(2)
            .find(|w| x >= w[0].aqi as i64 && x <= w[1].aqi as i64)
            .expect("x lies strictly inside the anchor range");
        let (lo, hi) = (seg[0], seg[1]);
        let span = (hi.aqi - lo.aqi) as i64;
        let t = x - lo.aqi as i64;
        let lerp = |a: u8, b: u8| -> u8 {
            let total = a as i64 * span + (b as i64 - a as i64) * t;
            ((2 * total + span) / (2 * span)) as u8
        };
        ColorRgb { r: lerp(lo.color.r, hi.color.r), g: lerp(lo.color.g, hi.color.g), b: lerp(lo.color.b, hi.color.b) }
    }

    /// One band per category, spanning the concentrations of every
    /// breakpoint row assigned to it.
    pub fn bands(&self) -> Vec<ConcentrationBand> {
        let mut bands: Vec<ConcentrationBand> = Vec::new();
        for bp in &self.doc.breakpoints {
            match bands.last_mut() {
                Some(b) if b.category == bp.category => {
                    b.conc_high = bp.conc_high;
                    b.index_high = bp.index_high;
                }
                _ => bands.push(ConcentrationBand {
                    category: bp.category,
                    conc_low: bp.conc_low,
                    conc_high: bp.conc_high,
                    index_low: bp.index_low,
                    index_high: bp.index_high,
                    color: self.category_of(bp.category).reference_color.to_hex(),
                }),
            }
        }
        bands
    }
}

impl Default for AqiScale {
    fn default() -> Self {
        Self::from_json(DEFAULT_SCALE_JSON).expect("bundled scale is valid")
    }
}

fn to_tenths(value: f64, what: &str) -> Result<i64, AqiError> {
    let scaled = value * 10.0;
    let rounded = scaled.round();
    if !value.is_finite() || value < 0.0 || (scaled - rounded).abs() > 1e-6 {
        return Err(AqiError::InvalidScale(format!("{what} {value} is not a non-negative multiple of 0.1")));
    }
    Ok(rounded as i64)
}

fn validate(doc: &ScaleDocument) -> Result<Vec<TenthsRow>, AqiError> {
    let bad = |msg: String| Err(AqiError::InvalidScale(msg));

    if doc.breakpoints.is_empty() {
        return bad("breakpoint table is empty".into());
    }
    let mut rows = Vec::with_capacity(doc.breakpoints.len());
    for (i, bp) in doc.breakpoints.iter().enumerate() {
        let row = TenthsRow {
            low: to_tenths(bp.conc_low, "conc_low")?,
            high: to_tenths(bp.conc_high, "conc_high")?,
            index_low: bp.index_low as i64,
            index_high: bp.index_high as i64,
        };
        if row.low > row.high || row.index_low > row.index_high {
            return bad(format!("breakpoint row {i} has an inverted range"));
        }
        if row.index_high > AQI_MAX as i64 {
            return bad(format!("breakpoint row {i} exceeds index {AQI_MAX}"));
        }
        if let Some(prev) = rows.last().copied() {
            let prev: TenthsRow = prev;
            if row.low != prev.high + 1 || row.index_low != prev.index_high + 1 {
                return bad(format!("breakpoint row {i} is not contiguous with row {}", i - 1));
            }
        } else if row.low != 0 || row.index_low != 0 {
            return bad("first breakpoint row must start at concentration 0 and index 0".into());
        }
        rows.push(row);
    }

    let mut next = 0u16;
    for (i, cat) in doc.categories.iter().enumerate() {
        if cat.index_low != next || cat.index_high < cat.index_low {
            return bad(format!("category {i} ({}) breaks the 0..=500 tiling", cat.name));
        }
        if cat.guidance.trim().is_empty() {
            return bad(format!("category {} has no guidance text", cat.name));
        }
        if doc.categories[..i].iter().any(|c| c.name == cat.name) {
            return bad(format!("category {} listed twice", cat.name));
        }
        next = cat.index_high.saturating_add(1);
    }
    if next != AQI_MAX + 1 || doc.categories.len() != AqiCategory::ALL.len() {
        return bad("categories must tile 0..=500 with all six categories".into());
    }
    for bp in &doc.breakpoints {
        let cat = doc.categories.iter().find(|c| c.name == bp.category).expect("all six present");
        if bp.index_low < cat.index_low || bp.index_high > cat.index_high {
            return bad(format!(
                "breakpoint {}..{} lies outside its category {}",
                bp.conc_low, bp.conc_high, bp.category
            ));
        }
    }

    let anchors = &doc.color_anchors;
    if anchors.is_empty() {
        return bad("at least one color anchor is required".into());
    }
    if anchors.windows(2).any(|w| w[0].aqi >= w[1].aqi) {
        return bad("color anchors must be strictly increasing in AQI".into());
    }
    Ok(rows)
}

fn default_scale() -> &'static AqiScale {
    static SCALE: OnceLock<AqiScale> = OnceLock::new();
    SCALE.get_or_init(AqiScale::default)
}

/// Discards digits beyond the first decimal place.
pub fn truncate_concentration(c: f64) -> Result<Concentration, AqiError> {
    let c = Concentration::new(c)?;
    Ok(Concentration(c.tenths() as f64 / 10.0))
}

/// AQI of a PM2.5 concentration on the default scale.
pub fn pm25_to_aqi(c: f64) -> Result<AqiValue, AqiError> {
    Ok(default_scale().pm25_to_aqi(Concentration::new(c)?))
}

pub fn aqi_category(aqi: i64) -> Result<&'static CategoryInfo, AqiError> {
    Ok(default_scale().category(AqiValue::new(aqi)?))
}

pub fn marker_color(aqi: i64) -> Result<ColorRgb, AqiError> {
    Ok(default_scale().marker_color(AqiValue::new(aqi)?))
}
