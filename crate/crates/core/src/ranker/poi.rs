//! Point-of-interest records and their GeoJSON-style file format.

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use super::RankerError;
use crate::raster::WorldPoint;

/// Weekly window during which a facility is occupied, `[start_hour, end_hour)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveWindow {
    days: Vec<Weekday>,
    start_hour: u8,
    end_hour: u8,
}

impl ActiveWindow {
    pub fn new(days: impl IntoIterator<Item = Weekday>, start_hour: u8, end_hour: u8) -> Result<Self, RankerError> {
        if start_hour >= end_hour || end_hour > 24 {
            return Err(RankerError::Invalid(format!(
                "active hours {start_hour}-{end_hour} must satisfy 0 <= start < end <= 24"
            )));
        }
        let mut days: Vec<Weekday> = days.into_iter().collect();
        days.sort_by_key(Weekday::num_days_from_monday);
        days.dedup();
        if days.is_empty() {
            return Err(RankerError::Invalid("active window has no days".into()));
        }
        Ok(Self {
            days,
            start_hour,
            end_hour,
        })
    }

    pub fn weekdays(start_hour: u8, end_hour: u8) -> Result<Self, RankerError> {
        Self::new(
            [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri],
            start_hour,
            end_hour,
        )
    }

    pub fn days(&self) -> &[Weekday] {
        &self.days
    }

    pub fn start_hour(&self) -> u8 {
        self.start_hour
    }

    pub fn end_hour(&self) -> u8 {
        self.end_hour
    }

    pub fn contains(&self, t: &NaiveDateTime) -> bool {
        let hour = f64::from(t.hour()) + f64::from(t.minute()) / 60.0 + f64::from(t.second()) / 3600.0;
        self.days.contains(&t.weekday())
            && hour >= f64::from(self.start_hour)
            && hour < f64::from(self.end_hour)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub category: String,
    pub position: WorldPoint,
    pub name: Option<String>,
    /// `None` means always occupied.
    pub active_hours: Option<Vec<ActiveWindow>>,
    /// Frame label of `position`, if the source declared one.
    pub frame: Option<String>,
}

impl PoiRecord {
    pub fn new(category: impl Into<String>, position: WorldPoint) -> Self {
        Self {
            category: category.into(),
            position,
            name: None,
            active_hours: None,
            frame: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_hours(mut self, hours: Vec<ActiveWindow>) -> Self {
        self.active_hours = Some(hours);
        self
    }

    pub fn in_frame(mut self, frame: impl Into<String>) -> Self {
        self.frame = Some(frame.into());
        self
    }

    pub fn is_active(&self, t: &NaiveDateTime) -> bool {
        self.active_hours
            .as_ref()
            .is_none_or(|windows| windows.iter().any(|w| w.contains(t)))
    }

    /// `category 'name'` or just `category`.
    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => format!("{} '{}'", self.category, n),
            None => self.category.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crs: Option<NamedCrs>,
    features: Vec<Feature>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NamedCrs {
    #[serde(rename = "type")]
    kind: String,
    properties: CrsProperties,
}

#[derive(Debug, Serialize, Deserialize)]
struct CrsProperties {
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    geometry: Geometry,
    properties: Properties,
}

#[derive(Debug, Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Properties {
    category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active_hours: Option<Vec<WindowWire>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowWire {
    days: Vec<String>,
    start: u8,
    end: u8,
}

fn parse_days(names: &[String]) -> Result<Vec<Weekday>, RankerError> {
    use Weekday::*;
    let mut out = Vec::new();
    for name in names {
        match name.to_ascii_lowercase().as_str() {
            "weekdays" => out.extend([Mon, Tue, Wed, Thu, Fri]),
            "weekend" => out.extend([Sat, Sun]),
            "daily" => out.extend([Mon, Tue, Wed, Thu, Fri, Sat, Sun]),
            other => out.push(
                other
                    .parse::<Weekday>()
                    .map_err(|_| RankerError::Invalid(format!("unknown weekday {name:?}")))?,
            ),
        }
    }
    Ok(out)
}

fn day_name(d: Weekday) -> String {
    d.to_string().to_ascii_lowercase()
}

/// Parses a FeatureCollection of point features.
pub fn parse_pois(text: &str) -> Result<Vec<PoiRecord>, RankerError> {
    let fc: FeatureCollection =
        serde_json::from_str(text).map_err(|e| RankerError::Invalid(format!("POI file: {e}")))?;
    if fc.kind != "FeatureCollection" {
        return Err(RankerError::Invalid(format!("expected a FeatureCollection, found {:?}", fc.kind)));
    }
    let frame = fc.crs.map(|c| c.properties.name);
    fc.features
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let bad = |msg: String| RankerError::Invalid(format!("feature {i}: {msg}"));
            if f.geometry.kind != "Point" || f.geometry.coordinates.len() < 2 {
                return Err(bad(format!("expected a Point geometry, found {:?}", f.geometry.kind)));
            }
            if f.properties.category.trim().is_empty() {
                return Err(bad("empty category".into()));
            }
            let active_hours = f
                .properties
                .active_hours
                .map(|ws| {
                    ws.iter()
                        .map(|w| ActiveWindow::new(parse_days(&w.days)?, w.start, w.end))
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()
                .map_err(|e| bad(e.to_string()))?;
            Ok(PoiRecord {
                category: f.properties.category,
                position: WorldPoint::new(f.geometry.coordinates[0], f.geometry.coordinates[1]),
                name: f.properties.name,
                active_hours,
                frame: frame.clone(),
            })
        })
        .collect()
}

pub fn load_pois(path: impl AsRef<Path>) -> Result<Vec<PoiRecord>, RankerError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RankerError::Io(format!("{}: {e}", path.display())))?;
    parse_pois(&text)
}

/// Serializes POIs as a FeatureCollection; the frame of the first record
/// becomes the collection's `crs` name.
pub fn pois_to_geojson(pois: &[PoiRecord]) -> String {
    let fc = FeatureCollection {
        kind: "FeatureCollection".into(),
        crs: pois.iter().find_map(|p| p.frame.clone()).map(|name| NamedCrs {
            kind: "name".into(),
            properties: CrsProperties { name },
        }),
        features: pois
            .iter()
            .map(|p| Feature {
                kind: "Feature".into(),
                geometry: Geometry {
                    kind: "Point".into(),
                    coordinates: vec![p.position.x, p.position.y],
                },
                properties: Properties {
                    category: p.category.clone(),
                    name: p.name.clone(),
                    active_hours: p.active_hours.as_ref().map(|ws| {
                        ws.iter()
                            .map(|w| WindowWire {
                                days: w.days.iter().copied().map(day_name).collect(),
                                start: w.start_hour,
                                end: w.end_hour,
                            })
                            .collect()
                    }),
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&fc).expect("POIs serialize")
}
