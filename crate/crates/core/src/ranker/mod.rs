//! Context-aware scoring and ranking of verified landing sites.
//!
//! Each site's safety score is
//!
//! ```text
//! σ = v · (1 − poi_penalty) · dyn        clamped to [0, 1]
//! ```
//!
//! where `v` is 1 for a safe visual verdict and 0 otherwise, `poi_penalty` is
//! the largest `weight · max(0, 1 − distance / buffer)` over sensitive POIs
//! that are active at the context timestamp, and `dyn` is the product of the
//! configured multipliers of the active events. The lateral buffer equals the
//! operating altitude (the 1:1 rule).

mod poi;
mod prompt;

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proposal::Candidate;
use crate::raster::{WorldPoint, WorldRect};
use crate::verifier::Verdict;

pub use poi::{load_pois, parse_pois, pois_to_geojson, ActiveWindow, PoiRecord};
pub use prompt::{build_ranking_prompt, parse_ranking_reply, AdvisoryRank};

#[derive(Debug, Error, PartialEq)]
pub enum RankerError {
    #[error("POI frame {poi:?} does not match site frame {site:?}")]
    FrameMismatch { site: String, poi: String },
    #[error("no sites to rank")]
    EmptyInput,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    #[default]
    Clear,
    Rain,
    Fog,
    Wind,
}

impl std::fmt::Display for Weather {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Clear => "clear",
            Self::Rain => "rain",
            Self::Fog => "fog",
            Self::Wind => "wind",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicContext {
    pub timestamp: NaiveDateTime,
    #[serde(default)]
    pub weather: Weather,
    #[serde(default)]
    pub events: Vec<String>,
}

impl DynamicContext {
    pub fn new(timestamp: NaiveDateTime) -> Self {
        Self {
            timestamp,
            weather: Weather::Clear,
            events: Vec::new(),
        }
    }

    pub fn weekday(&self) -> chrono::Weekday {
        self.timestamp.weekday()
    }

    /// e.g. `Tuesday 10:00, clear weather`.
    pub fn describe(&self) -> String {
        format!(
            "{} {}, {} weather",
            weekday_name(self.weekday()),
            self.timestamp.format("%H:%M"),
            self.weather
        )
    }
}

fn weekday_name(d: chrono::Weekday) -> &'static str {
    use chrono::Weekday::*;
    match d {
        Mon => "Monday",
        Tue => "Tuesday",
        Wed => "Wednesday",
        Thu => "Thursday",
        Fri => "Friday",
        Sat => "Saturday",
        Sun => "Sunday",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatoryConfig {
    pub operating_altitude_m: f64,
    #[serde(default = "default_sensitive_categories")]
    pub sensitive_categories: BTreeMap<String, f64>,
    #[serde(default = "default_event_multipliers")]
    pub event_multipliers: BTreeMap<String, f64>,
}

pub fn default_sensitive_categories() -> BTreeMap<String, f64> {
    [
        ("school", 1.0),
        ("gas_station", 1.0),
        ("power_line", 0.9),
        ("crowd", 1.0),
        ("hospital", 0.8),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn default_event_multipliers() -> BTreeMap<String, f64> {
    [("rush_hour", 0.6), ("public_holiday", 0.8)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

impl RegulatoryConfig {
    pub fn new(operating_altitude_m: f64) -> Result<Self, RankerError> {
        let cfg = Self {
            operating_altitude_m,
            sensitive_categories: default_sensitive_categories(),
            event_multipliers: default_event_multipliers(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RankerError> {
        if !(self.operating_altitude_m > 0.0 && self.operating_altitude_m.is_finite()) {
            return Err(RankerError::Invalid("operating_altitude_m must be positive".into()));
        }
        for (name, w) in self.sensitive_categories.iter().chain(&self.event_multipliers) {
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(RankerError::Invalid(format!("weight for {name:?} must lie in (0, 1], got {w}")));
            }
        }
        Ok(())
    }

    /// Lateral buffer distance: equal to the operating altitude.
    pub fn buffer_m(&self) -> f64 {
        self.operating_altitude_m
    }

    pub fn weight(&self, category: &str) -> Option<f64> {
        self.sensitive_categories.get(category).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub position: WorldPoint,
    pub distance_m: f64,
    pub required_buffer_m: f64,
}

impl Violation {
    fn label(&self) -> String {
        match &self.name {
            Some(n) => format!("{} '{}'", self.category, n),
            None => self.category.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicFactor {
    pub factor: String,
    pub multiplier: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub visual: Verdict,
    pub poi_violations: Vec<Violation>,
    pub dynamic_factors: Vec<DynamicFactor>,
}

/// A verified candidate together with its score, rank and justification.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingSite {
    pub candidate: Candidate,
    pub verdict: Verdict,
    pub bbox_world: WorldRect,
    pub frame: String,
    /// Short description of the surface under the footprint.
    pub surface: String,
    pub sigma: f64,
    /// 1-based; 0 until ranked.
    pub rank: usize,
    pub justification: String,
    pub evidence: Evidence,
}

impl LandingSite {
    pub fn new(
        candidate: Candidate,
        verdict: Verdict,
        bbox_world: WorldRect,
        frame: impl Into<String>,
        surface: impl Into<String>,
    ) -> Self {
        Self {
            candidate,
            evidence: Evidence {
                visual: verdict.clone(),
                poi_violations: Vec::new(),
                dynamic_factors: Vec::new(),
            },
            verdict,
            bbox_world,
            frame: frame.into(),
            surface: surface.into(),
            sigma: 0.0,
            rank: 0,
            justification: String::new(),
        }
    }
}

/// Distance from the site's footprint to the POI; zero when the POI is inside.
pub fn poi_distance(site: &LandingSite, poi: &PoiRecord) -> Result<f64, RankerError> {
    if let Some(frame) = &poi.frame {
        if *frame != site.frame {
            return Err(RankerError::FrameMismatch {
                site: site.frame.clone(),
                poi: frame.clone(),
            });
        }
    }
    Ok(site.bbox_world.distance_to(poi.position))
}

/// Sensitive, currently active POIs closer than the buffer.
pub fn regulatory_check(
    site: &LandingSite,
    pois: &[PoiRecord],
    reg: &RegulatoryConfig,
    ctx: &DynamicContext,
) -> Result<Vec<Violation>, RankerError> {
    let buffer = reg.buffer_m();
    let mut out = Vec::new();
    for poi in pois {
        if reg.weight(&poi.category).is_none() {
            continue;
        }
        let distance = poi_distance(site, poi)?;
        if distance < buffer && poi.is_active(&ctx.timestamp) {
            out.push(Violation {
                category: poi.category.clone(),
                name: poi.name.clone(),
                position: poi.position,
                distance_m: distance,
                required_buffer_m: buffer,
            });
        }
    }
    Ok(out)
}

fn dynamic_multiplier(reg: &RegulatoryConfig, ctx: &DynamicContext) -> f64 {
    ctx.events
        .iter()
        .map(|e| reg.event_multipliers.get(e).copied().unwrap_or(1.0))
        .product()
}

pub fn safety_score(
    site: &LandingSite,
    pois: &[PoiRecord],
    reg: &RegulatoryConfig,
    ctx: &DynamicContext,
) -> Result<f64, RankerError> {
    let visual = if site.verdict.is_safe() { 1.0 } else { 0.0 };
    let buffer = reg.buffer_m();
    let mut penalty: f64 = 0.0;
    for poi in pois {
        let Some(weight) = reg.weight(&poi.category) else {
            continue;
        };
        let distance = poi_distance(site, poi)?;
        if poi.is_active(&ctx.timestamp) {
            penalty = penalty.max(weight * (1.0 - distance / buffer).max(0.0));
        }
    }
    let sigma = visual * (1.0 - penalty) * dynamic_multiplier(reg, ctx);
    Ok(sigma.clamp(0.0, 1.0))
}

fn dynamic_factors(
    site: &LandingSite,
    pois: &[PoiRecord],
    reg: &RegulatoryConfig,
    ctx: &DynamicContext,
) -> Result<Vec<DynamicFactor>, RankerError> {
    let mut factors: Vec<DynamicFactor> = ctx
        .events
        .iter()
        .map(|e| {
            let m = reg.event_multipliers.get(e).copied().unwrap_or(1.0);
            DynamicFactor {
                factor: e.clone(),
                multiplier: m,
                note: if m < 1.0 {
                    format!("{e} raises dynamic risk")
                } else {
                    format!("{e} has no configured effect")
                },
            }
        })
        .collect();
    let mut dormant = 0;
    for poi in pois {
        if reg.weight(&poi.category).is_some()
            && poi_distance(site, poi)? < reg.buffer_m()
            && !poi.is_active(&ctx.timestamp)
        {
            dormant += 1;
        }
    }
    if dormant > 0 {
        let noun = if dormant == 1 { "facility" } else { "facilities" };
        factors.push(DynamicFactor {
            factor: "outside_active_hours".into(),
            multiplier: 1.0,
            note: format!("currently outside active hours of {dormant} nearby sensitive {noun}"),
        });
    }
    Ok(factors)
}

/// Fills score and evidence of one site from its context.
pub fn assess_site(
    site: &mut LandingSite,
    pois: &[PoiRecord],
    reg: &RegulatoryConfig,
    ctx: &DynamicContext,
) -> Result<(), RankerError> {
    site.sigma = safety_score(site, pois, reg, ctx)?;
    site.evidence = Evidence {
        visual: site.verdict.clone(),
        poi_violations: regulatory_check(site, pois, reg, ctx)?,
        dynamic_factors: dynamic_factors(site, pois, reg, ctx)?,
    };
    Ok(())
}

/// Orders sites by σ (descending), then candidate response (descending), then
/// row-major center, and assigns ranks `1..=m`.
pub fn rank_sites(mut sites: Vec<LandingSite>) -> Result<Vec<LandingSite>, RankerError> {
    if sites.is_empty() {
        return Err(RankerError::EmptyInput);
    }
    sites.sort_by(|a, b| {
        b.sigma
            .total_cmp(&a.sigma)
            .then(b.candidate.response.total_cmp(&a.candidate.response))
            .then(a.candidate.center.row_major().cmp(&b.candidate.center.row_major()))
    });
    for (i, s) in sites.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    Ok(sites)
}

/// `Rank r: <surface>. Justification: <visual>; <POI clause>; <dynamic clause>.`
/// Every clause is built from the recorded evidence only.
pub fn render_justification(site: &LandingSite, violations: &[Violation], ctx: &DynamicContext) -> String {
    let visual = site.verdict.reason.trim().trim_end_matches('.');
    let poi_clause = if violations.is_empty() {
        "no active sensitive facilities inside the regulatory buffer".to_string()
    } else {
        let items: Vec<String> = violations
            .iter()
            .map(|v| format!("{} at {:.1} m (buffer {:.1} m)", v.label(), v.distance_m, v.required_buffer_m))
            .collect();
        format!("inside the buffer of {}", items.join(", "))
    };
    let factors = &site.evidence.dynamic_factors;
    let risky: Vec<String> = factors
        .iter()
        .filter(|f| f.multiplier < 1.0)
        .map(|f| format!("{} (x{:.2})", f.factor, f.multiplier))
        .collect();
    let mut dynamic = ctx.describe();
    for f in factors.iter().filter(|f| f.multiplier >= 1.0 && f.factor == "outside_active_hours") {
        dynamic.push_str(", ");
        dynamic.push_str(&f.note);
    }
    if risky.is_empty() {
        dynamic.push_str(", low dynamic risk");
    } else {
        dynamic.push_str(&format!(", elevated dynamic risk from {}", risky.join(", ")));
    }
    format!(
        "Rank {}: {}. Justification: {}; {}; {}.",
        site.rank,
        site.surface.trim_end_matches('.'),
        visual,
        poi_clause,
        dynamic
    )
}

/// Scores, ranks and justifies verified sites with the rule-based backend.
pub fn assess_and_rank(
    mut sites: Vec<LandingSite>,
    pois: &[PoiRecord],
    reg: &RegulatoryConfig,
    ctx: &DynamicContext,
) -> Result<Vec<LandingSite>, RankerError> {
    reg.validate()?;
    for site in &mut sites {
        assess_site(site, pois, reg, ctx)?;
    }
    let mut ranked = rank_sites(sites)?;
    for site in &mut ranked {
        site.justification = render_justification(site, &site.evidence.poi_violations, ctx);
    }
    Ok(ranked)
}
