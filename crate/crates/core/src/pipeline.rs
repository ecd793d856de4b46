//! End-to-end orchestration: segmentation rasters → proposal loop → context
//! ranking, driven by one TOML configuration file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::proposal::{
    default_half_width, default_response_floor, Kernel, LoopConfig, LoopError, LoopOutcome, ProposalLoop, StopReason,
    TraceRecord,
};
use crate::ranker::{
    assess_and_rank, build_ranking_prompt, load_pois, DynamicContext, Evidence, LandingSite, PoiRecord,
    RegulatoryConfig, Weather,
};
use crate::raster::{
    cross_validate, derive_suitability, ClassMapping, CrossValidationPolicy, LabelRaster, SuitabilityRaster,
};
use crate::verifier::{EndpointConfig, HazardLayer, PatchSource, RemoteVerifier, RuleOracle, Verifier, VerifyError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("verifier transport error: {source}")]
    Transport {
        #[source]
        source: VerifyError,
        partial: Vec<TraceRecord>,
    },
}

impl PipelineError {
    fn config(msg: impl std::fmt::Display) -> Self {
        Self::Config(msg.to_string())
    }

    fn io(msg: impl std::fmt::Display) -> Self {
        Self::Io(msg.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Oracle,
    Remote,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "remote" => Ok(Self::Remote),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSettings {
    /// Kernel half-width in pixels; derived from `landing_radius_m` when absent.
    #[serde(default)]
    pub half_width: Option<usize>,
    #[serde(default = "default_landing_radius")]
    pub landing_radius_m: f64,
    pub max_accepted: usize,
    pub max_iterations: usize,
    /// Defaults to half the kernel mass.
    #[serde(default)]
    pub response_floor: Option<f64>,
}

fn default_landing_radius() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierSettings {
    #[serde(default)]
    pub backend: Backend,
    /// Hazard layer for the rule oracle; no hazards when absent.
    #[serde(default)]
    pub hazards: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSettings {
    #[serde(default)]
    pub poi: Option<PathBuf>,
    pub timestamp: NaiveDateTime,
    #[serde(default)]
    pub weather: Weather,
    #[serde(default)]
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    pub report: PathBuf,
    pub trace: PathBuf,
    #[serde(default)]
    pub ranking_prompt: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub labels: PathBuf,
    #[serde(default)]
    pub map_layer: Option<PathBuf>,
    /// Imagery cropped into verifier patches; the suitability grid is used
    /// when absent.
    #[serde(default)]
    pub imagery: Option<PathBuf>,
    pub profile: String,
    /// Overrides the profile's class set.
    #[serde(default)]
    pub suitable_classes: Option<Vec<String>>,
    #[serde(default)]
    pub policy: CrossValidationPolicy,
    /// Reserved; the pipeline is deterministic and does not draw random numbers.
    #[serde(default)]
    pub seed: u64,
    pub proposal: ProposalSettings,
    pub verifier: VerifierSettings,
    pub context: ContextSettings,
    pub regulatory: RegulatoryConfig,
    pub output: OutputSettings,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: Self = toml::from_str(text).map_err(PipelineError::config)?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn mapping(&self) -> Result<ClassMapping, PipelineError> {
        match &self.suitable_classes {
            Some(classes) => ClassMapping::new(self.profile.clone(), classes.iter().cloned()).map_err(PipelineError::config),
            None => ClassMapping::by_profile(&self.profile)
                .ok_or_else(|| PipelineError::config(format!("unknown class-mapping profile {:?}", self.profile))),
        }
    }

    pub fn dynamic_context(&self) -> DynamicContext {
        DynamicContext {
            timestamp: self.context.timestamp,
            weather: self.context.weather,
            events: self.context.events.clone(),
        }
    }

    /// Checks referenced inputs exist and numeric settings are in range.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let inputs = [
            Some(("labels", &self.labels)),
            self.map_layer.as_ref().map(|p| ("map_layer", p)),
            self.imagery.as_ref().map(|p| ("imagery", p)),
            self.verifier.hazards.as_ref().map(|p| ("verifier.hazards", p)),
            self.context.poi.as_ref().map(|p| ("context.poi", p)),
        ];
        for (key, path) in inputs.into_iter().flatten() {
            let full = self.resolve(path);
            if !full.is_file() {
                return Err(PipelineError::config(format!("{key}: file {} does not exist", full.display())));
            }
        }
        self.mapping()?;
        let p = &self.proposal;
        if p.half_width == Some(0) {
            return Err(PipelineError::config("proposal.half_width must be >= 1"));
        }
        if p.landing_radius_m.is_nan() || p.landing_radius_m <= 0.0 {
            return Err(PipelineError::config("proposal.landing_radius_m must be positive"));
        }
        LoopConfig::new(p.half_width.unwrap_or(1), p.max_accepted, p.max_iterations, p.response_floor.unwrap_or(0.0))
            .map_err(PipelineError::config)?;
        self.regulatory.validate().map_err(PipelineError::config)?;
        if self.verifier.backend == Backend::Remote && self.verifier.endpoint.is_none() {
            return Err(PipelineError::config("remote backend requires [verifier.endpoint]"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the configuration, leaving
    /// out the `output` section so relocating outputs keeps the digest.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        hex::encode(Sha256::digest(value.to_string()))
    }
}

/// Stage 1: label raster → suitability, optionally cross-validated with a map layer.
pub fn suitability_stage(cfg: &PipelineConfig) -> Result<(LabelRaster, SuitabilityRaster), PipelineError> {
    let labels = LabelRaster::load(cfg.resolve(&cfg.labels)).map_err(PipelineError::io)?;
    let seg = derive_suitability(&labels, &cfg.mapping()?).map_err(PipelineError::config)?;
    let suit = match &cfg.map_layer {
        Some(p) => {
            let map = SuitabilityRaster::load(cfg.resolve(p)).map_err(PipelineError::io)?;
            cross_validate(&seg, &map, cfg.policy).map_err(PipelineError::io)?
        }
        None => seg,
    };
    Ok((labels, suit))
}

pub fn loop_config(cfg: &PipelineConfig, gsd: f64) -> Result<LoopConfig, PipelineError> {
    let p = &cfg.proposal;
    let d = p
        .half_width
        .unwrap_or_else(|| default_half_width(p.landing_radius_m, gsd));
    let kernel = Kernel::new(d).map_err(PipelineError::config)?;
    let floor = p.response_floor.unwrap_or_else(|| default_response_floor(&kernel));
    LoopConfig::new(d, p.max_accepted, p.max_iterations, floor).map_err(PipelineError::config)
}

fn build_verifier(cfg: &PipelineConfig, raster: &SuitabilityRaster) -> Result<Box<dyn Verifier>, PipelineError> {
    match cfg.verifier.backend {
        Backend::Oracle => {
            let hazards = match &cfg.verifier.hazards {
                Some(p) => HazardLayer::load(cfg.resolve(p)).map_err(PipelineError::io)?,
                None => HazardLayer::empty(raster.width(), raster.height(), raster.meta().clone()),
            };
            if hazards.width() != raster.width() || hazards.height() != raster.height() {
                return Err(PipelineError::io(format!(
                    "hazard layer is {}x{}, suitability grid is {}x{}",
                    hazards.width(),
                    hazards.height(),
                    raster.width(),
                    raster.height()
                )));
            }
            Ok(Box::new(RuleOracle::new(hazards)))
        }
        Backend::Remote => {
            let endpoint = cfg
                .verifier
                .endpoint
                .clone()
                .ok_or_else(|| PipelineError::config("remote backend requires [verifier.endpoint]"))?;
            let remote = RemoteVerifier::from_env(endpoint);
            if std::env::var(crate::verifier::API_KEY_ENV).map_or(true, |k| k.is_empty()) {
                return Err(PipelineError::Transport {
                    source: VerifyError::AuthFailure {
                        candidate: "-".into(),
                        message: format!("{} is not set", crate::verifier::API_KEY_ENV),
                    },
                    partial: Vec::new(),
                });
            }
            Ok(Box::new(remote))
        }
    }
}

/// Stages 1 and 2: suitability derivation and the proposal loop.
pub struct ProposalStage {
    pub labels: LabelRaster,
    pub suitability: SuitabilityRaster,
    pub loop_config: LoopConfig,
    pub outcome: LoopOutcome,
}

pub fn proposal_stage(cfg: &PipelineConfig) -> Result<ProposalStage, PipelineError> {
    let (labels, suitability) = suitability_stage(cfg)?;
    let loop_config = loop_config(cfg, suitability.meta().gsd)?;
    let patches = match &cfg.imagery {
        Some(p) => PatchSource::open(cfg.resolve(p), &suitability).map_err(PipelineError::io)?,
        None => PatchSource::from_suitability(&suitability),
    };
    let verifier = build_verifier(cfg, &suitability)?;
    let lp = ProposalLoop::new(&suitability, &patches, loop_config.clone()).map_err(PipelineError::io)?;
    let outcome = match lp.run(verifier.as_ref()) {
        Ok(o) => o,
        Err(LoopError::Verifier { source, partial }) => {
            return Err(PipelineError::Transport {
                source,
                partial: partial.iter().map(|s| s.record()).collect(),
            })
        }
        Err(LoopError::Proposal(e)) => return Err(PipelineError::io(e)),
    };
    Ok(ProposalStage {
        labels,
        suitability,
        loop_config,
        outcome,
    })
}

/// Dominant land-cover class and suitable share under a footprint.
fn surface_summary(labels: &LabelRaster, suit: &SuitabilityRaster, site: &crate::proposal::Candidate) -> String {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for p in site.bbox.pixels() {
        *counts.entry(labels.get(p)).or_default() += 1;
    }
    let (class, _) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("footprint is nonempty");
    let area = site.bbox.width() * site.bbox.height();
    let share = 100.0 * suit.count_in(&site.bbox) as f64 / area as f64;
    format!(
        "{} area, {:.0}% of footprint suitable",
        labels.meta().classes[class],
        share
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSite {
    pub rank: usize,
    pub candidate_id: String,
    pub center_px: [usize; 2],
    /// `[min_x, min_y, max_x, max_y]` in meters.
    pub bbox_world: [f64; 4],
    pub sigma: f64,
    pub justification: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub timestamp: String,
    pub weekday: String,
    pub weather: Weather,
    pub events: Vec<String>,
    pub operating_altitude_m: f64,
    pub buffer_m: f64,
    pub frame: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSummary {
    pub half_width: usize,
    pub response_floor: f64,
    pub iterations: usize,
    pub accepted: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sites: Vec<ReportSite>,
    pub context: ReportContext,
    pub proposal: ProposalSummary,
    pub config_digest: String,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub struct PipelineOutput {
    pub report: Report,
    pub trace: Vec<TraceRecord>,
    pub ranked: Vec<LandingSite>,
    pub ranking_prompt: Option<String>,
}

pub fn trace_to_json(trace: &[TraceRecord]) -> String {
    serde_json::to_string_pretty(trace).expect("trace serializes") + "\n"
}

/// Runs segmentation filtering, proposal/verification and context ranking,
/// in that order.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    let stage = proposal_stage(cfg)?;
    let suit = &stage.suitability;

    let pois: Vec<PoiRecord> = match &cfg.context.poi {
        Some(p) => load_pois(cfg.resolve(p)).map_err(PipelineError::io)?,
        None => Vec::new(),
    };
    let ctx = cfg.dynamic_context();
    let frame = suit.meta().crs_label.clone();

    let sites: Vec<LandingSite> = stage
        .outcome
        .accepted()
        .map(|step| {
            LandingSite::new(
                step.candidate,
                step.verdict.clone(),
                suit.rect_to_world(&step.candidate.bbox),
                frame.clone(),
                surface_summary(&stage.labels, suit, &step.candidate),
            )
        })
        .collect();

    let (ranked, ranking_prompt) = if sites.is_empty() {
        (Vec::new(), None)
    } else {
        let prompt = cfg
            .output
            .ranking_prompt
            .is_some()
            .then(|| build_ranking_prompt(&sites, &pois, &ctx, &cfg.regulatory))
            .transpose()
            .map_err(PipelineError::io)?;
        let ranked = assess_and_rank(sites, &pois, &cfg.regulatory, &ctx).map_err(PipelineError::io)?;
        (ranked, prompt)
    };

    let report = Report {
        sites: ranked
            .iter()
            .map(|s| ReportSite {
                rank: s.rank,
                candidate_id: s.candidate.id(),
                center_px: [s.candidate.center.x, s.candidate.center.y],
                bbox_world: [s.bbox_world.min_x, s.bbox_world.min_y, s.bbox_world.max_x, s.bbox_world.max_y],
                sigma: s.sigma,
                justification: s.justification.clone(),
                evidence: s.evidence.clone(),
            })
            .collect(),
        context: ReportContext {
            timestamp: ctx.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            weekday: ctx.timestamp.format("%A").to_string(),
            weather: ctx.weather,
            events: ctx.events.clone(),
            operating_altitude_m: cfg.regulatory.operating_altitude_m,
            buffer_m: cfg.regulatory.buffer_m(),
            frame,
        },
        proposal: ProposalSummary {
            half_width: stage.loop_config.half_width,
            response_floor: stage.loop_config.response_floor,
            iterations: stage.outcome.steps.len(),
            accepted: stage.outcome.accepted().count(),
            stop_reason: stage.outcome.stop,
        },
        config_digest: cfg.digest(),
    };
    Ok(PipelineOutput {
        report,
        trace: stage.outcome.trace(),
        ranked,
        ranking_prompt,
    })
}

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| PipelineError::io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| PipelineError::io(format!("{}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| PipelineError::io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Writes trace, report and optional ranking prompt to the configured paths.
pub fn write_outputs(cfg: &PipelineConfig, out: &PipelineOutput) -> Result<(), PipelineError> {
    write_atomic(&cfg.resolve(&cfg.output.trace), trace_to_json(&out.trace).as_bytes())?;
    write_atomic(&cfg.resolve(&cfg.output.report), out.report.to_json().as_bytes())?;
    if let (Some(path), Some(prompt)) = (&cfg.output.ranking_prompt, &out.ranking_prompt) {
        write_atomic(&cfg.resolve(path), prompt.as_bytes())?;
    }
    Ok(())
}

pub mod demo {
    //! Synthetic 256×256 Potsdam-style scenario for demos and tests.

    use super::*;
    use crate::ranker::{pois_to_geojson, ActiveWindow};
    use crate::raster::{potsdam_classes, Pixel, RasterKind, RasterMeta, WorldPoint};

    pub const SIZE: usize = 256;
    pub const FRAME: &str = "EPSG:25833";
    pub const ORIGIN: WorldPoint = WorldPoint::new(368_000.0, 5_808_000.0);

    const IMPERVIOUS: u8 = 0;
    const BUILDING: u8 = 1;
    const LOW_VEG: u8 = 2;
    const TREE: u8 = 3;
    const CAR: u8 = 4;
    const BACKGROUND: u8 = 5;

    fn fill(data: &mut [u8], x0: usize, y0: usize, w: usize, h: usize, v: u8) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                data[y * SIZE + x] = v;
            }
        }
    }

    fn world(x: f64, y: f64) -> WorldPoint {
        WorldPoint::new(ORIGIN.x + x, ORIGIN.y + y)
    }

    /// Writes rasters, POIs and `pipeline.toml` into `dir`; returns the config path.
    pub fn write_demo_scenario(dir: &Path) -> Result<PathBuf, PipelineError> {
        fs::create_dir_all(dir).map_err(PipelineError::io)?;
        let meta = RasterMeta::new(1.0, ORIGIN, FRAME, RasterKind::Labels)
            .expect("valid gsd")
            .with_classes(potsdam_classes());

        // patterned vegetation and buildings as the unsuitable backdrop
        let mut labels = vec![LOW_VEG; SIZE * SIZE];
        for by in (0..SIZE).step_by(32) {
            for bx in (0..SIZE).step_by(32) {
                let v = if (bx / 32 + by / 32) % 3 == 0 { BUILDING } else { TREE };
                fill(&mut labels, bx + 4, by + 4, 12, 12, v);
            }
        }
        // parking lot with a row of cars
        fill(&mut labels, 16, 16, 48, 32, IMPERVIOUS);
        fill(&mut labels, 20, 20, 30, 3, CAR);
        // plaza next to a school
        fill(&mut labels, 156, 24, 24, 24, IMPERVIOUS);
        // open ground; its southern half is forest on the standard map
        fill(&mut labels, 36, 150, 56, 60, BACKGROUND);
        // service yard near a gas station
        fill(&mut labels, 176, 170, 30, 30, IMPERVIOUS);
        // small courtyard, too small for the footprint
        fill(&mut labels, 110, 110, 12, 12, IMPERVIOUS);

        let label_raster = LabelRaster::new(SIZE, SIZE, labels, meta.clone()).map_err(PipelineError::io)?;
        label_raster.save(dir.join("labels.pgm")).map_err(PipelineError::io)?;

        let suit_meta = RasterMeta { kind: RasterKind::Suitability, classes: Default::default(), ..meta };
        let seg = derive_suitability(&label_raster, &ClassMapping::potsdam()).map_err(PipelineError::io)?;
        let mut map = SuitabilityRaster::new(SIZE, SIZE, seg.data().to_vec(), suit_meta.clone()).map_err(PipelineError::io)?;
        for y in 182..210 {
            for x in 36..92 {
                map.set(Pixel::new(x, y), false);
            }
        }
        map.save(dir.join("map_layer.pgm")).map_err(PipelineError::io)?;

        // debris in the parking lot not visible to segmentation
        let mut hazards = SuitabilityRaster::zeros(SIZE, SIZE, suit_meta);
        for (x, y) in [(40, 36), (41, 36), (44, 40), (52, 30)] {
            hazards.set(Pixel::new(x, y), true);
        }
        hazards.save(dir.join("hazards.pgm")).map_err(PipelineError::io)?;

        let pois = vec![
            PoiRecord::new("school", world(190.0, 40.0))
                .named("Lindenhof Grundschule")
                .with_hours(vec![ActiveWindow::weekdays(8, 16).expect("valid hours")])
                .in_frame(FRAME),
            PoiRecord::new("gas_station", world(214.0, 186.0))
                .named("Aral Zeppelinstrasse")
                .in_frame(FRAME),
            PoiRecord::new("cafe", world(60.0, 140.0)).named("Kiosk").in_frame(FRAME),
        ];
        fs::write(dir.join("pois.geojson"), pois_to_geojson(&pois) + "\n").map_err(PipelineError::io)?;

        let config = DEMO_CONFIG;
        let path = dir.join("pipeline.toml");
        fs::write(&path, config).map_err(PipelineError::io)?;
        Ok(path)
    }

    const DEMO_CONFIG: &str = r#"labels = "labels.pgm"
map_layer = "map_layer.pgm"
profile = "potsdam"
policy = "intersection"
seed = 0

[proposal]
landing_radius_m = 10.0
max_accepted = 5
max_iterations = 30

[verifier]
backend = "oracle"
hazards = "hazards.pgm"

[context]
poi = "pois.geojson"
timestamp = "2025-06-10T10:00:00"
weather = "clear"
events = []

[regulatory]
operating_altitude_m = 30.0

[output]
report = "out/report.json"
trace = "out/trace.json"
ranking_prompt = "out/ranking_prompt.md"
"#;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_runs_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = demo::write_demo_scenario(dir.path()).unwrap();
        let cfg = PipelineConfig::load(&cfg_path).unwrap();
        let a = run_pipeline(&cfg).unwrap();
        let b = run_pipeline(&cfg).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert!(!a.report.sites.is_empty());
        assert_eq!(a.report.config_digest.len(), 64);
        write_outputs(&cfg, &a).unwrap();
        assert!(dir.path().join("out/report.json").is_file());
        assert!(dir.path().join("out/ranking_prompt.md").is_file());
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = demo::write_demo_scenario(dir.path()).unwrap();
        let good = PipelineConfig::load(&cfg_path).unwrap();
        good.validate().unwrap();

        let mut missing = good.clone();
        missing.labels = "nope.pgm".into();
        assert!(matches!(missing.validate(), Err(PipelineError::Config(_))));

        let mut bad_profile = good.clone();
        bad_profile.profile = "paris".into();
        assert!(matches!(bad_profile.validate(), Err(PipelineError::Config(_))));

        let mut bad_loop = good.clone();
        bad_loop.proposal.max_iterations = 1;
        assert!(bad_loop.validate().is_err());

        let mut remote = good.clone();
        remote.verifier.backend = Backend::Remote;
        assert!(remote.validate().is_err());

        assert!(PipelineConfig::from_toml("labels = 3", ".").is_err());
        assert_ne!(good.digest(), bad_loop.digest());
        let mut moved = good.clone();
        moved.output.report = "elsewhere.json".into();
        assert_eq!(good.digest(), moved.digest());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::load(demo::write_demo_scenario(dir.path()).unwrap()).unwrap();
        let back = PipelineConfig::from_toml(&cfg.to_toml(), dir.path()).unwrap();
        assert_eq!(back, cfg);
    }
}
