//! Label and suitability rasters, class mappings, map cross-validation and
//! pixel/world georeferencing.
//!
//! Rasters are stored on disk as a binary PGM (`P5`, maxval 255) payload with a
//! JSON sidecar named `<raster>.meta.json`. For label rasters each byte is a
//! class index; for suitability rasters `255` encodes suitable and `0`
//! unsuitable.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sidecar format tag accepted by the loader.
pub const SIDECAR_FORMAT: &str = "ELSSR-1";

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("sidecar not found: {0}")]
    MissingSidecar(PathBuf),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("class index {index} at pixel ({x}, {y}) is not declared in the sidecar")]
    UnknownClassIndex { index: u8, x: usize, y: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("class name {0:?} does not resolve against the raster's class table")]
    UnresolvableClassName(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("pixel ({x}, {y}) outside {width}x{height} raster")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("world point ({0}, {1}) falls outside the raster")]
    WorldOutOfBounds(f64, f64),
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = RasterError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterKind {
    Labels,
    Suitability,
}

/// Integer pixel coordinate, `x` = column, `y` = row, origin at top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Row-major ordering key (row first, then column).
    pub fn row_major(&self) -> (usize, usize) {
        (self.y, self.x)
    }
}

/// Point in the planar world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    /// Square of half-width `half` around `center`, clipped to `width × height`.
    pub fn square_clipped(center: Pixel, half: usize, width: usize, height: usize) -> Self {
        Self {
            x0: center.x.saturating_sub(half),
            y0: center.y.saturating_sub(half),
            x1: (center.x + half + 1).min(width),
            y1: (center.y + half + 1).min(height),
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn contains(&self, p: Pixel) -> bool {
        (self.x0..self.x1).contains(&p.x) && (self.y0..self.y1).contains(&p.y)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| Pixel::new(x, y)))
    }
}

/// Axis-aligned rectangle in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldRect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl WorldRect {
    /// Euclidean distance from `p` to the rectangle; zero when `p` is inside.
    pub fn distance_to(&self, p: WorldPoint) -> f64 {
        let dx = (self.min_x - p.x).max(0.0).max(p.x - self.max_x);
        let dy = (self.min_y - p.y).max(0.0).max(p.y - self.max_y);
        dx.hypot(dy)
    }

    pub fn center(&self) -> WorldPoint {
        WorldPoint::new(
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }
}

/// Georeferencing and class table shared by label and suitability rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterMeta {
    /// Ground sample distance, meters per pixel.
    pub gsd: f64,
    /// World coordinates of pixel (0, 0).
    pub origin: WorldPoint,
    pub crs_label: String,
    pub kind: RasterKind,
    pub classes: BTreeMap<u8, String>,
}

impl RasterMeta {
    pub fn new(gsd: f64, origin: WorldPoint, crs_label: impl Into<String>, kind: RasterKind) -> Result<Self> {
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(RasterError::Invalid(format!("gsd must be positive, got {gsd}")));
        }
        Ok(Self {
            gsd,
            origin,
            crs_label: crs_label.into(),
            kind,
            classes: BTreeMap::new(),
        })
    }

    pub fn with_classes<I, S>(mut self, classes: I) -> Self
    where
        I: IntoIterator<Item = (u8, S)>,
        S: Into<String>,
    {
        self.classes = classes.into_iter().map(|(k, v)| (k, v.into())).collect();
        self
    }

    /// Index of a class name, if declared.
    pub fn class_index(&self, name: &str) -> Option<u8> {
        self.classes
            .iter()
            .find_map(|(idx, n)| (n == name).then_some(*idx))
    }
}

fn check_bounds(p: (i64, i64), width: usize, height: usize) -> Result<Pixel> {
    let (x, y) = p;
    if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
        return Err(RasterError::OutOfBounds { x, y, width, height });
    }
    Ok(Pixel::new(x as usize, y as usize))
}

/// World position of the top-left corner of pixel `p`.
pub fn pixel_to_world(p: Pixel, meta: &RasterMeta, width: usize, height: usize) -> Result<WorldPoint> {
    check_bounds((p.x as i64, p.y as i64), width, height)?;
    Ok(WorldPoint::new(
        meta.origin.x + p.x as f64 * meta.gsd,
        meta.origin.y + p.y as f64 * meta.gsd,
    ))
}

/// Pixel containing world point `w`. Values within 1e-9 of a pixel edge snap
/// to it so that `world_to_pixel(pixel_to_world(p)) == p`.
pub fn world_to_pixel(w: WorldPoint, meta: &RasterMeta, width: usize, height: usize) -> Result<Pixel> {
    fn axis(v: f64, origin: f64, gsd: f64) -> f64 {
        let q = (v - origin) / gsd;
        let r = q.round();
        if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
            r
        } else {
            q.floor()
        }
    }
    let cx = axis(w.x, meta.origin.x, meta.gsd);
    let cy = axis(w.y, meta.origin.y, meta.gsd);
    if !cx.is_finite() || !cy.is_finite() {
        return Err(RasterError::WorldOutOfBounds(w.x, w.y));
    }
    check_bounds((cx as i64, cy as i64), width, height)
        .map_err(|_| RasterError::WorldOutOfBounds(w.x, w.y))
}

/// Per-pixel class indices from a segmentation network.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRaster {
    width: usize,
    height: usize,
    data: Vec<u8>,
    meta: RasterMeta,
}

impl LabelRaster {
    pub fn new(width: usize, height: usize, data: Vec<u8>, mut meta: RasterMeta) -> Result<Self> {
        if data.len() != width * height {
            return Err(RasterError::DimensionMismatch(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !meta.classes.contains_key(&v) {
                return Err(RasterError::UnknownClassIndex {
                    index: v,
                    x: i % width,
                    y: i / width,
                });
            }
        }
        meta.kind = RasterKind::Labels;
        Ok(Self { width, height, data, meta })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn meta(&self) -> &RasterMeta {
        &self.meta
    }

    pub fn get(&self, p: Pixel) -> u8 {
        self.data[p.y * self.width + p.x]
    }

    pub fn class_name(&self, p: Pixel) -> &str {
        &self.meta.classes[&self.get(p)]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (width, height, data, meta) = load_pair(path.as_ref(), RasterKind::Labels)?;
        Self::new(width, height, data, meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_pair(path.as_ref(), self.width, self.height, &self.data, &self.meta)
    }
}

/// Binary landing suitability grid: 1 = suitable, 0 = unsuitable.
#[derive(Debug, Clone, PartialEq)]
pub struct SuitabilityRaster {
    width: usize,
    height: usize,
    data: Vec<u8>,
    meta: RasterMeta,
}

impl SuitabilityRaster {
    pub fn new(width: usize, height: usize, data: Vec<u8>, mut meta: RasterMeta) -> Result<Self> {
        if data.len() != width * height {
            return Err(RasterError::DimensionMismatch(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(RasterError::Invalid(format!(
                "suitability value {} at pixel ({}, {}) is not 0 or 1",
                data[i],
                i % width,
                i / width
            )));
        }
        meta.kind = RasterKind::Suitability;
        Ok(Self { width, height, data, meta })
    }

    pub fn zeros(width: usize, height: usize, meta: RasterMeta) -> Self {
        Self::new(width, height, vec![0; width * height], meta).expect("zero raster is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn meta(&self) -> &RasterMeta {
        &self.meta
    }

    pub fn get(&self, p: Pixel) -> u8 {
        self.data[p.y * self.width + p.x]
    }

    pub fn set(&mut self, p: Pixel, suitable: bool) {
        self.data[p.y * self.width + p.x] = u8::from(suitable);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Number of set pixels inside `rect`.
    pub fn count_in(&self, rect: &PixelRect) -> usize {
        (rect.y0..rect.y1)
            .map(|y| {
                self.data[y * self.width + rect.x0..y * self.width + rect.x1]
                    .iter()
                    .filter(|&&v| v == 1)
                    .count()
            })
            .sum()
    }

    pub fn pixel_to_world(&self, p: Pixel) -> Result<WorldPoint> {
        pixel_to_world(p, &self.meta, self.width, self.height)
    }

    pub fn world_to_pixel(&self, w: WorldPoint) -> Result<Pixel> {
        world_to_pixel(w, &self.meta, self.width, self.height)
    }

    /// World extent covered by the pixels of `rect`.
    pub fn rect_to_world(&self, rect: &PixelRect) -> WorldRect {
        let m = &self.meta;
        WorldRect {
            min_x: m.origin.x + rect.x0 as f64 * m.gsd,
            min_y: m.origin.y + rect.y0 as f64 * m.gsd,
            max_x: m.origin.x + rect.x1 as f64 * m.gsd,
            max_y: m.origin.y + rect.y1 as f64 * m.gsd,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (width, height, bytes, meta) = load_pair(path.as_ref(), RasterKind::Suitability)?;
        let mut data = Vec::with_capacity(bytes.len());
        for (i, b) in bytes.into_iter().enumerate() {
            data.push(match b {
                0 => 0,
                255 => 1,
                other => {
                    return Err(RasterError::Invalid(format!(
                        "suitability byte {other} at pixel ({}, {}); expected 0 or 255",
                        i % width,
                        i / width
                    )))
                }
            });
        }
        Self::new(width, height, data, meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| v * 255).collect();
        save_pair(path.as_ref(), self.width, self.height, &bytes, &self.meta)
    }
}

/// Named set of land-cover classes considered landable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMapping {
    pub profile_name: String,
    pub suitable_classes: BTreeSet<String>,
}

impl ClassMapping {
    pub fn new<I, S>(profile_name: impl Into<String>, classes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let suitable_classes: BTreeSet<String> = classes.into_iter().map(Into::into).collect();
        if suitable_classes.is_empty() {
            return Err(RasterError::Invalid("class mapping has no suitable classes".into()));
        }
        Ok(Self {
            profile_name: profile_name.into(),
            suitable_classes,
        })
    }

    /// ISPRS Potsdam labels: background (clutter) and impervious surfaces.
    pub fn potsdam() -> Self {
        Self::new("potsdam", ["background", "impervious_surfaces"]).expect("nonempty")
    }

    /// LoveDA labels (Nanjing imagery): background and barren.
    pub fn loveda() -> Self {
        Self::new("loveda", ["background", "barren"]).expect("nonempty")
    }

    pub fn by_profile(name: &str) -> Option<Self> {
        match name {
            "potsdam" => Some(Self::potsdam()),
            "loveda" | "nanjing" => Some(Self::loveda()),
            _ => None,
        }
    }
}

/// Class tables matching the built-in profiles.
pub fn potsdam_classes() -> BTreeMap<u8, String> {
    [
        "impervious_surfaces",
        "building",
        "low_vegetation",
        "tree",
        "car",
        "background",
    ]
    .into_iter()
    .enumerate()
    .map(|(i, n)| (i as u8, n.to_string()))
    .collect()
}

pub fn loveda_classes() -> BTreeMap<u8, String> {
    [
        "background",
        "building",
        "road",
        "water",
        "barren",
        "forest",
        "agricultural",
    ]
    .into_iter()
    .enumerate()
    .map(|(i, n)| (i as u8, n.to_string()))
    .collect()
}

/// Marks every pixel whose class name is in `mapping` as suitable.
pub fn derive_suitability(labels: &LabelRaster, mapping: &ClassMapping) -> Result<SuitabilityRaster> {
    let mut lut = [0u8; 256];
    for name in &mapping.suitable_classes {
        let idx = labels
            .meta
            .class_index(name)
            .ok_or_else(|| RasterError::UnresolvableClassName(name.clone()))?;
        lut[idx as usize] = 1;
    }
    let data = labels.data.iter().map(|&c| lut[c as usize]).collect();
    let mut meta = labels.meta.clone();
    meta.kind = RasterKind::Suitability;
    SuitabilityRaster::new(labels.width, labels.height, data, meta)
}

/// How segmentation and the standard-map layer are combined where they disagree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossValidationPolicy {
    #[default]
    Intersection,
    Union,
    MapPriority,
    SegPriority,
}

impl std::str::FromStr for CrossValidationPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "intersection" => Ok(Self::Intersection),
            "union" => Ok(Self::Union),
            "map_priority" => Ok(Self::MapPriority),
            "seg_priority" => Ok(Self::SegPriority),
            other => Err(format!("unknown cross-validation policy {other:?}")),
        }
    }
}

pub fn cross_validate(
    seg: &SuitabilityRaster,
    map_layer: &SuitabilityRaster,
    policy: CrossValidationPolicy,
) -> Result<SuitabilityRaster> {
    if seg.width != map_layer.width || seg.height != map_layer.height {
        return Err(RasterError::ShapeMismatch(format!(
            "segmentation {}x{} vs map {}x{}",
            seg.width, seg.height, map_layer.width, map_layer.height
        )));
    }
    if seg.meta.gsd != map_layer.meta.gsd {
        return Err(RasterError::ShapeMismatch(format!(
            "segmentation gsd {} vs map gsd {}",
            seg.meta.gsd, map_layer.meta.gsd
        )));
    }
    let data = seg
        .data
        .iter()
        .zip(&map_layer.data)
        .map(|(&s, &m)| match policy {
            CrossValidationPolicy::Intersection => s & m,
            CrossValidationPolicy::Union => s | m,
            CrossValidationPolicy::MapPriority => m,
            CrossValidationPolicy::SegPriority => s,
        })
        .collect();
    SuitabilityRaster::new(seg.width, seg.height, data, seg.meta.clone())
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    kind: RasterKind,
    width: usize,
    height: usize,
    gsd_m_per_px: f64,
    origin: [f64; 2],
    crs: String,
    #[serde(default)]
    classes: BTreeMap<String, String>,
}

/// `<raster>.meta.json` next to the payload.
pub fn sidecar_path(raster: &Path) -> PathBuf {
    let mut name = raster.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RasterError + '_ {
    move |source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_pair(path: &Path, expected: RasterKind) -> Result<(usize, usize, Vec<u8>, RasterMeta)> {
    let side_path = sidecar_path(path);
    if !side_path.exists() {
        return Err(RasterError::MissingSidecar(side_path));
    }
    let side_text = fs::read_to_string(&side_path).map_err(io_err(&side_path))?;
    let side: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| RasterError::MalformedHeader(format!("{}: {e}", side_path.display())))?;
    if side.format != SIDECAR_FORMAT {
        return Err(RasterError::MalformedHeader(format!(
            "unsupported sidecar format {:?}",
            side.format
        )));
    }
    if side.kind != expected {
        return Err(RasterError::MalformedHeader(format!(
            "sidecar declares kind {:?}, expected {:?}",
            side.kind, expected
        )));
    }
    let mut classes = BTreeMap::new();
    for (k, v) in side.classes {
        let idx: u8 = k
            .parse()
            .map_err(|_| RasterError::MalformedHeader(format!("class key {k:?} is not a byte index")))?;
        classes.insert(idx, v);
    }
    let meta = RasterMeta::new(
        side.gsd_m_per_px,
        WorldPoint::new(side.origin[0], side.origin[1]),
        side.crs,
        side.kind,
    )
    .map_err(|e| RasterError::MalformedHeader(e.to_string()))?
    .with_classes(classes);

    let bytes = fs::read(path).map_err(io_err(path))?;
    let (w, h, payload) = parse_pgm(&bytes)?;
    if w != side.width || h != side.height {
        return Err(RasterError::DimensionMismatch(format!(
            "payload header {w}x{h} vs sidecar {}x{}",
            side.width, side.height
        )));
    }
    if payload.len() != w * h {
        return Err(RasterError::DimensionMismatch(format!(
            "payload of {} bytes declared {w}x{h}",
            payload.len()
        )));
    }
    Ok((w, h, payload.to_vec(), meta))
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let mut pos = 0;
    let mut next_token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(RasterError::MalformedHeader("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = next_token()?;
    if magic != "P5" {
        return Err(RasterError::MalformedHeader(format!("expected P5 magic, found {magic:?}")));
    }
    let mut number = |what: &str| -> Result<usize> {
        let tok = next_token()?;
        tok.parse()
            .map_err(|_| RasterError::MalformedHeader(format!("bad PGM {what}: {tok:?}")))
    };
    let w = number("width")?;
    let h = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(RasterError::MalformedHeader(format!("maxval must be 255, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(RasterError::MalformedHeader("missing payload separator".into()));
    }
    Ok((w, h, &bytes[pos + 1..]))
}

fn save_pair(path: &Path, width: usize, height: usize, payload: &[u8], meta: &RasterMeta) -> Result<()> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(payload);
    fs::write(path, bytes).map_err(io_err(path))?;

    let side = Sidecar {
        format: SIDECAR_FORMAT.to_string(),
        kind: meta.kind,
        width,
        height,
        gsd_m_per_px: meta.gsd,
        origin: [meta.origin.x, meta.origin.y],
        crs: meta.crs_label.clone(),
        classes: meta.classes.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    };
    let side_path = sidecar_path(path);
    let text = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    fs::write(&side_path, text + "\n").map_err(io_err(&side_path))
}
