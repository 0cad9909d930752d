//! Seeded random cavity topologies for chaotic-cavity-backed DMAs.
//!
//! A topology is a simple polygon (a perturbed square with one concave
//! notch to break symmetry), a fence of vias sampled along its edges at
//! uniform arc length, one feed, and `n_meta_atoms` randomly placed
//! meta-atoms. The via spacing is the mutual-coupling knob: denser fences
//! reverberate harder. Generation is a pure function of (spec, context);
//! all randomness flows from the spec's 64-bit seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cap on rejection-sampling attempts per placed point (and per candidate
/// boundary). Exceeding it is an infeasible-spec error, never a silent
/// constraint relaxation.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Lift into 3D; the cavity plane is z = 0.
    pub fn lift(&self, z: f64) -> Point3 {
        Point3 {
            x: self.x,
            y: self.y,
            z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Physics context
// ---------------------------------------------------------------------------

/// Operating frequency and the derived free-space wavelength / wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsContext {
    /// Operating frequency in Hz.
    pub frequency: f64,
    /// Free-space wavelength c0 / f, in m.
    pub wavelength: f64,
    /// Free-space wavenumber 2 pi / lambda, in rad/m.
    pub wavenumber: f64,
}

impl PhysicsContext {
    pub fn new(frequency: f64) -> Result<Self> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "frequency must be positive and finite, got {frequency}"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / frequency;
        let wavenumber = 2.0 * std::f64::consts::PI / wavelength;
        Ok(Self {
            frequency,
            wavelength,
            wavenumber,
        })
    }

    /// Default 10 GHz context.
    pub fn x_band() -> Self {
        Self::new(10.0e9).expect("10 GHz is valid")
    }
}

// ---------------------------------------------------------------------------
// Topology spec
// ---------------------------------------------------------------------------

/// Rule for placing the single feed inside the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FeedPlacement {
    /// Geometric center of the bounding square.
    Center,
    /// Seeded uniform draw inside the cavity.
    Random,
    /// Explicit coordinates in meters.
    Fixed { x: f64, y: f64 },
}

/// Everything needed to generate one topology, SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    /// Edge length of the square bounding box, m.
    pub cavity_side: f64,
    /// Vertex displacement budget as a fraction of cavity_side / 4, in [0, 1).
    pub boundary_irregularity: f64,
    pub n_meta_atoms: usize,
    /// Maximum arc-length spacing between consecutive vias, m.
    pub via_spacing: f64,
    /// Minimum separation between the feed / meta-atoms and every other
    /// scatterer, m. Via-to-via spacing is governed by `via_spacing` instead:
    /// dense fences are intentionally closer-packed than this floor.
    pub min_separation: f64,
    pub feed_placement: FeedPlacement,
    pub rng_seed: u64,
}

impl TopologySpec {
    /// Baseline spec at the given context: 10-wavelength square cavity,
    /// 64 meta-atoms, lambda/5 separation floor, medium fence density.
    pub fn default_at(ctx: &PhysicsContext) -> Self {
        Self {
            cavity_side: 10.0 * ctx.wavelength,
            boundary_irregularity: 0.3,
            n_meta_atoms: 64,
            via_spacing: ctx.wavelength / 3.0,
            min_separation: ctx.wavelength / 5.0,
            feed_placement: FeedPlacement::Random,
            rng_seed: 11,
        }
    }

    pub fn validate(&self, ctx: &PhysicsContext) -> Result<()> {
        if !(self.cavity_side >= 5.0 * ctx.wavelength) {
            return Err(Error::InvalidSpec(format!(
                "cavity_side {} m is below 5 wavelengths ({} m)",
                self.cavity_side,
                5.0 * ctx.wavelength
            )));
        }
        if !(0.0..1.0).contains(&self.boundary_irregularity) {
            return Err(Error::InvalidSpec(format!(
                "boundary_irregularity {} outside [0, 1)",
                self.boundary_irregularity
            )));
        }
        if self.n_meta_atoms < 1 {
            return Err(Error::InvalidSpec("n_meta_atoms must be >= 1".into()));
        }
        if !(self.via_spacing > 0.0) {
            return Err(Error::InvalidSpec("via_spacing must be > 0".into()));
        }
        if !(self.min_separation > 0.0) {
            return Err(Error::InvalidSpec("min_separation must be > 0".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Coupling levels
// ---------------------------------------------------------------------------

/// Mutual-coupling regimes, ordered by increasing expected coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingLevel {
    /// All dipole-dipole couplings switched off in the solver; only the
    /// feed-to-scatterer terms survive. Vias drop out entirely.
    Unilateral,
    /// Via spacing = lambda.
    Sparse,
    /// Via spacing = lambda / 3.
    Medium,
    /// Via spacing = lambda / 10.
    Dense,
}

impl CouplingLevel {
    pub const ALL: [CouplingLevel; 4] = [
        CouplingLevel::Unilateral,
        CouplingLevel::Sparse,
        CouplingLevel::Medium,
        CouplingLevel::Dense,
    ];

    /// Via spacing for this level, in wavelengths. The unilateral preset
    /// keeps the sparse fence so topologies stay comparable; the solver
    /// ignores it.
    pub fn via_spacing_wavelengths(&self) -> f64 {
        match self {
            CouplingLevel::Unilateral | CouplingLevel::Sparse => 1.0,
            CouplingLevel::Medium => 1.0 / 3.0,
            CouplingLevel::Dense => 0.1,
        }
    }

    /// Whether the solver must zero every dipole-dipole coupling.
    pub fn is_unilateral(&self) -> bool {
        matches!(self, CouplingLevel::Unilateral)
    }

    pub fn label(&self) -> &'static str {
        match self {
            CouplingLevel::Unilateral => "unilateral",
            CouplingLevel::Sparse => "sparse",
            CouplingLevel::Medium => "medium",
            CouplingLevel::Dense => "dense",
        }
    }
}

impl std::str::FromStr for CouplingLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unilateral" | "none" | "no" => Ok(CouplingLevel::Unilateral),
            "sparse" | "weak" => Ok(CouplingLevel::Sparse),
            "medium" => Ok(CouplingLevel::Medium),
            "dense" | "strong" => Ok(CouplingLevel::Dense),
            other => Err(Error::InvalidArgument(format!(
                "unknown coupling level '{other}'"
            ))),
        }
    }
}

/// A coupling level applied to a base spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPreset {
    pub level: CouplingLevel,
    pub spec: TopologySpec,
}

/// The four standard presets derived from a base spec, ordered by
/// increasing expected coupling. Only `via_spacing` differs between them.
pub fn coupling_levels(base: &TopologySpec, ctx: &PhysicsContext) -> Vec<CouplingPreset> {
    CouplingLevel::ALL
        .iter()
        .map(|&level| {
            let mut spec = base.clone();
            spec.via_spacing = level.via_spacing_wavelengths() * ctx.wavelength;
            CouplingPreset { level, spec }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

/// Immutable generated geometry for one DMA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmaTopology {
    pub feed_position: Point2,
    pub meta_atom_positions: Vec<Point2>,
    pub via_positions: Vec<Point2>,
    /// Counter-clockwise simple polygon.
    pub boundary_polygon: Vec<Point2>,
    pub context: PhysicsContext,
    pub spec: TopologySpec,
    /// SHA-256 of the canonical (spec, context) JSON; seeds are inside the spec.
    pub spec_fingerprint: String,
}

impl DmaTopology {
    pub fn n_meta_atoms(&self) -> usize {
        self.meta_atom_positions.len()
    }

    pub fn n_vias(&self) -> usize {
        self.via_positions.len()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }
}

/// Generate a topology from a spec. Deterministic in (spec, context).
pub fn generate_topology(spec: &TopologySpec, ctx: &PhysicsContext) -> Result<DmaTopology> {
    spec.validate(ctx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let polygon = sample_boundary(spec, &mut rng)?;
    let feed = place_feed(spec, &polygon, &mut rng)?;
    let metas = place_meta_atoms(spec, &polygon, &feed, &mut rng)?;
    let vias = place_vias(&polygon, spec.via_spacing);

    let fingerprint = canonical::fingerprint(&(spec, ctx));
    Ok(DmaTopology {
        feed_position: feed,
        meta_atom_positions: metas,
        via_positions: vias,
        boundary_polygon: polygon,
        context: *ctx,
        spec: spec.clone(),
        spec_fingerprint: fingerprint,
    })
}

/// Perturbed square with one rectangular concave notch. Re-drawn (bounded)
/// until the polygon is simple.
fn sample_boundary(spec: &TopologySpec, rng: &mut ChaCha8Rng) -> Result<Vec<Point2>> {
    let side = spec.cavity_side;
    let half = side / 2.0;
    let max_offset = spec.boundary_irregularity * side / 4.0;

    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        // CCW square, vertices displaced by a random offset <= max_offset.
        let square = [
            Point2::new(-half, -half),
            Point2::new(half, -half),
            Point2::new(half, half),
            Point2::new(-half, half),
        ];
        let mut verts: Vec<Point2> = Vec::with_capacity(8);
        for v in square {
            let radius = max_offset * rng.random::<f64>();
            let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            verts.push(Point2::new(
                v.x + radius * angle.cos(),
                v.y + radius * angle.sin(),
            ));
        }

        // One rectangular notch cut into a random edge (the wave-chaos inducer).
        let edge = rng.random_range(0..4usize);
        let t_center = 0.35 + 0.3 * rng.random::<f64>();
        let a = verts[edge];
        let b = verts[(edge + 1) % 4];
        let ex = b.x - a.x;
        let ey = b.y - a.y;
        let elen = ex.hypot(ey);
        let half_width = (0.06 + 0.04 * rng.random::<f64>()) * elen;
        let depth = (0.10 + 0.08 * rng.random::<f64>()) * side;
        // Interior is to the left of each CCW edge.
        let nx = -ey / elen;
        let ny = ex / elen;
        let t0 = t_center - half_width / elen;
        let t1 = t_center + half_width / elen;
        let p0 = Point2::new(a.x + t0 * ex, a.y + t0 * ey);
        let p3 = Point2::new(a.x + t1 * ex, a.y + t1 * ey);
        let p1 = Point2::new(p0.x + depth * nx, p0.y + depth * ny);
        let p2 = Point2::new(p3.x + depth * nx, p3.y + depth * ny);

        let mut polygon = Vec::with_capacity(8);
        for (i, v) in verts.iter().enumerate() {
            polygon.push(*v);
            if i == edge {
                polygon.extend_from_slice(&[p0, p1, p2, p3]);
            }
        }

        if polygon_is_simple(&polygon) {
            return Ok(polygon);
        }
    }
    Err(Error::InfeasibleSpec {
        reason: "could not sample a simple boundary polygon".into(),
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}

fn place_feed(spec: &TopologySpec, polygon: &[Point2], rng: &mut ChaCha8Rng) -> Result<Point2> {
    match spec.feed_placement {
        FeedPlacement::Center => {
            let p = Point2::new(0.0, 0.0);
            if admissible_interior_point(&p, polygon, spec.min_separation) {
                Ok(p)
            } else {
                Err(Error::InfeasibleSpec {
                    reason: "center feed violates containment or boundary clearance".into(),
                    attempts: 1,
                })
            }
        }
        FeedPlacement::Fixed { x, y } => {
            let p = Point2::new(x, y);
            if admissible_interior_point(&p, polygon, spec.min_separation) {
                Ok(p)
            } else {
                Err(Error::InfeasibleSpec {
                    reason: "fixed feed violates containment or boundary clearance".into(),
                    attempts: 1,
                })
            }
        }
        FeedPlacement::Random => {
            sample_interior_point(polygon, spec.min_separation, spec.cavity_side, rng, &[])
                .ok_or_else(|| Error::InfeasibleSpec {
                    reason: "could not place feed".into(),
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                })
        }
    }
}

fn place_meta_atoms(
    spec: &TopologySpec,
    polygon: &[Point2],
    feed: &Point2,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point2>> {
    let mut placed: Vec<Point2> = vec![*feed];
    for i in 0..spec.n_meta_atoms {
        match sample_interior_point(polygon, spec.min_separation, spec.cavity_side, rng, &placed) {
            Some(p) => placed.push(p),
            None => {
                return Err(Error::InfeasibleSpec {
                    reason: format!("could not place meta-atom {i}"),
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                })
            }
        }
    }
    Ok(placed.split_off(1))
}

/// Uniform rejection sampling in the bounding square. A point is accepted
/// when it is strictly inside, keeps `min_separation` clearance from every
/// boundary edge (which also guarantees clearance from every via, since
/// vias sit on the edges), and keeps `min_separation` from prior points.
fn sample_interior_point(
    polygon: &[Point2],
    min_separation: f64,
    cavity_side: f64,
    rng: &mut ChaCha8Rng,
    existing: &[Point2],
) -> Option<Point2> {
    let half = cavity_side / 2.0 + cavity_side * 0.25;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = Point2::new(
            (2.0 * rng.random::<f64>() - 1.0) * half,
            (2.0 * rng.random::<f64>() - 1.0) * half,
        );
        if !admissible_interior_point(&p, polygon, min_separation) {
            continue;
        }
        if existing.iter().any(|q| p.distance(q) < min_separation) {
            continue;
        }
        return Some(p);
    }
    None
}

fn admissible_interior_point(p: &Point2, polygon: &[Point2], clearance: f64) -> bool {
    point_in_polygon(p, polygon) && distance_to_boundary(p, polygon) >= clearance
}

/// Vias at uniform arc length along the polygon, spacing <= via_spacing.
/// No randomness: the irregular boundary supplies the disorder, and the
/// via count stays a clean function of the spacing.
fn place_vias(polygon: &[Point2], via_spacing: f64) -> Vec<Point2> {
    let perimeter = polygon_perimeter(polygon);
    let n = (perimeter / via_spacing).ceil().max(1.0) as usize;
    let step = perimeter / n as f64;
    (0..n)
        .map(|i| point_at_arclength(polygon, i as f64 * step))
        .collect()
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    FeedOutsideBoundary,
    MetaAtomOutsideBoundary { index: usize },
    SeparationTooSmall { a: String, b: String, distance: f64 },
    ViaOffBoundary { index: usize, distance: f64 },
    ViaSpacingExceeded { index: usize, spacing: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every topology invariant; never fails, just reports.
/// Via-to-via distances are checked against the via spacing, not against
/// `min_separation` (dense fences pack tighter than the scatterer floor).
pub fn validate_topology(t: &DmaTopology) -> ValidationReport {
    let mut report = ValidationReport::default();
    let poly = &t.boundary_polygon;
    let min_sep = t.spec.min_separation;
    let tol = 1e-9 * t.spec.cavity_side;

    if !point_in_polygon(&t.feed_position, poly) {
        report.violations.push(Violation::FeedOutsideBoundary);
    }
    for (i, p) in t.meta_atom_positions.iter().enumerate() {
        if !point_in_polygon(p, poly) {
            report
                .violations
                .push(Violation::MetaAtomOutsideBoundary { index: i });
        }
    }

    // Pairwise separation among feed, meta-atoms, and meta/feed-to-via pairs.
    let mut labeled: Vec<(String, Point2)> = vec![("feed".into(), t.feed_position)];
    for (i, p) in t.meta_atom_positions.iter().enumerate() {
        labeled.push((format!("meta[{i}]"), *p));
    }
    for i in 0..labeled.len() {
        for j in (i + 1)..labeled.len() {
            let d = labeled[i].1.distance(&labeled[j].1);
            if d < min_sep - tol {
                report.violations.push(Violation::SeparationTooSmall {
                    a: labeled[i].0.clone(),
                    b: labeled[j].0.clone(),
                    distance: d,
                });
            }
        }
        for (k, v) in t.via_positions.iter().enumerate() {
            let d = labeled[i].1.distance(v);
            if d < min_sep - tol {
                report.violations.push(Violation::SeparationTooSmall {
                    a: labeled[i].0.clone(),
                    b: format!("via[{k}]"),
                    distance: d,
                });
            }
        }
    }

    for (i, v) in t.via_positions.iter().enumerate() {
        let d = distance_to_boundary(v, poly);
        if d > tol {
            report
                .violations
                .push(Violation::ViaOffBoundary { index: i, distance: d });
        }
    }
    let n_via = t.via_positions.len();
    if n_via > 1 {
        for i in 0..n_via {
            let d = t.via_positions[i].distance(&t.via_positions[(i + 1) % n_via]);
            // Chord length <= arc length, so this is safe against the arc bound.
            if d > t.spec.via_spacing * (1.0 + 1e-9) {
                report
                    .violations
                    .push(Violation::ViaSpacingExceeded { index: i, spacing: d });
            }
        }
    }

    report
}

// ---------------------------------------------------------------------------
// Polygon utilities
// ---------------------------------------------------------------------------

pub fn polygon_perimeter(polygon: &[Point2]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| polygon[i].distance(&polygon[(i + 1) % n]))
        .sum()
}

/// Even-odd ray casting. Points exactly on an edge are not "strictly inside";
/// generated interior points always keep positive boundary clearance, so the
/// boundary case never matters for them.
pub fn point_in_polygon(p: &Point2, polygon: &[Point2]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (polygon[i], polygon[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let x_cross = pj.x + (p.y - pj.y) / (pi.y - pj.y) * (pi.x - pj.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn distance_to_boundary(p: &Point2, polygon: &[Point2]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| distance_point_segment(p, &polygon[i], &polygon[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn distance_point_segment(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0);
    p.distance(&Point2::new(a.x + t * abx, a.y + t * aby))
}

fn point_at_arclength(polygon: &[Point2], s: f64) -> Point2 {
    let n = polygon.len();
    let mut remaining = s;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let len = a.distance(&b);
        if remaining <= len {
            let t = if len > 0.0 { remaining / len } else { 0.0 };
            return Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        }
        remaining -= len;
    }
    polygon[0]
}

fn polygon_is_simple(polygon: &[Point2]) -> bool {
    let n = polygon.len();
    for i in 0..n {
        let (a1, a2) = (polygon[i], polygon[(i + 1) % n]);
        for j in (i + 1)..n {
            // Skip edges sharing a vertex.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (polygon[j], polygon[(j + 1) % n]);
            if segments_intersect(&a1, &a2, &b1, &b2) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a1: &Point2, a2: &Point2, b1: &Point2, b2: &Point2) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Collinear overlaps count as intersections.
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(a: &Point2, b: &Point2, p: &Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}
