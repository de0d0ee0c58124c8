//! Tract geometry: area, point containment and a uniform-grid spatial index.
//!
//! Coordinates are `[lon, lat]` pairs in WGS84 degrees, the GeoJSON order.

use crate::ingest::RawTractFeature;

/// Mean Earth radius used for the local equirectangular projection.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Areas at or below this are treated as degenerate.
pub const AREA_TOLERANCE_KM2: f64 = 1e-12;

/// Distance (in degrees) within which a point counts as lying on an edge.
const BOUNDARY_EPSILON: f64 = 1e-12;

pub type Coord = [f64; 2];

/// A closed coordinate ring; the last coordinate repeats the first.
pub type Ring = Vec<Coord>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeoError {
    #[error("spatial index needs at least one tract")]
    EmptyTractSet,
    #[error("tract {tract_id}: polygon area {area_km2} km2 is not positive")]
    DegeneratePolygon { tract_id: String, area_km2: f64 },
    #[error("tract {tract_id}: area_km2 property {value:?} is not a positive number")]
    InvalidAreaProperty { tract_id: String, value: String },
    #[error("duplicate tract id {0}")]
    DuplicateTractId(String),
}

/// Axis-aligned bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    fn empty() -> Self {
        BBox {
            min_lon: f64::INFINITY,
            min_lat: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            max_lat: f64::NEG_INFINITY,
        }
    }

    fn extend(&mut self, [lon, lat]: Coord) {
        self.min_lon = self.min_lon.min(lon);
        self.min_lat = self.min_lat.min(lat);
        self.max_lon = self.max_lon.max(lon);
        self.max_lat = self.max_lat.max(lat);
    }

    fn union(&mut self, other: &BBox) {
        self.extend([other.min_lon, other.min_lat]);
        self.extend([other.max_lon, other.max_lat]);
    }

    #[inline]
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.min_lon && lon <= self.max_lon && lat >= self.min_lat && lat <= self.max_lat
    }

    pub fn of_polygons(polygons: &[Polygon]) -> BBox {
        let mut bbox = BBox::empty();
        for p in polygons {
            for &c in p.exterior.iter().chain(p.holes.iter().flatten()) {
                bbox.extend(c);
            }
        }
        bbox
    }
}

/// A validated spatial unit ready for assignment and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Tract {
    pub tract_id: String,
    pub polygons: Vec<Polygon>,
    pub bbox: BBox,
    pub area_km2: f64,
}

impl Tract {
    /// Builds a tract, taking its area from an `area_km2` property when one
    /// is present and computing it from the rings otherwise.
    pub fn from_raw(raw: &RawTractFeature) -> Result<Tract, GeoError> {
        let area_km2 = match raw.properties.get("area_km2") {
            Some(value) => match value.trim().parse::<f64>() {
                Ok(a) if a.is_finite() && a > 0.0 => a,
                _ => {
                    return Err(GeoError::InvalidAreaProperty {
                        tract_id: raw.tract_id.clone(),
                        value: value.clone(),
                    })
                }
            },
            None => polygon_area_km2(&raw.polygons).map_err(|area_km2| {
                GeoError::DegeneratePolygon {
                    tract_id: raw.tract_id.clone(),
                    area_km2,
                }
            })?,
        };
        Ok(Tract {
            tract_id: raw.tract_id.clone(),
            bbox: BBox::of_polygons(&raw.polygons),
            polygons: raw.polygons.clone(),
            area_km2,
        })
    }

    /// Closed-set containment: boundary points count as inside, points in
    /// holes do not.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.bbox.contains(lon, lat) && self.polygons.iter().any(|p| polygon_contains(p, lon, lat))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RingPosition {
    Inside,
    Outside,
    Boundary,
}

#[inline]
fn on_segment(a: Coord, b: Coord, x: f64, y: f64) -> bool {
    if x < a[0].min(b[0]) - BOUNDARY_EPSILON
        || x > a[0].max(b[0]) + BOUNDARY_EPSILON
        || y < a[1].min(b[1]) - BOUNDARY_EPSILON
        || y > a[1].max(b[1]) + BOUNDARY_EPSILON
    {
        return false;
    }
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let cross = dx * (y - a[1]) - dy * (x - a[0]);
    cross.abs() <= BOUNDARY_EPSILON * dx.hypot(dy)
}

/// Even-odd ray cast towards +x with an explicit boundary test first.
fn ring_position(ring: &[Coord], x: f64, y: f64) -> RingPosition {
    let mut inside = false;
    for edge in ring.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        if on_segment(a, b, x, y) {
            return RingPosition::Boundary;
        }
        if (a[1] > y) != (b[1] > y) {
            let x_cross = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        RingPosition::Inside
    } else {
        RingPosition::Outside
    }
}

pub fn polygon_contains(polygon: &Polygon, lon: f64, lat: f64) -> bool {
    match ring_position(&polygon.exterior, lon, lat) {
        RingPosition::Outside => false,
        RingPosition::Boundary => true,
        RingPosition::Inside => polygon
            .holes
            .iter()
            .all(|h| ring_position(h, lon, lat) != RingPosition::Inside),
    }
}

fn projected_ring_area(ring: &[Coord], origin: Coord, cos_lat0: f64) -> f64 {
    let k = EARTH_RADIUS_KM.to_radians();
    let project = |c: Coord| ((c[0] - origin[0]) * k * cos_lat0, (c[1] - origin[1]) * k);
    let mut twice = 0.0;
    for edge in ring.windows(2) {
        let (x0, y0) = project(edge[0]);
        let (x1, y1) = project(edge[1]);
        twice += x0 * y1 - x1 * y0;
    }
    (twice / 2.0).abs()
}

fn mean_latitude(ring: &[Coord]) -> f64 {
    // The closing coordinate repeats the first and is not a distinct vertex.
    let vertices = &ring[..ring.len().saturating_sub(1).max(1)];
    vertices.iter().map(|c| c[1]).sum::<f64>() / vertices.len() as f64
}

/// Shoelace area in km² after projecting each polygon about the mean
/// latitude of its exterior vertices; holes are subtracted.
///
/// Returns the offending area as `Err` when the result is not positive.
pub fn polygon_area_km2(polygons: &[Polygon]) -> Result<f64, f64> {
    let mut total = 0.0;
    for p in polygons {
        if p.exterior.len() < 2 {
            continue;
        }
        let origin = p.exterior[0];
        let cos_lat0 = mean_latitude(&p.exterior).to_radians().cos();
        total += projected_ring_area(&p.exterior, origin, cos_lat0);
        for hole in &p.holes {
            total -= projected_ring_area(hole, origin, cos_lat0);
        }
    }
    if total > AREA_TOLERANCE_KM2 {
        Ok(total)
    } else {
        Err(total)
    }
}

/// Immutable uniform-grid index over a tract set.
///
/// Tracts are stored sorted by id and every cell lists candidate tracts in
/// ascending index order, so the first containing candidate is also the
/// smallest id. That makes assignment independent of insertion order.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    tracts: Vec<Tract>,
    envelope: BBox,
    cols: usize,
    rows: usize,
    cell_width: f64,
    cell_height: f64,
    cell_offsets: Vec<u32>,
    cell_members: Vec<u32>,
}

impl SpatialIndex {
    /// Builds with roughly four grid cells per tract.
    pub fn build(tracts: Vec<Tract>) -> Result<SpatialIndex, GeoError> {
        let cells = tracts.len().saturating_mul(4);
        Self::build_with_cells(tracts, cells)
    }

    /// Builds with approximately `target_cells` grid cells.
    pub fn build_with_cells(
        mut tracts: Vec<Tract>,
        target_cells: usize,
    ) -> Result<SpatialIndex, GeoError> {
        if tracts.is_empty() {
            return Err(GeoError::EmptyTractSet);
        }
        tracts.sort_by(|a, b| a.tract_id.cmp(&b.tract_id));
        if let Some(w) = tracts.windows(2).find(|w| w[0].tract_id == w[1].tract_id) {
            return Err(GeoError::DuplicateTractId(w[0].tract_id.clone()));
        }

        let mut envelope = BBox::empty();
        for t in &tracts {
            envelope.union(&t.bbox);
        }
        let width = (envelope.max_lon - envelope.min_lon).max(f64::MIN_POSITIVE);
        let height = (envelope.max_lat - envelope.min_lat).max(f64::MIN_POSITIVE);
        let target = target_cells.max(1) as f64;
        let cols = ((target * width / height).sqrt().round() as usize).clamp(1, 4096);
        let rows = ((target / cols as f64).round() as usize).clamp(1, 4096);

        let mut index = SpatialIndex {
            tracts,
            envelope,
            cols,
            rows,
            cell_width: width / cols as f64,
            cell_height: height / rows as f64,
            cell_offsets: Vec::new(),
            cell_members: Vec::new(),
        };

        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); cols * rows];
        for (i, t) in index.tracts.iter().enumerate() {
            let (c0, r0) = index.cell_coords(t.bbox.min_lon, t.bbox.min_lat);
            let (c1, r1) = index.cell_coords(t.bbox.max_lon, t.bbox.max_lat);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * cols + c].push(i as u32);
                }
            }
        }
        index.cell_offsets.reserve(buckets.len() + 1);
        index.cell_offsets.push(0);
        for bucket in buckets {
            index.cell_members.extend_from_slice(&bucket);
            index.cell_offsets.push(index.cell_members.len() as u32);
        }
        Ok(index)
    }

    #[inline]
    fn cell_coords(&self, lon: f64, lat: f64) -> (usize, usize) {
        let c = ((lon - self.envelope.min_lon) / self.cell_width) as usize;
        let r = ((lat - self.envelope.min_lat) / self.cell_height) as usize;
        (c.min(self.cols - 1), r.min(self.rows - 1))
    }

    /// Tract indices whose bounding box may contain the point.
    pub fn candidates(&self, lat: f64, lon: f64) -> &[u32] {
        if !self.envelope.contains(lon, lat) {
            return &[];
        }
        let (c, r) = self.cell_coords(lon, lat);
        let cell = r * self.cols + c;
        let start = self.cell_offsets[cell] as usize;
        let end = self.cell_offsets[cell + 1] as usize;
        &self.cell_members[start..end]
    }

    /// Position (in [`SpatialIndex::tracts`]) of the tract containing the point.
    pub fn assign_index(&self, lat: f64, lon: f64) -> Option<usize> {
        self.candidates(lat, lon)
            .iter()
            .map(|&i| i as usize)
            .find(|&i| self.tracts[i].contains(lon, lat))
    }

    /// Id of the containing tract; on shared boundaries the smallest id wins.
    pub fn assign_tract(&self, lat: f64, lon: f64) -> Option<&str> {
        self.assign_index(lat, lon)
            .map(|i| self.tracts[i].tract_id.as_str())
    }

    /// Tracts in ascending id order.
    pub fn tracts(&self) -> &[Tract] {
        &self.tracts
    }

    pub fn len(&self) -> usize {
        self.tracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracts.is_empty()
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn position(&self, tract_id: &str) -> Option<usize> {
        self.tracts
            .binary_search_by(|t| t.tract_id.as_str().cmp(tract_id))
            .ok()
    }
}
