//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde_json::json;

use socialineq::geo::Tract;
use socialineq::ingest::parse_tracts;

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> TestRng {
        TestRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.0.next_u64()) * u128::from(n)) >> 64) as u64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

pub const GRID_X0: f64 = -74.05;
pub const GRID_Y0: f64 = 40.60;
pub const GRID_DX: f64 = 0.005;
pub const GRID_DY: f64 = 0.004;

/// A `cols × rows` mesh of jittered quadrilaterals sharing edges, with
/// shuffled ids so id order is unrelated to position. Returns the GeoJSON
/// and every mesh vertex.
pub fn jittered_mesh(cols: usize, rows: usize, seed: u64) -> (String, Vec<[f64; 2]>) {
    let mut rng = TestRng::new(seed);
    let mut vertex = vec![vec![[0.0; 2]; rows + 1]; cols + 1];
    for (i, col) in vertex.iter_mut().enumerate() {
        for (j, v) in col.iter_mut().enumerate() {
            let jx = if i == 0 || i == cols { 0.0 } else { rng.range(-0.25, 0.25) };
            let jy = if j == 0 || j == rows { 0.0 } else { rng.range(-0.25, 0.25) };
            *v = [
                GRID_X0 + (i as f64 + jx) * GRID_DX,
                GRID_Y0 + (j as f64 + jy) * GRID_DY,
            ];
        }
    }
    let n = cols * rows;
    let mut ids: Vec<usize> = (1..=n).collect();
    for k in (1..n).rev() {
        let j = rng.below(k as u64 + 1) as usize;
        ids.swap(k, j);
    }
    let mut features = Vec::with_capacity(n);
    for i in 0..cols {
        for j in 0..rows {
            let ring = [
                vertex[i][j],
                vertex[i + 1][j],
                vertex[i + 1][j + 1],
                vertex[i][j + 1],
                vertex[i][j],
            ];
            features.push(json!({
                "type": "Feature",
                "properties": {"tract_id": format!("M{:04}", ids[i * rows + j])},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }));
        }
    }
    let geojson = json!({"type": "FeatureCollection", "features": features}).to_string();
    (geojson, vertex.into_iter().flatten().collect())
}

pub fn tracts_from(geojson: &str) -> Vec<Tract> {
    parse_tracts(geojson.as_bytes())
        .unwrap()
        .iter()
        .map(|f| Tract::from_raw(f).unwrap())
        .collect()
}

/// Full scan in id order; the first containing tract wins.
pub fn naive_assign(tracts: &[Tract], lat: f64, lon: f64) -> Option<String> {
    let mut sorted: Vec<&Tract> = tracts.iter().collect();
    sorted.sort_by(|a, b| a.tract_id.cmp(&b.tract_id));
    sorted
        .into_iter()
        .find(|t| t.contains(lon, lat))
        .map(|t| t.tract_id.clone())
}

/// Points over a `cols × rows` mesh: uniform draws (some outside the
/// mesh), mesh vertices and midpoints of mesh edges.
pub fn probe_points(vertices: &[[f64; 2]], cols: usize, rows: usize, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = TestRng::new(seed);
    let (min_x, max_x) = (GRID_X0 - GRID_DX, GRID_X0 + (cols + 1) as f64 * GRID_DX);
    let (min_y, max_y) = (GRID_Y0 - GRID_DY, GRID_Y0 + (rows + 1) as f64 * GRID_DY);
    let at = |i: usize, j: usize| vertices[i * (rows + 1) + j];
    (0..n)
        .map(|k| match k % 10 {
            0 => vertices[rng.below(vertices.len() as u64) as usize],
            1 => {
                let i = rng.below(cols as u64) as usize;
                let j = rng.below(rows as u64) as usize;
                let (a, b) = if rng.unit() < 0.5 {
                    (at(i, j), at(i + 1, j))
                } else {
                    (at(i, j), at(i, j + 1))
                };
                let t = rng.unit();
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            }
            _ => [rng.range(min_x, max_x), rng.range(min_y, max_y)],
        })
        .collect()
}
