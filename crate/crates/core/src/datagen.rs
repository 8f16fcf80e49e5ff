//! Delaunay-triangulation training graphs.
//!
//! Points are drawn uniformly from the unit square and triangulated with
//! Bowyer–Watson insertion inside a large enclosing triangle. The edges of
//! the triangulation form the sparsity pattern.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::sparsity::{load_matrix_market, save_matrix_market, SparsityPattern};

/// Circumradius of the enclosing triangle, centred on the unit square.
const SUPER_RADIUS: f64 = 1.0e5;
const JITTER: f64 = 1.0e-9;
const MAX_JITTER_ATTEMPTS: usize = 64;

pub type Point = [f64; 2];

/// Distinct points in `[0, 1]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} = {p:?} lies outside the unit square"
                )));
            }
        }
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("coordinates are finite"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("points must be pairwise distinct".into()));
        }
        Ok(Self { points })
    }

    /// `n` uniform points; duplicates are redrawn.
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut points: Vec<Point> = Vec::with_capacity(n);
        while points.len() < n {
            let p = [rng.random::<f64>(), rng.random::<f64>()];
            if !points.contains(&p) {
                points.push(p);
            }
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// In-circle determinant: positive iff `d` lies strictly inside the
/// circumcircle of the counter-clockwise triangle `(a, b, c)`.
pub fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

fn jittered(p: Point, attempt: usize) -> Point {
    let step = JITTER * attempt as f64;
    let toward_center = |c: f64| if c > 0.5 { c - step } else { c + step };
    [toward_center(p[0]), toward_center(p[1])]
}

/// Delaunay triangles of `points` as counter-clockwise index triples.
///
/// An exactly zero in-circle determinant while inserting a point moves that
/// point by a deterministic `1e-9`-scale offset toward the square's center
/// and retries.
pub fn triangulate(points: &PointSet) -> Vec<[usize; 3]> {
    let n = points.len();
    let mut verts: Vec<Point> = points.points().to_vec();
    for k in 0..3 {
        let angle = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::FRAC_PI_3;
        verts.push([0.5 + SUPER_RADIUS * angle.cos(), 0.5 + SUPER_RADIUS * angle.sin()]);
    }
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for i in 0..n {
        let original = verts[i];
        let mut bad = Vec::new();
        for attempt in 0..=MAX_JITTER_ATTEMPTS {
            bad.clear();
            let mut tie = false;
            for (t, tri) in tris.iter().enumerate() {
                let det = in_circle(verts[tri[0]], verts[tri[1]], verts[tri[2]], verts[i]);
                if det > 0.0 {
                    bad.push(t);
                } else if det == 0.0 {
                    tie = true;
                }
            }
            if !tie || attempt == MAX_JITTER_ATTEMPTS {
                break;
            }
            verts[i] = jittered(original, attempt + 1);
        }

        // Cavity boundary: directed edges of bad triangles whose reverse is
        // not also an edge of a bad triangle.
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(bad.len() * 3);
        for &t in &bad {
            let [a, b, c] = tris[t];
            edges.extend([(a, b), (b, c), (c, a)]);
        }
        let boundary: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();

        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        tris.extend(boundary.into_iter().map(|(a, b)| [a, b, i]));
    }

    tris.retain(|tri| tri.iter().all(|&v| v < n));
    tris
}

/// Sparsity pattern of the Delaunay triangulation of `points`.
pub fn delaunay_pattern(points: &PointSet) -> Result<SparsityPattern> {
    let tris = triangulate(points);
    SparsityPattern::from_edges(
        points.len(),
        tris.iter().flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)]),
    )
}

/// Delaunay graph on `n` uniform random points.
pub fn generate_delaunay<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SparsityPattern> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "a triangulation needs at least 3 points, got {n}"
        )));
    }
    delaunay_pattern(&PointSet::sample(n, rng))
}

/// `count` Delaunay graphs with sizes uniform in `[n_min, n_max]`.
pub fn generate_training_set<R: Rng + ?Sized>(
    count: usize,
    n_min: usize,
    n_max: usize,
    rng: &mut R,
) -> Result<Vec<SparsityPattern>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if n_min < 3 || n_min > n_max {
        return Err(Error::InvalidArgument(format!(
            "need 3 <= min <= max, got min={n_min}, max={n_max}"
        )));
    }
    (0..count)
        .map(|_| {
            let n = rng.random_range(n_min..=n_max);
            generate_delaunay(n, rng)
        })
        .collect()
}

pub const MANIFEST: &str = "manifest.csv";

/// Writes `graph_NNNNN.mtx` files plus `manifest.csv` (`id,file,n,edges`).
pub fn write_dataset(dir: impl AsRef<Path>, patterns: &[SparsityPattern]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = BufWriter::new(File::create(dir.join(MANIFEST))?);
    writeln!(manifest, "id,file,n,edges")?;
    for (id, p) in patterns.iter().enumerate() {
        let file = format!("graph_{id:05}.mtx");
        save_matrix_market(p, dir.join(&file))?;
        writeln!(manifest, "{id},{file},{},{}", p.n(), p.num_edges())?;
    }
    manifest.flush()?;
    Ok(())
}

/// Reads a dataset directory: the manifest order when present, otherwise all
/// `.mtx` files sorted by name.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, SparsityPattern)>> {
    let dir = dir.as_ref();
    let manifest = dir.join(MANIFEST);
    let files: Vec<PathBuf> = if manifest.exists() {
        let mut reader = csv::Reader::from_path(&manifest)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", manifest.display())))?;
        let mut files = Vec::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| Error::InvalidArgument(format!("{}: {e}", manifest.display())))?;
            let file = record.get(1).ok_or_else(|| {
                Error::InvalidArgument(format!("{}: missing file column", manifest.display()))
            })?;
            files.push(dir.join(file));
        }
        files
    } else {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "mtx"))
            .collect();
        files.sort();
        files
    };
    files
        .into_iter()
        .map(|f| load_matrix_market(&f).map(|p| (f, p)))
        .collect()
}
