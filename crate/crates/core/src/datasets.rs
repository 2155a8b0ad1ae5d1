//! Seedable generators for the two 2-D toy datasets and their CSV form.
//!
//! CSV format: header `x0,x1`, one point per row, UTF-8, LF line endings,
//! 17-significant-digit decimals (lossless for f64 round trips).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_to_string};
use crate::rng::{streams, SeedRng};

pub const GAUSSIAN_GRID: [f64; 5] = [-4.0, -2.0, 0.0, 2.0, 4.0];
pub const SWISS_ROLL_T_MIN: f64 = 1.5 * std::f64::consts::PI;
pub const SWISS_ROLL_T_MAX: f64 = 4.5 * std::f64::consts::PI;
pub const SWISS_ROLL_SCALE: f64 = 1.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Gaussians25,
    SwissRoll,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Gaussians25 => "gaussians25",
            DatasetKind::SwissRoll => "swiss_roll",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussians25" => Ok(DatasetKind::Gaussians25),
            "swiss_roll" | "swiss-roll" => Ok(DatasetKind::SwissRoll),
            other => Err(Error::InvalidParameter(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Generator parameters; `spread` is the per-mode sigma for the Gaussian
/// grid and the additive noise sigma for the Swiss roll.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyParams {
    pub kind: DatasetKind,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDataset {
    pub params: ToyParams,
    pub seed: u64,
    pub points: Vec<[f64; 2]>,
}

/// The 5x5 mode grid.
pub fn gaussian_mode_centers() -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(25);
    for &cy in &GAUSSIAN_GRID {
        for &cx in &GAUSSIAN_GRID {
            centers.push([cx, cy]);
        }
    }
    centers
}

/// Point on the noise-free Swiss roll at parameter `t`.
pub fn swiss_roll_curve(t: f64) -> [f64; 2] {
    [t * t.cos() * SWISS_ROLL_SCALE, t * t.sin() * SWISS_ROLL_SCALE]
}

/// Each point picks a mode uniformly from the grid, then adds N(0, sigma^2 I).
pub fn gen_25_gaussians(n: usize, sigma: f64, seed: u64) -> Result<ToyDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be positive".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {sigma}")));
    }
    let centers = gaussian_mode_centers();
    let mut rng = SeedRng::stream(seed, streams::DATASET);
    let points = (0..n)
        .map(|_| {
            let c = centers[rng.index(centers.len())];
            [c[0] + sigma * rng.normal(), c[1] + sigma * rng.normal()]
        })
        .collect();
    Ok(ToyDataset { params: ToyParams { kind: DatasetKind::Gaussians25, spread: sigma }, seed, points })
}

/// t ~ Uniform[1.5 pi, 4.5 pi]; point = (t cos t, t sin t) / 3 + N(0, noise^2 I).
pub fn gen_swiss_roll(n: usize, noise: f64, seed: u64) -> Result<ToyDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be positive".into()));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise must be non-negative, got {noise}")));
    }
    let mut rng = SeedRng::stream(seed, streams::DATASET);
    let points = (0..n)
        .map(|_| {
            let t = rng.uniform_range(SWISS_ROLL_T_MIN, SWISS_ROLL_T_MAX);
            let p = swiss_roll_curve(t);
            [p[0] + noise * rng.normal(), p[1] + noise * rng.normal()]
        })
        .collect();
    Ok(ToyDataset { params: ToyParams { kind: DatasetKind::SwissRoll, spread: noise }, seed, points })
}

pub fn generate(kind: DatasetKind, n: usize, spread: f64, seed: u64) -> Result<ToyDataset> {
    match kind {
        DatasetKind::Gaussians25 => gen_25_gaussians(n, spread, seed),
        DatasetKind::SwissRoll => gen_swiss_roll(n, spread, seed),
    }
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_points_csv(&self.points, path)
    }
}

pub fn format_point_csv(p: &[f64; 2]) -> String {
    format!("{:.16e},{:.16e}", p[0], p[1])
}

pub fn write_points_csv(points: &[[f64; 2]], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(48 * points.len() + 8);
    out.push_str("x0,x1\n");
    for p in points {
        let _ = writeln!(out, "{}", format_point_csv(p));
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<[f64; 2]>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == "x0,x1" => {}
        Some((_, header)) => {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected header 'x0,x1', got '{header}'"),
            })
        }
        None => return Err(Error::NoDataRows { path: path.to_path_buf() }),
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected 2 columns, got {}", fields.len()),
            });
        }
        let mut p = [0.0; 2];
        for (j, field) in fields.iter().enumerate() {
            p[j] = field.trim().parse::<f64>().map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("bad number '{field}': {e}"),
            })?;
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::NoDataRows { path: path.to_path_buf() });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_points_lie_on_grid() {
        let ds = gen_25_gaussians(25, 0.0, 9).unwrap();
        for p in &ds.points {
            assert!(GAUSSIAN_GRID.contains(&p[0]) && GAUSSIAN_GRID.contains(&p[1]), "{p:?}");
        }
    }

    #[test]
    fn sample_mean_near_origin() {
        let ds = gen_25_gaussians(10_000, 0.05, 11).unwrap();
        let (mut mx, mut my) = (0.0, 0.0);
        for p in &ds.points {
            mx += p[0];
            my += p[1];
        }
        let n = ds.len() as f64;
        assert!((mx / n).hypot(my / n) < 0.15, "mean ({}, {})", mx / n, my / n);
    }

    #[test]
    fn per_mode_counts_binomial() {
        let n = 100_000;
        let ds = gen_25_gaussians(n, 0.05, 5).unwrap();
        let centers = gaussian_mode_centers();
        let mut counts = vec![0usize; 25];
        for p in &ds.points {
            let nearest = centers
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = (p[0] - a[0]).hypot(p[1] - a[1]);
                    let db = (p[0] - b[0]).hypot(p[1] - b[1]);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap()
                .0;
            counts[nearest] += 1;
        }
        let p = 1.0 / 25.0;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() < 5.0 * sd,
                "mode {i}: count {c}, expected {mean} +- {}",
                5.0 * sd
            );
        }
    }

    #[test]
    fn swiss_roll_zero_noise_on_curve() {
        let ds = gen_swiss_roll(500, 0.0, 3).unwrap();
        let max_radius = SWISS_ROLL_T_MAX * SWISS_ROLL_SCALE + 1e-9;
        for p in &ds.points {
            // ||3p|| recovers t for noise-free points
            let t = (3.0 * p[0]).hypot(3.0 * p[1]);
            assert!((SWISS_ROLL_T_MIN..=SWISS_ROLL_T_MAX).contains(&t), "t = {t}");
            let q = swiss_roll_curve(t);
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            assert!(d < 1e-9, "off-curve by {d}");
            assert!(p[0].hypot(p[1]) <= max_radius);
        }
    }

    #[test]
    fn swiss_roll_nearest_curve_distance_by_sweep() {
        // independent check: coarse sweep + golden-section refinement
        let ds = gen_swiss_roll(100, 0.0, 17).unwrap();
        for p in &ds.points {
            let dist2 = |t: f64| {
                let q = swiss_roll_curve(t);
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
            };
            let sweep = 20_000;
            let mut best_t = SWISS_ROLL_T_MIN;
            let mut best = f64::INFINITY;
            for i in 0..=sweep {
                let t = SWISS_ROLL_T_MIN
                    + (SWISS_ROLL_T_MAX - SWISS_ROLL_T_MIN) * i as f64 / sweep as f64;
                let d = dist2(t);
                if d < best {
                    best = d;
                    best_t = t;
                }
            }
            let span = (SWISS_ROLL_T_MAX - SWISS_ROLL_T_MIN) / sweep as f64;
            let (mut lo, mut hi) = (best_t - span, best_t + span);
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..80 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if dist2(m1) < dist2(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let d = dist2(0.5 * (lo + hi)).sqrt();
            assert!(d < 1e-9, "nearest-curve distance {d}");
        }
    }

    #[test]
    fn seed_determinism_bytes_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        gen_swiss_roll(200, 0.05, 77).unwrap().save(&p1).unwrap();
        gen_swiss_roll(200, 0.05, 77).unwrap().save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let d1 = gen_25_gaussians(64, 0.05, 123).unwrap();
        let d2 = gen_25_gaussians(64, 0.05, 123).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn csv_round_trip_value_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        let ds = gen_25_gaussians(500, 0.05, 2).unwrap();
        ds.save(&path).unwrap();
        let loaded = read_points_csv(&path).unwrap();
        assert_eq!(ds.points, loaded);
    }

    #[test]
    fn csv_rejects_wrong_column_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x0,x1\n1.0,2.0\n1.0,2.0,3.0\n").unwrap();
        match read_points_csv(&path) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn csv_empty_file_is_no_data_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_points_csv(&path), Err(Error::NoDataRows { .. })));
        std::fs::write(&path, "x0,x1\n").unwrap();
        assert!(matches!(read_points_csv(&path), Err(Error::NoDataRows { .. })));
    }

    #[test]
    fn high_quality_mass_near_modes() {
        // 2-D Gaussian: P(distance > 4 sigma) = exp(-8) ~ 3.4e-4
        let ds = gen_25_gaussians(10_000, 0.05, 21).unwrap();
        let centers = gaussian_mode_centers();
        let within = ds
            .points
            .iter()
            .filter(|p| {
                centers.iter().any(|c| (p[0] - c[0]).hypot(p[1] - c[1]) <= 4.0 * 0.05)
            })
            .count();
        let frac = within as f64 / ds.len() as f64;
        assert!(frac > 0.999, "fraction {frac}");
    }
}
