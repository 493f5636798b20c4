//! Network topology and per-slot Rayleigh fading.
//!
//! Device positions are uniform in a square area, AP positions come from a
//! deterministic layout chosen to minimize the covering radius, and channel
//! gains follow `theta * d^-2 * |h|^2` with `h ~ CN(0, 1)`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ChannelSlot, Matrix, Point};

/// Device-AP distances are floored here to keep `d^-2` finite.
pub const MIN_DISTANCE: f64 = 0.1;

/// Resolution of the covering-radius evaluation grid (points per side).
pub const COVER_GRID: usize = 100;

/// Above this many APs only balanced row layouts are tried.
const EXHAUSTIVE_LAYOUTS: usize = 8;

/// Independent random streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Topology = 0,
    Arrivals = 1,
    Fading = 2,
}

/// Generator for one stream of one run.
///
/// Streams never overlap, so changing the horizon or the number of arrivals
/// drawn leaves the topology and fading sequences unchanged.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub device_positions: Vec<Point>,
    pub ap_positions: Vec<Point>,
    pub area_side: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadingParams {
    pub theta_up: f64,
    pub theta_down: f64,
    pub pathloss_exp: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams { theta_up: 5e-4, theta_down: 1e-3, pathloss_exp: 2.0 }
    }
}

/// Largest distance from any grid point of the square to its nearest AP.
pub fn covering_radius(aps: &[Point], side: f64, grid: usize) -> f64 {
    assert!(grid >= 2 && !aps.is_empty());
    let step = side / (grid - 1) as f64;
    let mut worst = 0.0f64;
    for gx in 0..grid {
        for gy in 0..grid {
            let p = Point::new(gx as f64 * step, gy as f64 * step);
            let nearest = aps.iter().map(|a| p.distance(a)).fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
    }
    worst
}

fn compositions(total: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in (1..=total).rev() {
        for mut rest in compositions(total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `total` split over `rows` parts differing by at most one, larger parts first.
fn balanced(total: usize, rows: usize) -> Vec<usize> {
    (0..rows).map(|r| total / rows + usize::from(r < total % rows)).collect()
}

/// Equal-height rows, row `r` holding `counts[r]` APs at the centers of equal cells.
fn row_layout(counts: &[usize], side: f64, transpose: bool) -> Vec<Point> {
    let rows = counts.len() as f64;
    let mut pts = Vec::new();
    for (r, &c) in counts.iter().enumerate() {
        let y = (r as f64 + 0.5) / rows * side;
        for k in 0..c {
            let x = (k as f64 + 0.5) / c as f64 * side;
            pts.push(if transpose { Point::new(y, x) } else { Point::new(x, y) });
        }
    }
    pts
}

fn quincunx(inset: f64, side: f64) -> Vec<Point> {
    let (a, b) = (inset * side, (1.0 - inset) * side);
    vec![Point::new(a, a), Point::new(a, b), Point::new(b, a), Point::new(b, b), Point::new(0.5 * side, 0.5 * side)]
}

fn candidate_layouts(m: usize, side: f64) -> Vec<Vec<Point>> {
    let mut cands = Vec::new();
    if m == 5 {
        cands.push(quincunx(0.25, side));
        for k in 0..=10 {
            cands.push(quincunx(0.2 + 0.01 * k as f64, side));
        }
    }
    let comps = if m <= EXHAUSTIVE_LAYOUTS { compositions(m) } else { (1..=m).map(|r| balanced(m, r)).collect() };
    for transpose in [false, true] {
        for c in &comps {
            cands.push(row_layout(c, side, transpose));
        }
    }
    cands
}

/// Deterministic AP layout approximately minimizing the covering radius.
///
/// Candidates are row layouts (and their transposes) for every composition
/// of `m`, or only the balanced ones when `m` is large, plus a quincunx
/// family for `m = 5`; the one with the smallest
/// grid-evaluated covering radius wins, earliest candidate on ties.
pub fn place_aps(m: usize, area_side: f64) -> Vec<Point> {
    assert!(m >= 1, "at least one AP");
    let mut best: Option<(f64, Vec<Point>)> = None;
    for cand in candidate_layouts(m, area_side) {
        let r = covering_radius(&cand, area_side, COVER_GRID);
        if best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, cand));
        }
    }
    best.map(|(_, pts)| pts).unwrap_or_default()
}

impl Topology {
    /// Uniform device placement, deterministic AP placement.
    pub fn generate<R: Rng + ?Sized>(n: usize, m: usize, area_side: f64, rng: &mut R) -> Topology {
        let device_positions = (0..n)
            .map(|_| Point::new(rng.random::<f64>() * area_side, rng.random::<f64>() * area_side))
            .collect();
        Topology { device_positions, ap_positions: place_aps(m, area_side), area_side }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.device_positions[i].distance(&self.ap_positions[j]).max(MIN_DISTANCE)
    }

    /// Plain-text table of device positions: `index x y` per line.
    pub fn to_table(&self) -> String {
        let mut s = format!("# side {}\n# index x y\n", self.area_side);
        for (i, p) in self.device_positions.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {}", p.x, p.y);
        }
        s
    }

    /// Parse a table written by [`Topology::to_table`] and lay out `m` APs.
    pub fn from_table(text: &str, m: usize) -> Result<Topology> {
        let mut side = None;
        let mut devices: Vec<(usize, Point)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: &str| Error::TopologyParse { line: ln + 1, msg: msg.to_string() };
            if let Some(rest) = line.strip_prefix('#') {
                let mut toks = rest.split_whitespace();
                if toks.next() == Some("side") {
                    let v = toks.next().ok_or_else(|| err("missing side value"))?;
                    side = Some(v.parse::<f64>().map_err(|_| err("side is not a number"))?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(err("expected `index x y`"));
            }
            let idx = toks[0].parse::<usize>().map_err(|_| err("bad index"))?;
            let x = toks[1].parse::<f64>().map_err(|_| err("bad x"))?;
            let y = toks[2].parse::<f64>().map_err(|_| err("bad y"))?;
            if idx != devices.len() {
                return Err(err("device indices must be consecutive from 0"));
            }
            devices.push((idx, Point::new(x, y)));
        }
        let area_side = side.ok_or(Error::TopologyParse { line: 0, msg: "missing `# side` header".into() })?;
        let device_positions: Vec<Point> = devices.into_iter().map(|(_, p)| p).collect();
        if device_positions.iter().any(|p| p.x < 0.0 || p.y < 0.0 || p.x > area_side || p.y > area_side) {
            return Err(Error::TopologyParse { line: 0, msg: "device outside the area".into() });
        }
        Ok(Topology { device_positions, ap_positions: place_aps(m, area_side), area_side })
    }
}

/// `|h|^2` for `h ~ CN(0, 1)`; exponentially distributed with unit mean.
pub fn fading_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    0.5 * (re * re + im * im)
}

/// Large-scale gain `theta * d^-exp`.
pub fn path_gain(theta: f64, distance: f64, exp: f64) -> f64 {
    theta * distance.max(MIN_DISTANCE).powf(-exp)
}

/// Draw independent uplink and downlink gains for every device-AP pair.
pub fn sample_channel<R: Rng + ?Sized>(topo: &Topology, fading: &FadingParams, rng: &mut R) -> ChannelSlot {
    let (n, m) = (topo.device_positions.len(), topo.ap_positions.len());
    let mut h_up = Matrix::zeros(n, m);
    let mut h_down = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let d = topo.distance(i, j);
            h_up[(i, j)] = path_gain(fading.theta_up, d, fading.pathloss_exp) * fading_power(rng);
            h_down[(i, j)] = path_gain(fading.theta_down, d, fading.pathloss_exp) * fading_power(rng);
        }
    }
    ChannelSlot { h_up, h_down }
}
