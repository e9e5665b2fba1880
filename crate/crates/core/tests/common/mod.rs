//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the library's energy code: weights, tails and exposures are recomputed
//! from their definitions with plain double loops.
#![allow(dead_code)]

use std::f64::consts::PI;

use fractv::grid::{GridDomain, PixelSet, ScalarField};
use rand::Rng;

/// Default truncation radius: the window diameter, at least one spacing.
pub fn default_rho(d: &GridDomain) -> f64 {
    let [nx, ny] = d.shape();
    let dx = (nx - 1) as f64;
    let dy = (ny - 1) as f64;
    (d.spacing() * (dx * dx + dy * dy).sqrt()).max(d.spacing())
}

pub struct Oracle {
    pub d: GridDomain,
    pub s: f64,
    pub rho: f64,
    ext: Vec<f64>,
    pairs: Vec<f64>,
}

impl Oracle {
    pub fn new(d: GridDomain, s: f64) -> Self {
        let mut o = Self { d, s, rho: default_rho(&d), ext: Vec::new(), pairs: Vec::new() };
        let n = d.len();
        o.ext = (0..n).map(|x| {
            let (i, j) = d.coords(x);
            o.exterior(i, j)
        }).collect();
        o.pairs = (0..n * n).map(|m| o.pair_raw(m / n, m % n)).collect();
        o
    }

    fn dim(&self) -> f64 {
        self.d.dim() as f64
    }

    /// `h^{2n} |h o|^{-(n+s)}` when `0 < |h o| ≤ ρ`.
    pub fn w(&self, dx: i64, dy: i64) -> f64 {
        let h = self.d.spacing();
        let r = h * ((dx * dx + dy * dy) as f64).sqrt();
        if r == 0.0 || r > self.rho * (1.0 + 1e-12) {
            return 0.0;
        }
        h.powf(2.0 * self.dim()) * r.powf(-(self.dim() + self.s))
    }

    pub fn tail(&self) -> f64 {
        let sphere = if self.d.dim() == 1 { 2.0 } else { 2.0 * PI };
        self.d.spacing().powf(self.dim()) * sphere * self.rho.powf(-self.s) / self.s
    }

    /// Interaction of window cell `(i, j)` with everything outside the window.
    pub fn exterior(&self, i: usize, j: usize) -> f64 {
        let [nx, ny] = self.d.shape();
        let r = (self.rho / self.d.spacing()).floor() as i64 + 1;
        let ry = if self.d.dim() == 1 { 0 } else { r };
        let mut acc = self.tail();
        for dy in -ry..=ry {
            for dx in -r..=r {
                let (a, b) = (i as i64 + dx, j as i64 + dy);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    acc += self.w(dx, dy);
                }
            }
        }
        acc
    }

    fn pair(&self, x: usize, y: usize) -> f64 {
        self.pairs[x * self.d.len() + y]
    }

    fn pair_raw(&self, x: usize, y: usize) -> f64 {
        let (xi, xj) = self.d.coords(x);
        let (yi, yj) = self.d.coords(y);
        self.w(yi as i64 - xi as i64, yj as i64 - xj as i64)
    }

    pub fn perimeter(&self, e: &PixelSet) -> f64 {
        let inside = |x: usize| e.contains(x) != e.background();
        let n = self.d.len();
        let mut p = 0.0;
        for x in (0..n).filter(|&x| inside(x)) {
            for y in (0..n).filter(|&y| !inside(y)) {
                p += self.pair(x, y);
            }
            p += self.ext[x];
        }
        p
    }

    pub fn total_variation(&self, u: &ScalarField) -> f64 {
        let v = u.values();
        let n = self.d.len();
        let mut tv = 0.0;
        for x in 0..n {
            for y in x + 1..n {
                tv += self.pair(x, y) * (v[x] - v[y]).abs();
            }
            tv += v[x].abs() * self.ext[x];
        }
        tv
    }

    pub fn geometric(&self, u: &PixelSet, e: &PixelSet, lambda: f64) -> f64 {
        if u.background() != e.background() {
            return f64::INFINITY;
        }
        let diff = (0..self.d.len()).filter(|&x| u.contains(x) != e.contains(x)).count();
        self.perimeter(u) + lambda * diff as f64 * self.d.cell_volume()
    }

    pub fn functional(&self, u: &ScalarField, f: &ScalarField, lambda: f64) -> f64 {
        let l1: f64 = u.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).sum();
        self.total_variation(u) + lambda * l1 * self.d.cell_volume()
    }
}

pub fn subset(d: GridDomain, bits: u32, background: bool) -> PixelSet {
    let mask = (0..d.len()).map(|i| bits >> i & 1 == 1).collect();
    PixelSet::from_mask(d, mask, background).unwrap()
}

/// `(min value, intersection of minimizers, union of minimizers)` over all subsets.
pub fn exhaustive(o: &Oracle, e: &PixelSet, lambda: f64, tol: f64) -> (f64, PixelSet, PixelSet) {
    let n = o.d.len();
    let vals: Vec<f64> = (0..1u32 << n).map(|m| o.geometric(&subset(o.d, m, e.background()), e, lambda)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = best + tol * (1.0 + best.abs());
    let (mut and, mut or) = (u32::MAX >> (32 - n), 0u32);
    for (m, &v) in vals.iter().enumerate() {
        if v <= cut {
            and &= m as u32;
            or |= m as u32;
        }
    }
    (best, subset(o.d, and, e.background()), subset(o.d, or, e.background()))
}

pub fn random_set(rng: &mut impl Rng, d: GridDomain, p: f64) -> PixelSet {
    PixelSet::from_mask(d, (0..d.len()).map(|_| rng.gen_bool(p)).collect(), false).unwrap()
}

pub fn random_field(rng: &mut impl Rng, d: GridDomain, levels: &[f64]) -> ScalarField {
    ScalarField::new(d, (0..d.len()).map(|_| levels[rng.gen_range(0..levels.len())]).collect()).unwrap()
}

/// A window with at most `max_cells` cells, alternating between a line and a small plane.
pub fn small_domain(rng: &mut impl Rng, max_cells: usize, h: f64) -> GridDomain {
    if rng.gen_bool(0.5) {
        GridDomain::line(rng.gen_range(3..=max_cells), h).unwrap()
    } else {
        let nx = rng.gen_range(2..=4usize);
        let ny = rng.gen_range(2..=(max_cells / nx).clamp(2, 4));
        GridDomain::plane(nx, ny, h).unwrap()
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
