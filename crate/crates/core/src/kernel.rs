//! Tabulated fractional interaction weights.
//!
//! The weight of a lattice offset `o` is the kernel `|x - y|^{-(n+s)}` taken at
//! the center-to-center distance and multiplied by both cell volumes:
//! `h^{2n} / |h o|^{n+s}`. Offsets with `|h o| > ρ` are not tabulated; their
//! contribution per cell is the closed-form tail `h^n · n ω_n ρ^{-s} / s`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::GridDomain;

const MAX_TABLE: usize = 1 << 26;

#[derive(Clone, Debug)]
pub struct Kernel {
    domain: GridDomain,
    s: f64,
    trunc_radius: f64,
    reach: [usize; 2],
    table: Vec<f64>,
    prefix: Vec<f64>,
    stencil_total: f64,
    tail_per_cell: f64,
    exposure: Vec<f64>,
}

/// Parameters recorded alongside reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelParams {
    pub s: f64,
    pub dim: usize,
    pub spacing: f64,
    pub trunc_radius: f64,
    pub tail_per_cell: f64,
}

/// `n ω_n`, the surface measure of the unit sphere in dimension 1 or 2.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// `ω_n = |B_1|`.
pub fn ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// `∫_{|z|>ρ} |z|^{-(n+s)} dz = n ω_n ρ^{-s} / s`.
pub fn radial_tail(dim: usize, s: f64, rho: f64) -> f64 {
    sphere_measure(dim) * rho.powf(-s) / s
}

pub fn build_kernel(domain: &GridDomain, s: f64, trunc_radius: f64) -> Result<Kernel> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("s must lie in (0, 1), got {s}"));
    }
    let h = domain.spacing();
    if !(trunc_radius.is_finite() && trunc_radius >= h * (1.0 - 1e-12)) {
        return invalid(format!("truncation radius {trunc_radius} is below the spacing {h}"));
    }
    let dim = domain.dim();
    let r_cells = trunc_radius / h;
    let rx = (r_cells * (1.0 + 1e-12)).floor() as usize;
    let ry = if dim == 1 { 0 } else { rx };
    let (w, ht) = (2 * rx + 1, 2 * ry + 1);
    if w.saturating_mul(ht) > MAX_TABLE {
        return invalid(format!("truncation radius {trunc_radius} needs too many offsets"));
    }

    let r2 = r_cells * r_cells * (1.0 + 1e-12);
    let scale = h.powf(dim as f64 - s);
    let expo = -(dim as f64 + s) / 2.0;
    let mut table = vec![0.0; w * ht];
    for dy in -(ry as isize)..=ry as isize {
        for dx in -(rx as isize)..=rx as isize {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 == 0.0 || d2 > r2 {
                continue;
            }
            let k = (dy + ry as isize) as usize * w + (dx + rx as isize) as usize;
            table[k] = scale * d2.powf(expo);
        }
    }
    let tail_per_cell = domain.cell_volume() * radial_tail(dim, s, trunc_radius);
    let mut kernel = Kernel {
        domain: *domain,
        s,
        trunc_radius,
        reach: [rx, ry],
        table,
        prefix: Vec::new(),
        stencil_total: 0.0,
        tail_per_cell,
        exposure: Vec::new(),
    };
    kernel.refresh();
    Ok(kernel)
}

impl Kernel {
    /// Kernel with the default truncation radius: the window diameter (at least `h`).
    pub fn for_domain(domain: &GridDomain, s: f64) -> Result<Kernel> {
        build_kernel(domain, s, domain.diameter().max(domain.spacing()))
    }

    fn refresh(&mut self) {
        let [rx, ry] = self.reach;
        let (w, ht) = (2 * rx + 1, 2 * ry + 1);
        let pw = w + 1;
        let mut prefix = vec![0.0; pw * (ht + 1)];
        for y in 0..ht {
            let mut row = 0.0;
            for x in 0..w {
                row += self.table[y * w + x];
                prefix[(y + 1) * pw + x + 1] = prefix[y * pw + x + 1] + row;
            }
        }
        self.stencil_total = self.table.iter().sum();
        self.prefix = prefix;
        let d = self.domain;
        let rect = (0, d.width() - 1, 0, d.height() - 1);
        self.exposure = (0..d.len())
            .map(|idx| {
                let (i, j) = d.coords(idx);
                (self.stencil_total - self.rect_sum(i, j, rect)).max(0.0) + self.tail_per_cell
            })
            .collect();
    }

    /// Copy of this kernel with every weight beyond `cells` lattice units set to zero.
    /// The tail is left untouched. Only meant for diagnostics.
    pub fn zeroed_beyond(&self, cells: f64) -> Kernel {
        let mut k = self.clone();
        let [rx, ry] = k.reach;
        let w = 2 * rx + 1;
        for dy in -(ry as isize)..=ry as isize {
            for dx in -(rx as isize)..=rx as isize {
                if ((dx * dx + dy * dy) as f64).sqrt() > cells {
                    k.table[(dy + ry as isize) as usize * w + (dx + rx as isize) as usize] = 0.0;
                }
            }
        }
        k.refresh();
        k
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.domain.spacing()
    }

    pub fn trunc_radius(&self) -> f64 {
        self.trunc_radius
    }

    /// Largest tabulated offset along each axis, in cells.
    pub fn reach(&self) -> [usize; 2] {
        self.reach
    }

    pub fn params(&self) -> KernelParams {
        KernelParams {
            s: self.s,
            dim: self.dim(),
            spacing: self.spacing(),
            trunc_radius: self.trunc_radius,
            tail_per_cell: self.tail_per_cell,
        }
    }

    /// Weight of a lattice offset; zero for the origin and beyond the truncation radius.
    #[inline]
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let [rx, ry] = self.reach;
        if dx.unsigned_abs() > rx || dy.unsigned_abs() > ry {
            return 0.0;
        }
        self.table[(dy + ry as isize) as usize * (2 * rx + 1) + (dx + rx as isize) as usize]
    }

    /// All offsets with a nonzero weight, in lexicographic `(dy, dx)` order.
    /// Negating an offset reverses its position in this list.
    pub fn stencil(&self) -> Vec<(isize, isize, f64)> {
        let [rx, ry] = self.reach;
        let mut out = Vec::new();
        for dy in -(ry as isize)..=ry as isize {
            for dx in -(rx as isize)..=rx as isize {
                let w = self.weight(dx, dy);
                if w > 0.0 {
                    out.push((dx, dy, w));
                }
            }
        }
        out
    }

    /// Sum of all tabulated weights.
    pub fn stencil_total(&self) -> f64 {
        self.stencil_total
    }

    /// Total interaction of one cell with everything else: tabulated weights plus tail.
    pub fn cell_total(&self) -> f64 {
        self.stencil_total + self.tail_per_cell
    }

    pub fn tail_per_cell(&self) -> f64 {
        self.tail_per_cell
    }

    /// Sum of weights from cell `(i, j)` to the cells of the inclusive rectangle `rect`.
    pub fn rect_sum(&self, i: usize, j: usize, rect: (usize, usize, usize, usize)) -> f64 {
        let [rx, ry] = self.reach;
        let (i0, i1, j0, j1) = rect;
        let lo_x = (i0 as isize - i as isize).max(-(rx as isize));
        let hi_x = (i1 as isize - i as isize).min(rx as isize);
        let lo_y = (j0 as isize - j as isize).max(-(ry as isize));
        let hi_y = (j1 as isize - j as isize).min(ry as isize);
        if lo_x > hi_x || lo_y > hi_y {
            return 0.0;
        }
        let pw = 2 * rx + 2;
        let ax = (lo_x + rx as isize) as usize;
        let bx = (hi_x + rx as isize) as usize + 1;
        let ay = (lo_y + ry as isize) as usize;
        let by = (hi_y + ry as isize) as usize + 1;
        self.prefix[by * pw + bx] - self.prefix[ay * pw + bx] - self.prefix[by * pw + ax]
            + self.prefix[ay * pw + ax]
    }

    /// Interaction of a window cell with the exterior of the window:
    /// out-of-window offsets within `ρ` plus the analytic tail.
    #[inline]
    pub fn exposure(&self, idx: usize) -> f64 {
        self.exposure[idx]
    }

    pub fn exposures(&self) -> &[f64] {
        &self.exposure
    }
}

pub fn tail_mass(kernel: &Kernel) -> f64 {
    kernel.tail_per_cell
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_weights() {
        let d1 = GridDomain::line(16, 1.0).unwrap();
        let k = build_kernel(&d1, 0.5, 10.0).unwrap();
        assert!((k.weight(2, 0) - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!((k.weight(2, 0) - 0.353553).abs() < 1e-6);
        assert!((tail_mass(&k) - 1.264911).abs() < 1e-6);

        let d2 = GridDomain::plane(8, 8, 1.0).unwrap();
        let k2 = build_kernel(&d2, 0.5, 5.0).unwrap();
        assert!((k2.weight(1, 1) - 2f64.powf(-1.25)).abs() < 1e-15);
        assert_eq!(k2.weight(0, 0), 0.0);
        assert_eq!(k2.weight(6, 0), 0.0);
    }

    #[test]
    fn symmetric_and_decreasing() {
        let d = GridDomain::plane(10, 10, 0.25).unwrap();
        let k = build_kernel(&d, 0.3, 1.5).unwrap();
        let [rx, ry] = k.reach();
        for dy in -(ry as isize)..=ry as isize {
            for dx in -(rx as isize)..=rx as isize {
                let w = k.weight(dx, dy);
                assert_eq!(w, k.weight(-dx, -dy));
                assert_eq!(w, k.weight(dy, dx));
                assert_eq!(w, k.weight(-dx, dy));
            }
        }
        let st = k.stencil();
        for a in &st {
            assert!(a.2 > 0.0);
            for b in &st {
                let (da, db) = (a.0 * a.0 + a.1 * a.1, b.0 * b.0 + b.1 * b.1);
                if da < db {
                    assert!(a.2 > b.2);
                }
            }
        }
        let n = st.len();
        for (k, o) in st.iter().enumerate() {
            let r = st[n - 1 - k];
            assert_eq!((r.0, r.1), (-o.0, -o.1));
        }
    }

    #[test]
    fn tail_power_law() {
        let d = GridDomain::plane(4, 4, 1.0).unwrap();
        let a = build_kernel(&d, 0.4, 3.0).unwrap();
        let b = build_kernel(&d, 0.4, 6.0).unwrap();
        assert!((tail_mass(&b) / tail_mass(&a) - 2f64.powf(-0.4)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = GridDomain::line(4, 0.5).unwrap();
        assert!(build_kernel(&d, 0.0, 1.0).is_err());
        assert!(build_kernel(&d, 1.0, 1.0).is_err());
        assert!(build_kernel(&d, 0.5, 0.25).is_err());
    }

    #[test]
    fn exposure_complements_window_sum() {
        let d = GridDomain::plane(5, 3, 1.0).unwrap();
        let k = build_kernel(&d, 0.5, 4.0).unwrap();
        for idx in 0..d.len() {
            let (i, j) = d.coords(idx);
            let mut inside = 0.0;
            for jdx in 0..d.len() {
                let (a, b) = d.coords(jdx);
                inside += k.weight(a as isize - i as isize, b as isize - j as isize);
            }
            let direct = k.stencil_total() - inside + k.tail_per_cell();
            assert!((direct - k.exposure(idx)).abs() < 1e-12);
        }
    }
}
