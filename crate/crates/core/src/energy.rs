//! Fractional perimeter, fractional total variation, and the two energies.
//!
//! For a finite set `E` of window cells the discrete perimeter is
//!
//! ```text
//! P(E) = Σ_{x∈E, y∈window∖E} w(x−y) + Σ_{x∈E} exposure(x)
//!      = |E|·(Σ_o w(o) + tail) − Σ_{x≠y∈E} w(x−y)
//! ```
//!
//! The second form only needs the autocorrelation of the mask, which is
//! counted row by row on packed bitsets. Sets containing the exterior are
//! priced through their complement, so `P(E) = P(E^c)` holds bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{symm_diff_measure, PixelSet, ScalarField};
use crate::kernel::Kernel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub perimeter_or_tv: f64,
    pub fidelity: f64,
    pub lambda: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(perimeter_or_tv: f64, fidelity: f64, lambda: f64) -> Self {
        let total = if fidelity.is_finite() {
            perimeter_or_tv + lambda * fidelity
        } else {
            f64::INFINITY
        };
        Self { perimeter_or_tv, fidelity, lambda, total }
    }
}

/// One gap `(lower, upper)` between consecutive values, with `P({u > lower})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoareaLayer {
    pub lower: f64,
    pub upper: f64,
    pub perimeter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoareaDecomposition {
    pub layers: Vec<CoareaLayer>,
    pub reconstructed: f64,
}

/// Row-packed bitset of a set restricted to its bounding box.
struct PackedRows {
    rows: Vec<Vec<u64>>,
}

impl PackedRows {
    fn new(e: &PixelSet, bb: (usize, usize, usize, usize)) -> Self {
        let d = e.domain();
        let (i0, i1, j0, j1) = bb;
        let bw = i1 - i0 + 1;
        let words = bw.div_ceil(64);
        let rows = (j0..=j1)
            .map(|j| {
                let mut row = vec![0u64; words];
                for i in i0..=i1 {
                    if e.contains(d.index(i, j)) {
                        let c = i - i0;
                        row[c / 64] |= 1u64 << (c % 64);
                    }
                }
                row
            })
            .collect();
        Self { rows }
    }
}

/// `Σ_c a[c] & b[c + shift]` over bit positions, for `shift ≥ 0`.
fn and_shift_count(a: &[u64], b: &[u64], shift: usize) -> u32 {
    let q = shift / 64;
    let r = shift % 64;
    let n = a.len();
    let mut total = 0;
    for k in 0..n.saturating_sub(q) {
        let lo = b[k + q] >> r;
        let hi = if r > 0 && k + q + 1 < n { b[k + q + 1] << (64 - r) } else { 0 };
        total += (a[k] & (lo | hi)).count_ones();
    }
    total
}

/// `Σ_{x≠y ∈ E} w(x − y)` over window bits, ordered pairs.
fn self_interaction(e: &PixelSet, k: &Kernel) -> f64 {
    let Some(bb) = e.bounding_box() else {
        return 0.0;
    };
    let packed = PackedRows::new(e, bb);
    let [rx, ry] = k.reach();
    let bw = bb.1 - bb.0 + 1;
    let bh = packed.rows.len();
    let max_dx = rx.min(bw - 1) as isize;
    let max_dy = ry.min(bh - 1);
    let mut half = 0.0;
    for dy in 0..=max_dy {
        let dx_lo = if dy == 0 { 1 } else { -max_dx };
        for dx in dx_lo..=max_dx {
            let w = k.weight(dx, dy as isize);
            if w == 0.0 {
                continue;
            }
            let mut pairs = 0u64;
            for r in 0..bh - dy {
                let (a, b) = (&packed.rows[r], &packed.rows[r + dy]);
                pairs += if dx >= 0 {
                    and_shift_count(a, b, dx as usize)
                } else {
                    and_shift_count(b, a, (-dx) as usize)
                } as u64;
            }
            half += w * pairs as f64;
        }
    }
    2.0 * half
}

/// `P_s(E)`. Never infinite on the lattice; zero exactly for `∅` and the whole space.
pub fn frac_perimeter(e: &PixelSet, k: &Kernel) -> Result<f64> {
    e.domain().check_same(k.domain())?;
    if e.background() {
        return frac_perimeter(&e.complement(), k);
    }
    let n = e.count();
    if n == 0 {
        return Ok(0.0);
    }
    let p = n as f64 * k.cell_total() - self_interaction(e, k);
    Ok(p.max(0.0))
}

/// `sTV(u) = ½ ΣΣ w(x−y)|u(x) − u(y)| + Σ |u(x)|·exposure(x)`.
pub fn frac_total_variation(u: &ScalarField, k: &Kernel) -> Result<f64> {
    u.domain().check_same(k.domain())?;
    let d = u.domain();
    let (nx, ny) = (d.width(), d.height());
    let v = u.values();
    let [rx, ry] = k.reach();
    let max_dx = rx.min(nx - 1) as isize;
    let max_dy = ry.min(ny - 1);
    let mut pairs = 0.0;
    for dy in 0..=max_dy {
        let dx_lo = if dy == 0 { 1 } else { -max_dx };
        for dx in dx_lo..=max_dx {
            let w = k.weight(dx, dy as isize);
            if w == 0.0 {
                continue;
            }
            let i_lo = (-dx).max(0) as usize;
            let i_hi = (nx as isize - dx.max(0)) as usize;
            let mut acc = 0.0;
            for j in 0..ny - dy {
                let row = &v[j * nx..(j + 1) * nx];
                let other = &v[(j + dy) * nx..(j + dy + 1) * nx];
                for i in i_lo..i_hi {
                    acc += (row[i] - other[(i as isize + dx) as usize]).abs();
                }
            }
            pairs += w * acc;
        }
    }
    let exterior: f64 = v.iter().zip(k.exposures()).map(|(x, e)| x.abs() * e).sum();
    Ok(pairs + exterior)
}

/// Sorted distinct values of the given fields, with the exterior value 0 included.
pub(crate) fn thresholds(fields: &[&[f64]]) -> Vec<f64> {
    let mut t: Vec<f64> = fields.iter().flat_map(|f| f.iter().copied()).collect();
    t.push(0.0);
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    t.dedup();
    t
}

/// Layer-cake decomposition `sTV(u) = Σ_k (t_{k+1} − t_k) · P({u > t_k})`.
pub fn coarea_decompose(u: &ScalarField, k: &Kernel) -> Result<CoareaDecomposition> {
    u.domain().check_same(k.domain())?;
    let t = thresholds(&[u.values()]);
    let mut layers = Vec::with_capacity(t.len().saturating_sub(1));
    let mut reconstructed = 0.0;
    for pair in t.windows(2) {
        let set = crate::grid::level_set(u, pair[0], true);
        let perimeter = frac_perimeter(&set, k)?;
        reconstructed += (pair[1] - pair[0]) * perimeter;
        layers.push(CoareaLayer { lower: pair[0], upper: pair[1], perimeter });
    }
    Ok(CoareaDecomposition { layers, reconstructed })
}

/// `E_s(u; f, Λ) = sTV(u) + Λ ∫|u − f|`.
pub fn functional_energy(
    u: &ScalarField,
    f: &ScalarField,
    lambda: f64,
    k: &Kernel,
) -> Result<EnergyBreakdown> {
    if !(lambda > 0.0) {
        return invalid(format!("fidelity parameter must be positive, got {lambda}"));
    }
    u.domain().check_same(f.domain())?;
    let tv = frac_total_variation(u, k)?;
    let fid = u.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).sum::<f64>()
        * u.domain().cell_volume();
    Ok(EnergyBreakdown::new(tv, fid, lambda))
}

/// `G_s(U; E, Λ) = P_s(U) + Λ|E Δ U|`.
pub fn geometric_energy(
    u: &PixelSet,
    e: &PixelSet,
    lambda: f64,
    k: &Kernel,
) -> Result<EnergyBreakdown> {
    if !(lambda > 0.0) {
        return invalid(format!("fidelity parameter must be positive, got {lambda}"));
    }
    let fid = symm_diff_measure(e, u)?;
    let per = frac_perimeter(u, k)?;
    Ok(EnergyBreakdown::new(per, fid, lambda))
}

/// `∫ G_s({u > t}; {f > t}, Λ) dt`, evaluated on the common quantization of `u` and `f`.
pub fn layered_energy(u: &ScalarField, f: &ScalarField, lambda: f64, k: &Kernel) -> Result<f64> {
    u.domain().check_same(f.domain())?;
    let t = thresholds(&[u.values(), f.values()]);
    let mut total = 0.0;
    for pair in t.windows(2) {
        let us = crate::grid::level_set(u, pair[0], true);
        let fs = crate::grid::level_set(f, pair[0], true);
        total += (pair[1] - pair[0]) * geometric_energy(&us, &fs, lambda, k)?.total;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use crate::kernel::build_kernel;

    /// Straight double sum over cell pairs plus exterior exposures.
    fn brute_perimeter(e: &PixelSet, k: &Kernel) -> f64 {
        let d = e.domain();
        let e = if e.background() { e.complement() } else { e.clone() };
        let mut p = 0.0;
        for x in e.cells() {
            let (xi, xj) = d.coords(x);
            for y in 0..d.len() {
                if e.contains(y) {
                    continue;
                }
                let (yi, yj) = d.coords(y);
                p += k.weight(yi as isize - xi as isize, yj as isize - xj as isize);
            }
            p += k.exposure(x);
        }
        p
    }

    #[test]
    fn empty_and_full_have_zero_perimeter() {
        let d = GridDomain::plane(5, 4, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        assert_eq!(frac_perimeter(&PixelSet::empty(d), &k).unwrap(), 0.0);
        assert_eq!(frac_perimeter(&PixelSet::full(d), &k).unwrap(), 0.0);
        assert!(frac_perimeter(&PixelSet::window(d), &k).unwrap() > 0.0);
    }

    #[test]
    fn packed_route_matches_double_sum() {
        let d = GridDomain::plane(70, 5, 0.5).unwrap();
        let k = build_kernel(&d, 0.35, 20.0).unwrap();
        let e = PixelSet::from_fn(d, |i, j| (i * 7 + j * 3) % 5 < 2 || i > 66);
        let fast = frac_perimeter(&e, &k).unwrap();
        let slow = brute_perimeter(&e, &k);
        assert!((fast - slow).abs() <= 1e-10 * slow, "{fast} vs {slow}");
    }

    #[test]
    fn total_variation_of_indicator_is_perimeter() {
        let d = GridDomain::plane(6, 5, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::from_fn(d, |i, j| i + j < 5 && i > 0);
        let p = frac_perimeter(&e, &k).unwrap();
        let u = ScalarField::indicator(&e, 1.0).unwrap();
        let tv = frac_total_variation(&u, &k).unwrap();
        assert!((p - tv).abs() < 1e-12 * p);
        let u3 = ScalarField::indicator(&e, 3.0).unwrap();
        assert!((frac_total_variation(&u3, &k).unwrap() - 3.0 * p).abs() < 1e-12 * p);
        assert_eq!(frac_total_variation(&ScalarField::zeros(d), &k).unwrap(), 0.0);
    }

    #[test]
    fn energies_at_trivial_candidates() {
        let d = GridDomain::line(8, 0.5).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let f = ScalarField::new(d, vec![0.0, 1.0, 2.0, 2.0, -1.0, 0.5, 0.0, 0.0]).unwrap();
        let same = functional_energy(&f, &f, 2.0, &k).unwrap();
        assert_eq!(same.fidelity, 0.0);
        assert_eq!(same.total, frac_total_variation(&f, &k).unwrap());
        let zero = functional_energy(&ScalarField::zeros(d), &f, 2.0, &k).unwrap();
        assert!((zero.total - 2.0 * f.l1_norm()).abs() < 1e-12);
        assert!(functional_energy(&f, &f, 0.0, &k).is_err());

        let e = PixelSet::from_fn(d, |i, _| (2..5).contains(&i));
        let g = geometric_energy(&e, &e, 1.0, &k).unwrap();
        assert_eq!((g.perimeter_or_tv, g.fidelity), (frac_perimeter(&e, &k).unwrap(), 0.0));
        let g0 = geometric_energy(&PixelSet::empty(d), &e, 1.5, &k).unwrap();
        assert_eq!(g0.total, 1.5 * e.measure());
        let ginf = geometric_energy(&PixelSet::full(d), &e, 1.5, &k).unwrap();
        assert!(ginf.total.is_infinite());
    }

    #[test]
    fn coarea_of_binary_field_is_one_layer() {
        let d = GridDomain::plane(4, 4, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::from_fn(d, |i, j| i == j);
        let u = ScalarField::indicator(&e, 1.0).unwrap();
        let c = coarea_decompose(&u, &k).unwrap();
        assert_eq!(c.layers.len(), 1);
        assert_eq!(c.reconstructed, frac_perimeter(&e, &k).unwrap());
    }

    #[test]
    fn bit_shift_counting() {
        let a = vec![u64::MAX, 0b1011];
        let b = vec![1u64 << 63, 0b1];
        // b shifted by 63 puts bit 63 at 0 and bit 64 at 1
        assert_eq!(and_shift_count(&a, &b, 63), 2);
        assert_eq!(and_shift_count(&a, &b, 0), 2);
        assert_eq!(and_shift_count(&a, &b, 64), 1);
        assert_eq!(and_shift_count(&a, &b, 128), 0);
    }
}
