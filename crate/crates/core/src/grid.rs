//! Lattice domains, scalar fields, and pixel sets.
//!
//! A [`GridDomain`] is a finite window of `R^n` (`n` is 1 or 2) cut into
//! square cells of side `h`. One-dimensional windows are stored as a single
//! row, so every routine can index cells as `(i, j)` with `j == 0` in 1D.
//!
//! A [`PixelSet`] is a window bitmap plus a background bit that says whether
//! the (infinite) exterior of the window belongs to the set. Complements are
//! therefore exact, and sets with bounded complement are representable.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    dim: usize,
    shape: [usize; 2],
    spacing: f64,
    origin: [f64; 2],
}

impl GridDomain {
    pub fn new(dim: usize, shape: [usize; 2], spacing: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return invalid(format!("dimension must be 1 or 2, got {dim}"));
        }
        if shape[0] == 0 || shape[1] == 0 {
            return invalid("every extent must be at least one cell");
        }
        if dim == 1 && shape[1] != 1 {
            return invalid("1D domains have a single row");
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return invalid(format!("spacing must be positive, got {spacing}"));
        }
        Ok(Self { dim, shape, spacing, origin: [0.0; 2] })
    }

    pub fn line(n: usize, spacing: f64) -> Result<Self> {
        Self::new(1, [n, 1], spacing)
    }

    pub fn plane(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        Self::new(2, [nx, ny], spacing)
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Self {
        self.origin = origin;
        if self.dim == 1 {
            self.origin[1] = 0.0;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape[0]
    }

    pub fn height(&self) -> usize {
        self.shape[1]
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Number of cells in the window.
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.shape[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.shape[0], idx / self.shape[0])
    }

    /// Physical coordinates of a cell center.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
        ]
    }

    /// Largest center-to-center distance inside the window.
    pub fn diameter(&self) -> f64 {
        let dx = (self.shape[0] - 1) as f64;
        let dy = (self.shape[1] - 1) as f64;
        self.spacing * (dx * dx + dy * dy).sqrt()
    }

    pub(crate) fn check_same(&self, other: &GridDomain) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!(
                "{:?} x {} vs {:?} x {}",
                self.shape, self.spacing, other.shape, other.spacing
            )))
        }
    }
}

/// Binary set operations on [`PixelSet`]s. `Complement` ignores its second operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
    SymmetricDifference,
    Complement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelSet {
    domain: GridDomain,
    mask: Vec<bool>,
    background: bool,
}

impl PixelSet {
    pub fn from_mask(domain: GridDomain, mask: Vec<bool>, background: bool) -> Result<Self> {
        if mask.len() != domain.len() {
            return invalid(format!(
                "mask has {} cells, domain has {}",
                mask.len(),
                domain.len()
            ));
        }
        Ok(Self { domain, mask, background })
    }

    pub fn from_fn(domain: GridDomain, mut member: impl FnMut(usize, usize) -> bool) -> Self {
        let mask = (0..domain.len())
            .map(|idx| {
                let (i, j) = domain.coords(idx);
                member(i, j)
            })
            .collect();
        Self { domain, mask, background: false }
    }

    pub fn empty(domain: GridDomain) -> Self {
        Self { domain, mask: vec![false; domain.len()], background: false }
    }

    /// The whole of `R^n`.
    pub fn full(domain: GridDomain) -> Self {
        Self { domain, mask: vec![true; domain.len()], background: true }
    }

    /// Every window cell, nothing outside.
    pub fn window(domain: GridDomain) -> Self {
        Self { domain, mask: vec![true; domain.len()], background: false }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn background(&self) -> bool {
        self.background
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn set(&mut self, idx: usize, member: bool) {
        self.mask[idx] = member;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn is_empty_set(&self) -> bool {
        !self.background && self.mask.iter().all(|&b| !b)
    }

    pub fn is_full_space(&self) -> bool {
        self.background && self.mask.iter().all(|&b| b)
    }

    /// `|E|`, or `f64::INFINITY` when the exterior belongs to the set.
    pub fn measure(&self) -> f64 {
        if self.background {
            f64::INFINITY
        } else {
            self.count() as f64 * self.domain.cell_volume()
        }
    }

    pub fn complement(&self) -> PixelSet {
        PixelSet {
            domain: self.domain,
            mask: self.mask.iter().map(|&b| !b).collect(),
            background: !self.background,
        }
    }

    /// `self ⊆ other` (exteriors included).
    pub fn is_subset_of(&self, other: &PixelSet) -> bool {
        (!self.background || other.background)
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &PixelSet) -> Result<PixelSet> {
        set_algebra(self, other, SetOp::Union)
    }

    pub fn intersection(&self, other: &PixelSet) -> Result<PixelSet> {
        set_algebra(self, other, SetOp::Intersection)
    }

    pub fn difference(&self, other: &PixelSet) -> Result<PixelSet> {
        set_algebra(self, other, SetOp::Difference)
    }

    pub fn symmetric_difference(&self, other: &PixelSet) -> Result<PixelSet> {
        set_algebra(self, other, SetOp::SymmetricDifference)
    }

    /// Inclusive cell bounding box `(i0, i1, j0, j1)` of the window bits, if any.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for idx in self.cells() {
            let (i, j) = self.domain.coords(idx);
            bb = Some(match bb {
                None => (i, i, j, j),
                Some((a, b, c, d)) => (a.min(i), b.max(i), c.min(j), d.max(j)),
            });
        }
        bb
    }
}

pub fn set_algebra(a: &PixelSet, b: &PixelSet, op: SetOp) -> Result<PixelSet> {
    if op == SetOp::Complement {
        return Ok(a.complement());
    }
    a.domain.check_same(&b.domain)?;
    let f = |x: bool, y: bool| match op {
        SetOp::Union => x || y,
        SetOp::Intersection => x && y,
        SetOp::Difference => x && !y,
        SetOp::SymmetricDifference => x != y,
        SetOp::Complement => unreachable!(),
    };
    Ok(PixelSet {
        domain: a.domain,
        mask: a.mask.iter().zip(&b.mask).map(|(&x, &y)| f(x, y)).collect(),
        background: f(a.background, b.background),
    })
}

/// `|E Δ U|`; infinite exactly when the background bits differ.
pub fn symm_diff_measure(e: &PixelSet, u: &PixelSet) -> Result<f64> {
    e.domain.check_same(&u.domain)?;
    if e.background != u.background {
        return Ok(f64::INFINITY);
    }
    let n = e.mask.iter().zip(&u.mask).filter(|(a, b)| a != b).count();
    Ok(n as f64 * e.domain.cell_volume())
}

/// A real function sampled at cell centers, identically zero outside the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    domain: GridDomain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return invalid(format!(
                "field has {} values, domain has {} cells",
                values.len(),
                domain.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("non-finite field value {v}"));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: GridDomain) -> Self {
        Self { domain, values: vec![0.0; domain.len()] }
    }

    /// `c · χ_E` for a set with bounded support.
    pub fn indicator(set: &PixelSet, c: f64) -> Result<Self> {
        if set.background() {
            return invalid("indicator of a set containing the exterior is not compactly supported");
        }
        let values = set.mask().iter().map(|&b| if b { c } else { 0.0 }).collect();
        Self::new(*set.domain(), values)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `h^dim · Σ |v|`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.domain.cell_volume()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `{f > t}` when `strict`, `{f ≥ t}` otherwise. The exterior carries the value 0.
pub fn level_set(f: &ScalarField, t: f64, strict: bool) -> PixelSet {
    let above = |v: f64| if strict { v > t } else { v >= t };
    PixelSet {
        domain: f.domain,
        mask: f.values.iter().map(|&v| above(v)).collect(),
        background: above(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom4() -> GridDomain {
        GridDomain::plane(4, 4, 1.0).unwrap()
    }

    #[test]
    fn level_sets_of_zero_field() {
        let d = dom4();
        let f = ScalarField::zeros(d);
        let e = level_set(&f, 0.0, true);
        assert!(e.is_empty_set());
        assert!(!e.background());
        let full = level_set(&f, -1.0, true);
        assert!(full.is_full_space());
    }

    #[test]
    fn level_set_of_indicator() {
        let d = GridDomain::line(6, 1.0).unwrap();
        let e = PixelSet::from_fn(d, |i, _| (1..4).contains(&i));
        let f = ScalarField::indicator(&e, 1.0).unwrap();
        assert_eq!(level_set(&f, 0.5, true), e);
    }

    #[test]
    fn halves_of_a_window() {
        let d = dom4();
        let left = PixelSet::from_fn(d, |i, _| i < 2);
        let right = PixelSet::from_fn(d, |i, _| i >= 2);
        assert_eq!(left.union(&right).unwrap(), PixelSet::window(d));
        assert!(left.intersection(&right).unwrap().is_empty_set());
        assert!(left.symmetric_difference(&left).unwrap().is_empty_set());
        assert!(PixelSet::empty(d).complement().is_full_space());
    }

    #[test]
    fn measures() {
        let d = GridDomain::plane(3, 3, 0.5).unwrap();
        assert_eq!(PixelSet::empty(d).measure(), 0.0);
        let one = PixelSet::from_fn(d, |i, j| i == 1 && j == 1);
        assert_eq!(one.measure(), 0.25);
        assert_eq!(PixelSet::full(d).measure(), f64::INFINITY);
        let w = PixelSet::window(d);
        assert_eq!(symm_diff_measure(&w, &w).unwrap(), 0.0);
        assert_eq!(symm_diff_measure(&w, &PixelSet::empty(d)).unwrap(), w.measure());
        assert!(symm_diff_measure(&w, &PixelSet::full(d)).unwrap().is_infinite());
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let a = PixelSet::empty(dom4());
        let b = PixelSet::empty(GridDomain::plane(4, 4, 2.0).unwrap());
        assert!(matches!(a.union(&b), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn invalid_domains() {
        assert!(GridDomain::new(3, [2, 2], 1.0).is_err());
        assert!(GridDomain::plane(0, 2, 1.0).is_err());
        assert!(GridDomain::line(4, 0.0).is_err());
        assert!(ScalarField::new(GridDomain::line(2, 1.0).unwrap(), vec![1.0, f64::NAN]).is_err());
    }
}
