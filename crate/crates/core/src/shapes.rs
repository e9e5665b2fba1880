//! Rasterized convex shapes, the discrete convexity test, and morphological
//! opening by a disk.

use crate::error::{invalid, Result};
use crate::grid::{GridDomain, PixelSet};

/// Cells whose centers lie strictly inside the ball `|x − center| < radius`.
pub fn disk(domain: GridDomain, center: [f64; 2], radius: f64) -> PixelSet {
    let r2 = radius * radius;
    let mut set = PixelSet::empty(domain);
    for idx in 0..domain.len() {
        let c = domain.center(idx);
        let (dx, dy) = (c[0] - center[0], c[1] - center[1]);
        if dx * dx + dy * dy < r2 {
            set.set(idx, true);
        }
    }
    set
}

/// Disk centered at the middle of the window (a cell corner for even sizes).
pub fn centered_disk(domain: GridDomain, radius: f64) -> PixelSet {
    disk(domain, window_center(&domain), radius)
}

pub fn window_center(domain: &GridDomain) -> [f64; 2] {
    let h = domain.spacing();
    let o = domain.origin();
    let [nx, ny] = domain.shape();
    [o[0] + 0.5 * h * (nx - 1) as f64, o[1] + 0.5 * h * (ny - 1) as f64]
}

/// Inclusive index rectangle `[i0, i1] × [j0, j1]`.
pub fn rectangle(domain: GridDomain, i0: usize, i1: usize, j0: usize, j1: usize) -> PixelSet {
    PixelSet::from_fn(domain, |i, j| (i0..=i1).contains(&i) && (j0..=j1).contains(&j))
}

/// Inclusive index interval of a 1D window.
pub fn interval(domain: GridDomain, i0: usize, i1: usize) -> PixelSet {
    rectangle(domain, i0, i1, 0, 0)
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of lattice points, counter-clockwise, without collinear vertices.
fn hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn in_hull(h: &[(i64, i64)], p: (i64, i64)) -> bool {
    match h.len() {
        0 => false,
        1 => h[0] == p,
        2 => {
            let (a, b) = (h[0], h[1]);
            cross(a, b, p) == 0
                && p.0 >= a.0.min(b.0)
                && p.0 <= a.0.max(b.0)
                && p.1 >= a.1.min(b.1)
                && p.1 <= a.1.max(b.1)
        }
        n => (0..n).all(|k| cross(h[k], h[(k + 1) % n], p) >= 0),
    }
}

/// A finite nonempty set is discretely convex when it contains every cell
/// whose center lies in the convex hull of its cell centers.
pub fn is_discrete_convex(e: &PixelSet) -> bool {
    if e.background() || e.is_empty_set() {
        return false;
    }
    let d = e.domain();
    let pts: Vec<(i64, i64)> = e
        .cells()
        .map(|idx| {
            let (i, j) = d.coords(idx);
            (i as i64, j as i64)
        })
        .collect();
    let h = hull(pts);
    let (i0, i1, j0, j1) = e.bounding_box().expect("nonempty");
    for j in j0..=j1 {
        for i in i0..=i1 {
            if !e.contains(d.index(i, j)) && in_hull(&h, (i as i64, j as i64)) {
                return false;
            }
        }
    }
    true
}

/// Lattice offsets of the closed disk of radius `r` (physical units).
fn structuring_element(domain: &GridDomain, r: f64) -> Vec<(isize, isize)> {
    let rc = r / domain.spacing();
    let reach = rc.floor() as isize;
    let ry = if domain.dim() == 1 { 0 } else { reach };
    let mut out = Vec::new();
    for dy in -ry..=ry {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64) <= rc * rc * (1.0 + 1e-12) {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn member_at(e: &PixelSet, i: isize, j: isize) -> bool {
    let d = e.domain();
    if i < 0 || j < 0 || i as usize >= d.width() || j as usize >= d.height() {
        e.background()
    } else {
        e.contains(d.index(i as usize, j as usize))
    }
}

pub fn erode(e: &PixelSet, r: f64) -> PixelSet {
    let se = structuring_element(e.domain(), r);
    let mut out = PixelSet::from_mask(*e.domain(), vec![false; e.domain().len()], e.background())
        .expect("same window");
    let d = *e.domain();
    for idx in 0..d.len() {
        let (i, j) = d.coords(idx);
        let keep = se.iter().all(|&(dx, dy)| member_at(e, i as isize + dx, j as isize + dy));
        out.set(idx, keep);
    }
    out
}

pub fn dilate(e: &PixelSet, r: f64) -> PixelSet {
    let se = structuring_element(e.domain(), r);
    let mut out = PixelSet::from_mask(*e.domain(), vec![false; e.domain().len()], e.background())
        .expect("same window");
    let d = *e.domain();
    for idx in 0..d.len() {
        let (i, j) = d.coords(idx);
        let hit = se.iter().any(|&(dx, dy)| member_at(e, i as isize + dx, j as isize + dy));
        out.set(idx, hit);
    }
    out
}

/// Union of all radius-`r` disks contained in `e`.
pub fn opening(e: &PixelSet, r: f64) -> Result<PixelSet> {
    if !(r > 0.0) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    Ok(dilate(&erode(e, r), r))
}

/// Both `e` and its complement are unions of radius-`r` disks, as far as the window shows.
pub fn ball_condition(e: &PixelSet, r: f64) -> Result<bool> {
    Ok(opening(e, r)? == *e && opening(&e.complement(), r)? == e.complement())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangles_and_disks_are_convex() {
        let d = GridDomain::plane(20, 16, 1.0).unwrap();
        assert!(is_discrete_convex(&rectangle(d, 2, 9, 3, 12)));
        assert!(is_discrete_convex(&centered_disk(d, 6.3)));
        assert!(is_discrete_convex(&rectangle(d, 4, 4, 0, 15)));
        let l = rectangle(d, 2, 9, 3, 5).union(&rectangle(d, 2, 4, 3, 12)).unwrap();
        assert!(!is_discrete_convex(&l));
        assert!(!is_discrete_convex(&PixelSet::empty(d)));
    }

    #[test]
    fn one_dimensional_convexity_is_contiguity() {
        let d = GridDomain::line(12, 1.0).unwrap();
        assert!(is_discrete_convex(&interval(d, 3, 8)));
        let gap = interval(d, 1, 3).union(&interval(d, 5, 7)).unwrap();
        assert!(!is_discrete_convex(&gap));
    }

    #[test]
    fn opening_keeps_fat_sets_and_drops_thin_ones() {
        let d = GridDomain::plane(24, 24, 1.0).unwrap();
        let square = rectangle(d, 4, 19, 4, 19);
        let thin = rectangle(d, 4, 19, 10, 10);
        assert!(opening(&thin, 2.0).unwrap().is_empty_set());
        let open = opening(&square, 1.0).unwrap();
        assert!(open.is_subset_of(&square));
        assert!(open.count() >= square.count() - 4);
    }

    #[test]
    fn disk_is_symmetric() {
        let d = GridDomain::plane(16, 16, 0.5).unwrap();
        let e = centered_disk(d, 3.0);
        for idx in e.cells() {
            let (i, j) = d.coords(idx);
            assert!(e.contains(d.index(15 - i, j)));
            assert!(e.contains(d.index(j, i)));
        }
    }
}
