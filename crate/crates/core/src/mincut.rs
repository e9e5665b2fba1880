//! Exact minimization of `U ↦ P_s(U) + Λ|E Δ U|` by a single minimum cut.
//!
//! Every window cell is a node. A node on the source side is a member of `U`.
//! Pair edges carry `w(x − y)` in both directions, and the unary costs are
//!
//! ```text
//! member:     exposure(x) + Λ h^n [x ∉ E]
//! non-member: Λ h^n [x ∈ E]
//! ```
//!
//! Data containing the exterior are solved through their complement, which
//! keeps the search space finite; the minimal and maximal solutions swap
//! under that reflection.

use serde::Serialize;

use crate::energy::geometric_energy;
use crate::error::{invalid, Result};
use crate::grid::PixelSet;
use crate::kernel::Kernel;
use crate::maxflow::{FlowNetwork, FlowStats};

/// Relative tolerance below which residual capacities count as saturated.
const TIE_EPS: f64 = 1e-11;

pub struct CutProblem<'k> {
    network: FlowNetwork<'k>,
    datum: PixelSet,
    bounded: PixelSet,
    complemented: bool,
    lambda: f64,
    source: Vec<f64>,
    sink: Vec<f64>,
    constant: f64,
    max_pair: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutSolution {
    pub lambda: f64,
    pub minimal_set: PixelSet,
    pub maximal_set: PixelSet,
    pub optimal_value: f64,
    pub flow_stats: FlowStats,
}

pub fn build_cut_problem<'k>(e: &PixelSet, lambda: f64, k: &'k Kernel) -> Result<CutProblem<'k>> {
    e.domain().check_same(k.domain())?;
    let n = e.domain().len();
    let mut p = CutProblem {
        network: FlowNetwork::new(k, (0..n).collect()),
        datum: e.clone(),
        bounded: e.clone(),
        complemented: false,
        lambda: 1.0,
        source: vec![0.0; n],
        sink: vec![0.0; n],
        constant: 0.0,
        max_pair: k.weight(1, 0),
    };
    p.reset(e, lambda)?;
    Ok(p)
}

impl<'k> CutProblem<'k> {
    /// Replaces the datum and fidelity parameter, keeping the pair graph.
    pub fn reset(&mut self, e: &PixelSet, lambda: f64) -> Result<()> {
        if !(lambda > 0.0) {
            return invalid(format!("fidelity parameter must be positive, got {lambda}"));
        }
        e.domain().check_same(self.datum.domain())?;
        self.datum = e.clone();
        self.complemented = e.background();
        self.bounded = if self.complemented { e.complement() } else { e.clone() };
        self.lambda = lambda;
        let vol = lambda * e.domain().cell_volume();
        self.constant = 0.0;
        for v in 0..self.network.len() {
            let inside = self.bounded.contains(v);
            let member = self.network.node_exposure(v) + if inside { 0.0 } else { vol };
            let other = if inside { vol } else { 0.0 };
            let m = member.min(other);
            self.sink[v] = member - m;
            self.source[v] = other - m;
            self.constant += m;
        }
        Ok(())
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        let e = self.datum.clone();
        self.reset(&e, lambda)
    }

    pub fn datum(&self) -> &PixelSet {
        &self.datum
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The labeling-independent part of the energy.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn is_complemented(&self) -> bool {
        self.complemented
    }

    /// Cut value of the labeling `U`; `cut_value(U) + constant() = G_s(U; E, Λ)`.
    /// Infinite when `U` and the datum disagree far away.
    pub fn cut_value(&self, u: &PixelSet) -> Result<f64> {
        u.domain().check_same(self.datum.domain())?;
        if u.background() != self.datum.background() {
            return Ok(f64::INFINITY);
        }
        let side: Vec<bool> = (0..self.network.len())
            .map(|v| u.contains(v) != self.complemented)
            .collect();
        let outside: Vec<bool> = side.iter().map(|b| !b).collect();
        let mut value = 0.0;
        for v in 0..side.len() {
            if side[v] {
                value += self.sink[v];
                value += self.network.pair_weight_to(v, &outside);
            } else {
                value += self.source[v];
            }
        }
        Ok(value)
    }

    fn tie_eps(&self) -> f64 {
        let unary = self.source.iter().chain(&self.sink).fold(0.0f64, |a, &b| a.max(b));
        TIE_EPS * self.max_pair.max(unary).max(f64::MIN_POSITIVE)
    }
}

pub fn solve_cut(p: &mut CutProblem) -> CutSolution {
    let eps = p.tie_eps();
    let sides = p.network.solve(&p.source, &p.sink, eps);
    let domain = *p.datum.domain();
    let to_set = |flags: &[bool]| {
        PixelSet::from_mask(domain, flags.to_vec(), false).expect("mask matches the window")
    };
    let (lo, hi) = (to_set(&sides.minimal), to_set(&sides.maximal));
    let (minimal_set, maximal_set) = if p.complemented {
        (hi.complement(), lo.complement())
    } else {
        (lo, hi)
    };
    CutSolution {
        lambda: p.lambda,
        minimal_set,
        maximal_set,
        optimal_value: sides.flow + p.constant,
        flow_stats: sides.stats,
    }
}

/// Solves one geometric problem from scratch.
pub fn solve_geometric(e: &PixelSet, lambda: f64, k: &Kernel) -> Result<CutSolution> {
    let mut p = build_cut_problem(e, lambda, k)?;
    Ok(solve_cut(&mut p))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub solution: CutSolution,
    /// `min(|U_m Δ E|, |U_M Δ E|)`.
    pub d_min: f64,
    /// `max(|U_m Δ E|, |U_M Δ E|)`.
    pub d_max: f64,
    /// The optimum is not unique here.
    pub jump: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Indices `i` with `d_max(Λ_{i+1}) > d_min(Λ_i)`.
    pub violations: Vec<usize>,
    /// Parameter intervals known to contain a jump of the distance.
    pub brackets: Vec<(f64, f64)>,
}

impl Sweep {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn parametric_sweep(e: &PixelSet, lambdas: &[f64], k: &Kernel) -> Result<Sweep> {
    if lambdas.is_empty() {
        return invalid("empty parameter list");
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return invalid("fidelity parameters must be positive");
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("fidelity parameters must be strictly increasing");
    }
    let vol = e.domain().cell_volume();
    let mut p = build_cut_problem(e, lambdas[0], k)?;
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        p.set_lambda(lambda)?;
        let solution = solve_cut(&mut p);
        let a = distance_cells(&solution.minimal_set, e);
        let b = distance_cells(&solution.maximal_set, e);
        points.push(SweepPoint {
            d_min: a.min(b) as f64 * vol,
            d_max: a.max(b) as f64 * vol,
            jump: a != b,
            solution,
        });
    }
    let mut violations = Vec::new();
    let mut brackets = Vec::new();
    for i in 0..points.len() {
        if points[i].jump {
            brackets.push((points[i].solution.lambda, points[i].solution.lambda));
        }
        if i + 1 < points.len() {
            let (cur, next) = (&points[i], &points[i + 1]);
            if next.d_max > cur.d_min {
                violations.push(i);
            } else if next.d_max < cur.d_min {
                brackets.push((cur.solution.lambda, next.solution.lambda));
            }
        }
    }
    Ok(Sweep { points, violations, brackets })
}

fn distance_cells(u: &PixelSet, e: &PixelSet) -> usize {
    u.mask().iter().zip(e.mask()).filter(|(a, b)| a != b).count()
}

/// `G_s` of both extreme solutions, for cross-checking the stored optimum.
pub fn solution_energies(sol: &CutSolution, e: &PixelSet, k: &Kernel) -> Result<(f64, f64)> {
    Ok((
        geometric_energy(&sol.minimal_set, e, sol.lambda, k)?.total,
        geometric_energy(&sol.maximal_set, e, sol.lambda, k)?.total,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::frac_perimeter;
    use crate::grid::GridDomain;

    fn subsets(d: GridDomain) -> impl Iterator<Item = PixelSet> {
        let n = d.len();
        (0..1u32 << n).map(move |m| {
            PixelSet::from_mask(d, (0..n).map(|i| m >> i & 1 == 1).collect(), false).unwrap()
        })
    }

    #[test]
    fn empty_datum_gives_empty_optimum() {
        let d = GridDomain::plane(3, 3, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let sol = solve_geometric(&PixelSet::empty(d), 1.0, &k).unwrap();
        assert!(sol.maximal_set.is_empty_set());
        assert!(sol.optimal_value.abs() < 1e-12);
    }

    #[test]
    fn single_cell_two_cases() {
        let d = GridDomain::line(1, 0.5).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::window(d);
        let per = frac_perimeter(&e, &k).unwrap();
        let critical = per / d.cell_volume();
        let below = solve_geometric(&e, 0.9 * critical, &k).unwrap();
        assert!(below.maximal_set.is_empty_set());
        let above = solve_geometric(&e, 1.1 * critical, &k).unwrap();
        assert_eq!(above.minimal_set, e);
    }

    #[test]
    fn cut_value_tracks_energy() {
        let d = GridDomain::plane(3, 2, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.3).unwrap();
        let e = PixelSet::from_fn(d, |i, j| i + j < 2);
        let p = build_cut_problem(&e, 0.7, &k).unwrap();
        for u in subsets(d) {
            let g = geometric_energy(&u, &e, 0.7, &k).unwrap().total;
            let c = p.cut_value(&u).unwrap() + p.constant();
            assert!((g - c).abs() < 1e-10 * (1.0 + g), "{g} vs {c}");
        }
    }

    #[test]
    fn matches_enumeration_on_small_window() {
        let d = GridDomain::plane(4, 3, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::from_fn(d, |i, j| (i * 7 + j * 5) % 3 != 0);
        for lambda in [0.2, 1.0, 3.0] {
            let sol = solve_geometric(&e, lambda, &k).unwrap();
            let best = subsets(d)
                .map(|u| geometric_energy(&u, &e, lambda, &k).unwrap().total)
                .fold(f64::INFINITY, f64::min);
            assert!((sol.optimal_value - best).abs() <= 1e-9 * best.max(1.0));
            let (a, b) = solution_energies(&sol, &e, &k).unwrap();
            assert!((a - best).abs() <= 1e-9 * best.max(1.0));
            assert!((b - best).abs() <= 1e-9 * best.max(1.0));
        }
    }

    #[test]
    fn complement_datum_swaps_extremes() {
        let d = GridDomain::plane(4, 4, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::from_fn(d, |i, j| i < 3 && j < 2);
        let a = solve_geometric(&e, 1.3, &k).unwrap();
        let b = solve_geometric(&e.complement(), 1.3, &k).unwrap();
        assert_eq!(b.minimal_set, a.maximal_set.complement());
        assert_eq!(b.maximal_set, a.minimal_set.complement());
    }

    #[test]
    fn sweep_rejects_unsorted_parameters() {
        let d = GridDomain::line(4, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::window(d);
        assert!(parametric_sweep(&e, &[1.0, 0.5], &k).is_err());
        assert!(parametric_sweep(&e, &[0.0, 0.5], &k).is_err());
        let sw = parametric_sweep(&e, &[0.1, 0.5, 1.0, 5.0], &k).unwrap();
        assert!(sw.is_monotone());
    }
}
