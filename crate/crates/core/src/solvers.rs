//! The functional problem by stacked minimum cuts, fractional Cheeger sets,
//! and the fidelity thresholds that separate trivial from exact recovery.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::energy::{frac_perimeter, functional_energy, EnergyBreakdown};
use crate::error::{invalid, Error, Result};
use crate::grid::{GridDomain, PixelSet, ScalarField};
use crate::kernel::{ball_volume, Kernel, KernelParams};
use crate::maxflow::FlowNetwork;
use crate::mincut::{build_cut_problem, solve_cut, CutSolution};
use crate::shapes::{centered_disk, is_discrete_convex};

/// Which extreme optimum to take at every layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Minimal,
    Maximal,
}

impl Variant {
    pub fn flipped(self) -> Self {
        match self {
            Variant::Minimal => Variant::Maximal,
            Variant::Maximal => Variant::Minimal,
        }
    }

    fn pick(self, sol: &CutSolution) -> &PixelSet {
        match self {
            Variant::Minimal => &sol.minimal_set,
            Variant::Maximal => &sol.maximal_set,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Minimal => "minimal",
            Variant::Maximal => "maximal",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimal" | "min" => Ok(Variant::Minimal),
            "maximal" | "max" => Ok(Variant::Maximal),
            _ => invalid(format!("unknown variant `{s}` (expected minimal or maximal)")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub threshold: f64,
    pub set: PixelSet,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub kernel: KernelParams,
    pub shape: [usize; 2],
    pub lambda: f64,
    pub variant: Variant,
    pub n_levels: usize,
    pub distinct_values: usize,
    pub quantized: bool,
    pub layers: usize,
    /// Layers whose minimal and maximal cuts coincide.
    pub unique_layers: usize,
    pub energy: EnergyBreakdown,
    /// `Σ_k Δt_k · min G_s` over the layers; equals `energy.total` up to rounding.
    pub layered_energy: f64,
    pub pushes: u64,
    pub relabels: u64,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LayeredSolution {
    pub u: ScalarField,
    /// The datum actually solved, after quantization.
    pub datum: ScalarField,
    pub levels: Vec<Level>,
    pub variant: Variant,
    pub report: SolveReport,
}

/// Maps `f` onto at most `n_levels` values: unchanged when it already has
/// that few, otherwise rounded to the nearest of `n_levels` uniform levels.
pub fn quantize(f: &ScalarField, n_levels: usize) -> Result<(ScalarField, usize, bool)> {
    if n_levels == 0 {
        return invalid("at least one level is required");
    }
    let distinct = distinct(f.values()).len();
    if distinct <= n_levels {
        return Ok((f.clone(), distinct, false));
    }
    let (lo, hi) = (f.min_value(), f.max_value());
    let q = if n_levels == 1 {
        let mid = 0.5 * (lo + hi);
        f.map(|_| mid)?
    } else {
        let step = (hi - lo) / (n_levels - 1) as f64;
        f.map(|v| {
            let j = ((v - lo) / step).round().clamp(0.0, (n_levels - 1) as f64);
            if j as usize == n_levels - 1 {
                hi
            } else {
                lo + j * step
            }
        })?
    };
    Ok((q, distinct, true))
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut t = values.to_vec();
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    t.dedup();
    t
}

/// Result of stacking cuts for a datum with a given constant exterior value.
struct Stack {
    values: Vec<f64>,
    thresholds: Vec<f64>,
    sets: Vec<PixelSet>,
    optimal: Vec<f64>,
    unique: usize,
    pushes: u64,
    relabels: u64,
}

fn solve_stack(
    domain: &GridDomain,
    f: &[f64],
    exterior: f64,
    lambda: f64,
    k: &Kernel,
    variant: Variant,
) -> Result<Stack> {
    let mut all = f.to_vec();
    all.push(exterior);
    let t = distinct(&all);
    let mut sets: Vec<PixelSet> = Vec::with_capacity(t.len().saturating_sub(1));
    let mut optimal = Vec::with_capacity(sets.capacity());
    let (mut unique, mut pushes, mut relabels) = (0, 0, 0);
    let mut problem = None;
    for gap in t.windows(2) {
        let mask = f.iter().map(|&v| v > gap[0]).collect();
        let datum = PixelSet::from_mask(*domain, mask, exterior > gap[0])?;
        let p = match problem.as_mut() {
            None => problem.insert(build_cut_problem(&datum, lambda, k)?),
            Some(p) => {
                p.reset(&datum, lambda)?;
                p
            }
        };
        let sol = solve_cut(p);
        if sol.minimal_set == sol.maximal_set {
            unique += 1;
        }
        pushes += sol.flow_stats.pushes;
        relabels += sol.flow_stats.relabels;
        optimal.push(sol.optimal_value);
        let u = variant.pick(&sol).clone();
        if let Some(prev) = sets.last() {
            if !u.is_subset_of(prev) {
                return Err(Error::NestingViolation { upper: gap[0], lower: t[sets.len() - 1] });
            }
        }
        sets.push(u);
    }
    let mut count = vec![0usize; domain.len()];
    for s in &sets {
        for c in s.cells() {
            count[c] += 1;
        }
    }
    let values = count.iter().map(|&c| t[c]).collect();
    let thresholds = t[..sets.len()].to_vec();
    Ok(Stack { values, thresholds, sets, optimal, unique, pushes, relabels })
}

/// Minimizes `sTV(u) + Λ‖u − f‖₁` over fields taking the (quantized) values of `f`.
pub fn solve_functional(
    f: &ScalarField,
    lambda: f64,
    k: &Kernel,
    n_levels: usize,
    variant: Variant,
) -> Result<LayeredSolution> {
    if !(lambda > 0.0) {
        return invalid(format!("fidelity parameter must be positive, got {lambda}"));
    }
    f.domain().check_same(k.domain())?;
    let start = Instant::now();
    let (datum, distinct_values, quantized) = quantize(f, n_levels)?;
    let d = *f.domain();
    let st = solve_stack(&d, datum.values(), 0.0, lambda, k, variant)?;
    let u = ScalarField::new(d, st.values)?;
    let energy = functional_energy(&u, &datum, lambda, k)?;
    let layered_energy = st
        .thresholds
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let next = if i + 1 < st.thresholds.len() {
                st.thresholds[i + 1]
            } else {
                upper_value(datum.values(), t)
            };
            (next - t) * st.optimal[i]
        })
        .sum();
    let levels = st
        .thresholds
        .iter()
        .zip(st.sets)
        .map(|(&threshold, set)| Level { threshold, set })
        .collect::<Vec<_>>();
    let report = SolveReport {
        kernel: k.params(),
        shape: d.shape(),
        lambda,
        variant,
        n_levels,
        distinct_values,
        quantized,
        layers: levels.len(),
        unique_layers: st.unique,
        energy,
        layered_energy,
        pushes: st.pushes,
        relabels: st.relabels,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(LayeredSolution { u, datum, levels, variant, report })
}

/// Smallest value of `f ∪ {0}` above `t`.
fn upper_value(f: &[f64], t: f64) -> f64 {
    f.iter().copied().chain([0.0]).filter(|&v| v > t).fold(f64::INFINITY, f64::min)
}

/// Per-cell comparison of a re-solved field with its predicted value.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub mismatched_cells: usize,
    pub max_deviation: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.mismatched_cells == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationDiagnostics {
    pub c: f64,
    pub checks: Vec<IdentityCheck>,
}

impl TruncationDiagnostics {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }
}

/// Re-solves transformed data and compares with the transformed solution:
/// translation by `c`, scaling by `c`, both sign parts, and truncation at `c`
/// from above and below.
pub fn truncation_checks(
    sol: &LayeredSolution,
    f: &ScalarField,
    c: f64,
    k: &Kernel,
) -> Result<TruncationDiagnostics> {
    if !c.is_finite() {
        return invalid(format!("shift must be finite, got {c}"));
    }
    let (datum, _, _) = quantize(f, sol.report.n_levels)?;
    let d = *datum.domain();
    let lambda = sol.report.lambda;
    let v = sol.variant;
    let fv = datum.values();
    let u = sol.u.values();
    let map = |g: fn(f64, f64) -> f64, x: &[f64]| x.iter().map(|&a| g(a, c)).collect::<Vec<_>>();

    let run = |name: &'static str, data: Vec<f64>, ext: f64, var: Variant, expect: Vec<f64>| {
        solve_stack(&d, &data, ext, lambda, k, var).map(|st| compare(name, &st.values, &expect))
    };

    let mut checks = vec![run(
        "translation",
        map(|a, c| a + c, fv),
        c,
        v,
        map(|a, c| a + c, u),
    )?];
    let scale_variant = if c < 0.0 { v.flipped() } else { v };
    checks.push(run("dilation", map(|a, c| a * c, fv), 0.0, scale_variant, map(|a, c| a * c, u))?);
    checks.push(run(
        "positive_part",
        fv.iter().map(|&a| a.max(0.0)).collect(),
        0.0,
        v,
        u.iter().map(|&a| a.max(0.0)).collect(),
    )?);
    checks.push(run(
        "negative_part",
        fv.iter().map(|&a| (-a).max(0.0)).collect(),
        0.0,
        v.flipped(),
        u.iter().map(|&a| (-a).max(0.0)).collect(),
    )?);
    checks.push(run("min_truncation", map(f64::min, fv), 0f64.min(c), v, map(f64::min, u))?);
    checks.push(run("max_truncation", map(f64::max, fv), 0f64.max(c), v, map(f64::max, u))?);
    Ok(TruncationDiagnostics { c, checks })
}

fn compare(name: &'static str, got: &[f64], expect: &[f64]) -> IdentityCheck {
    let mut mismatched_cells = 0;
    let mut max_deviation = 0.0f64;
    for (a, b) in got.iter().zip(expect) {
        if a != b {
            mismatched_cells += 1;
            max_deviation = max_deviation.max((a - b).abs());
        }
    }
    IdentityCheck { name, mismatched_cells, max_deviation }
}

/// Outcome of minimizing `P_s(U) / D(U)` over subsets of a node set.
struct RatioMin {
    value: f64,
    best: Vec<bool>,
    iterations: usize,
}

/// Dinkelbach iteration for `inf { P_s(U)/D(U) : U ⊆ nodes, D(U) > 0 }`,
/// with `D(U) = Σ_{x∈U} d(x)`, started from the set `start`.
fn dinkelbach(net: &mut FlowNetwork, d: &[f64], start: Vec<bool>, tol: f64) -> Result<RatioMin> {
    let n = net.len();
    let perimeter = |net: &FlowNetwork, side: &[bool]| {
        let out: Vec<bool> = side.iter().map(|b| !b).collect();
        (0..n)
            .filter(|&v| side[v])
            .map(|v| net.node_exposure(v) + net.pair_weight_to(v, &out))
            .sum::<f64>()
    };
    let denom = |side: &[bool]| (0..n).filter(|&v| side[v]).map(|v| d[v]).sum::<f64>();

    let d0 = denom(&start);
    if !(d0 > 0.0) {
        return invalid("initial set has no positive weight");
    }
    let mut best = start;
    let mut lambda = perimeter(net, &best) / d0;
    let scale = lambda * d0;
    let mut src = vec![0.0; n];
    let mut snk = vec![0.0; n];
    for iterations in 1..=200 {
        let mut constant = 0.0;
        let mut cap = 0.0f64;
        for v in 0..n {
            let a = net.node_exposure(v) - lambda * d[v];
            if a >= 0.0 {
                snk[v] = a;
                src[v] = 0.0;
            } else {
                src[v] = -a;
                snk[v] = 0.0;
                constant += a;
            }
            cap = cap.max(a.abs());
        }
        let cut = net.solve(&src, &snk, 1e-11 * cap.max(f64::MIN_POSITIVE));
        let min_value = cut.flow + constant;
        let side = cut.maximal;
        let dm = denom(&side);
        if min_value >= -tol * scale || !(dm > 0.0) {
            if dm > 0.0 {
                let r = perimeter(net, &side) / dm;
                if r <= lambda * (1.0 + 1e-12) {
                    best = side;
                    lambda = lambda.min(r);
                }
            }
            return Ok(RatioMin { value: lambda, best, iterations });
        }
        let r = perimeter(net, &side) / dm;
        if r >= lambda {
            return Ok(RatioMin { value: lambda, best, iterations });
        }
        lambda = r;
        best = side;
    }
    Ok(RatioMin { value: lambda, best, iterations: 200 })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheegerResult {
    /// `h_s(E) = min_{U⊆E} P_s(U)/|U|`.
    pub constant: f64,
    /// The largest minimizer found.
    pub cheeger_set: PixelSet,
    pub iterations: usize,
    pub calibrable: bool,
    /// `P_s(E)/|E|`.
    pub ratio_of_set: f64,
}

pub fn cheeger(e: &PixelSet, k: &Kernel, tol: f64) -> Result<CheegerResult> {
    e.domain().check_same(k.domain())?;
    if e.background() {
        return invalid("the s-Cheeger problem needs a bounded set");
    }
    if e.is_empty_set() {
        return Err(Error::EmptySet);
    }
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let cells: Vec<usize> = e.cells().collect();
    let vol = e.domain().cell_volume();
    let mut net = FlowNetwork::new(k, cells.clone());
    let weights = vec![vol; cells.len()];
    let r = dinkelbach(&mut net, &weights, vec![true; cells.len()], tol)?;
    let mut set = PixelSet::empty(*e.domain());
    for (v, &c) in cells.iter().enumerate() {
        if r.best[v] {
            set.set(c, true);
        }
    }
    let ratio_of_set = frac_perimeter(e, k)? / e.measure();
    let constant = frac_perimeter(&set, k)? / set.measure();
    Ok(CheegerResult {
        calibrable: (ratio_of_set - constant).abs() <= 1e-9 * (1.0 + constant),
        constant,
        cheeger_set: set,
        iterations: r.iterations,
        ratio_of_set,
    })
}

fn reference_cache() -> &'static Mutex<HashMap<(usize, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Discrete `P_s(B_1)` at the reference resolution: `h = 1/1024` on a line,
/// 64 cells per unit radius in the plane.
pub fn unit_ball_perimeter(dim: usize, s: f64) -> Result<f64> {
    let key = (dim, s.to_bits());
    if let Some(&c) = reference_cache().lock().expect("cache lock").get(&key) {
        return Ok(c);
    }
    let (domain, radius) = match dim {
        1 => (GridDomain::line(2048, 1.0 / 1024.0)?, 1.0),
        2 => (GridDomain::plane(128, 128, 1.0 / 64.0)?, 1.0),
        _ => return invalid(format!("unsupported dimension {dim}")),
    };
    let k = Kernel::for_domain(&domain, s)?;
    let ball = centered_disk(domain, radius);
    let c = frac_perimeter(&ball, &k)?;
    reference_cache().lock().expect("cache lock").insert(key, c);
    Ok(c)
}

/// `(c_{n,s} / ω_n) · r0^{−s}`, above which a set satisfying the radius-`r0`
/// ball condition is its own unique reconstruction.
pub fn high_fidelity_threshold(e: &PixelSet, k: &Kernel, r0: f64) -> Result<f64> {
    e.domain().check_same(k.domain())?;
    if !(r0 > 0.0) {
        return invalid(format!("ball radius must be positive, got {r0}"));
    }
    let c = unit_ball_perimeter(k.dim(), k.s())?;
    Ok(c / ball_volume(k.dim()) * r0.powf(-k.s()))
}

/// Largest `Λ*` such that every layer of `f` has `∅` as its unique solution
/// for all `Λ < Λ*`, so that `0` is then the unique solution. `+∞` for `f = 0`.
pub fn low_fidelity_certificate(f: &ScalarField, k: &Kernel, tol: f64) -> Result<f64> {
    f.domain().check_same(k.domain())?;
    let d = *f.domain();
    let vol = d.cell_volume();
    let t = crate::energy::thresholds(&[f.values()]);
    let mut best = f64::INFINITY;
    let mut net = FlowNetwork::new(k, (0..d.len()).collect());
    for gap in t.windows(2) {
        let mask: Vec<bool> = f.values().iter().map(|&v| v > gap[0]).collect();
        let datum = PixelSet::from_mask(d, mask, 0.0 > gap[0])?;
        let bounded = if datum.background() { datum.complement() } else { datum };
        if bounded.is_empty_set() {
            continue;
        }
        let weights: Vec<f64> =
            bounded.mask().iter().map(|&b| if b { vol } else { -vol }).collect();
        let r = dinkelbach(&mut net, &weights, bounded.mask().to_vec(), tol)?;
        best = best.min(r.value);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Below,
    Near,
    Above,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrichotomyEntry {
    pub lambda: f64,
    pub regime: Regime,
    pub minimal_cells: usize,
    pub maximal_cells: usize,
    pub minimal_is_datum: bool,
    pub maximal_is_datum: bool,
    /// Every optimum lies inside the datum.
    pub contained: bool,
    /// The regime's prediction holds for this parameter.
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrichotomyReport {
    pub cheeger: CheegerResult,
    pub entries: Vec<TrichotomyEntry>,
}

impl TrichotomyReport {
    pub fn all_consistent(&self) -> bool {
        self.entries.iter().all(|e| e.consistent)
    }
}

/// Relative width of the band around `h_s` treated as the tie regime.
const NEAR_BAND: f64 = 1e-9;

pub fn trichotomy(e: &PixelSet, k: &Kernel, lambdas: &[f64]) -> Result<TrichotomyReport> {
    if !is_discrete_convex(e) {
        return Err(Error::NotConvex);
    }
    let ch = cheeger(e, k, 1e-12)?;
    let h = ch.constant;
    let mut p = build_cut_problem(e, h, k)?;
    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        p.set_lambda(lambda)?;
        let sol = solve_cut(&mut p);
        let regime = if lambda < h * (1.0 - NEAR_BAND) {
            Regime::Below
        } else if lambda > h * (1.0 + NEAR_BAND) {
            Regime::Above
        } else {
            Regime::Near
        };
        let minimal_is_datum = sol.minimal_set == *e;
        let maximal_is_datum = sol.maximal_set == *e;
        let contained = sol.maximal_set.is_subset_of(e);
        let expected = match regime {
            Regime::Below => sol.maximal_set.is_empty_set(),
            Regime::Above if ch.calibrable => minimal_is_datum && maximal_is_datum,
            Regime::Above => !sol.minimal_set.is_empty_set(),
            Regime::Near => sol.minimal_set.is_subset_of(&sol.maximal_set),
        };
        entries.push(TrichotomyEntry {
            lambda,
            regime,
            minimal_cells: sol.minimal_set.count(),
            maximal_cells: sol.maximal_set.count(),
            minimal_is_datum,
            maximal_is_datum,
            contained,
            consistent: expected && contained,
        });
    }
    Ok(TrichotomyReport { cheeger: ch, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::geometric_energy;
    use crate::shapes::{interval, rectangle};

    #[test]
    fn binary_datum_is_one_layer() {
        let d = GridDomain::plane(5, 4, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = rectangle(d, 1, 3, 1, 2);
        let f = ScalarField::indicator(&e, 1.0).unwrap();
        let sol = solve_functional(&f, 2.0, &k, 64, Variant::Minimal).unwrap();
        assert_eq!(sol.levels.len(), 1);
        let cut = crate::mincut::solve_geometric(&e, 2.0, &k).unwrap();
        assert_eq!(sol.levels[0].set, cut.minimal_set);
        let r = &sol.report;
        assert!((r.energy.total - r.layered_energy).abs() < 1e-9 * (1.0 + r.layered_energy));
    }

    #[test]
    fn quantization_limits_levels() {
        let d = GridDomain::line(10, 1.0).unwrap();
        let f = ScalarField::new(d, (0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        let (q, distinct, changed) = quantize(&f, 4).unwrap();
        assert_eq!(distinct, 10);
        assert!(changed);
        assert!(super::distinct(q.values()).len() <= 4);
        let (same, _, changed) = quantize(&f, 10).unwrap();
        assert!(!changed);
        assert_eq!(same, f);
    }

    #[test]
    fn variant_round_trips_through_text() {
        for v in [Variant::Minimal, Variant::Maximal] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("middle".parse::<Variant>().is_err());
    }

    #[test]
    fn single_cell_cheeger_constant() {
        let d = GridDomain::plane(3, 3, 0.5).unwrap();
        let k = Kernel::for_domain(&d, 0.4).unwrap();
        let e = rectangle(d, 1, 1, 1, 1);
        let ch = cheeger(&e, &k, 1e-12).unwrap();
        let expect = frac_perimeter(&e, &k).unwrap() / d.cell_volume();
        assert!((ch.constant - expect).abs() < 1e-12 * expect);
        assert!(ch.calibrable);
        assert!(cheeger(&PixelSet::empty(d), &k, 1e-9).is_err());
    }

    #[test]
    fn cheeger_matches_subset_enumeration_on_a_line() {
        let d = GridDomain::line(10, 0.1).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = PixelSet::from_fn(d, |i, _| i != 4 && i != 8);
        let ch = cheeger(&e, &k, 1e-12).unwrap();
        let cells: Vec<usize> = e.cells().collect();
        let mut best = f64::INFINITY;
        for m in 1u32..1 << cells.len() {
            let mut u = PixelSet::empty(d);
            for (b, &c) in cells.iter().enumerate() {
                if m >> b & 1 == 1 {
                    u.set(c, true);
                }
            }
            best = best.min(frac_perimeter(&u, &k).unwrap() / u.measure());
        }
        assert!((ch.constant - best).abs() <= 1e-9 * best, "{} vs {}", ch.constant, best);
        assert!(ch.cheeger_set.is_subset_of(&e));
    }

    #[test]
    fn threshold_follows_power_law() {
        let d = GridDomain::line(8, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = interval(d, 2, 5);
        let a = high_fidelity_threshold(&e, &k, 1.0).unwrap();
        let b = high_fidelity_threshold(&e, &k, 2.0).unwrap();
        assert!((b / a - 2f64.powf(-0.5)).abs() < 1e-12);
        assert!(high_fidelity_threshold(&e, &k, 0.0).is_err());
    }

    #[test]
    fn certificate_of_zero_is_infinite() {
        let d = GridDomain::line(6, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let c = low_fidelity_certificate(&ScalarField::zeros(d), &k, 1e-12).unwrap();
        assert!(c.is_infinite());
    }

    #[test]
    fn certificate_separates_trivial_solutions() {
        let d = GridDomain::plane(6, 5, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let f = ScalarField::new(d, (0..30).map(|i| ((i * 7) % 5) as f64 - 2.0).collect()).unwrap();
        let lam = low_fidelity_certificate(&f, &k, 1e-12).unwrap();
        assert!(lam.is_finite() && lam > 0.0);
        for v in [Variant::Minimal, Variant::Maximal] {
            let below = solve_functional(&f, 0.9 * lam, &k, 64, v).unwrap();
            assert!(below.u.values().iter().all(|&x| x == 0.0));
        }
        let above = solve_functional(&f, 1.1 * lam, &k, 64, Variant::Maximal).unwrap();
        assert!(above.u.values().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn identities_hold_on_a_staircase() {
        let d = GridDomain::line(9, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let f = ScalarField::new(d, vec![0., 1., 1., 3., 3., 3., -1., -1., 0.]).unwrap();
        for v in [Variant::Minimal, Variant::Maximal] {
            let sol = solve_functional(&f, 0.8, &k, 64, v).unwrap();
            for c in [0.0, 2.0, -1.5, 0.5] {
                let diag = truncation_checks(&sol, &f, c, &k).unwrap();
                assert!(diag.all_passed(), "{v} c={c}: {diag:?}");
            }
        }
    }

    #[test]
    fn trichotomy_on_a_square() {
        let d = GridDomain::plane(10, 10, 1.0).unwrap();
        let k = Kernel::for_domain(&d, 0.5).unwrap();
        let e = rectangle(d, 3, 6, 3, 6);
        let rep = trichotomy(&e, &k, &[0.5, 2.0]).unwrap();
        let h = rep.cheeger.constant;
        let rep = trichotomy(&e, &k, &[0.5 * h, 2.0 * h]).unwrap();
        assert!(rep.all_consistent(), "{rep:?}");
        assert_eq!(rep.entries[0].maximal_cells, 0);
        let g = geometric_energy(&e, &e, 2.0 * h, &k).unwrap();
        assert_eq!(g.fidelity, 0.0);
        let l = rectangle(d, 0, 5, 0, 1).union(&rectangle(d, 0, 1, 0, 5)).unwrap();
        assert!(matches!(trichotomy(&l, &k, &[1.0]), Err(Error::NotConvex)));
    }
}
