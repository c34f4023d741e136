//! Discrete Schwarz symmetrization on equal-measure cells.
//!
//! Every cell of a [`Grid1D`] carries measure `Δx`, so the decreasing
//! rearrangement `f*` is a sorted copy of `|f|` and the spherical
//! rearrangement `f#` is a permutation of cell values. Cavalieri identities
//! (norms, distribution functions) then hold exactly in floating point.
//! Radial profiles in `ℝ^N` with unequal shell measures are handled by
//! [`RadialProfile`].

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt17, lp_norm_of, GridFunction, Norm};
use crate::scalar::{sorted_sum, Real};

/// Decreasing rearrangement `f*` as a step function on `[0, Σ widths)`.
///
/// Step `i` covers `[S_i, S_i + widths[i])` where `S_i` is the sum of the
/// preceding widths. Values are non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRearrangement<T: Real = f64> {
    widths: Vec<T>,
    values: Vec<T>,
    /// Prefix integrals `∫₀^{S_i} f*`, length `n + 1`.
    prefix: Vec<T>,
    /// Breakpoints `S_i`, length `n + 1`.
    breaks: Vec<T>,
}

impl<T: Real> StepRearrangement<T> {
    /// Sorts `|values|` descending; ties keep their input order.
    pub fn from_weighted(values: &[T], widths: &[T]) -> Result<Self> {
        if values.len() != widths.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cell measures",
                values.len(),
                widths.len()
            )));
        }
        if widths.iter().any(|w| !(*w > T::zero())) {
            return Err(Error::param("widths", "cell measures must be positive"));
        }
        let order = descending_order(values);
        let values: Vec<T> = order.iter().map(|&i| values[i].abs()).collect();
        let widths: Vec<T> = order.iter().map(|&i| widths[i]).collect();
        Ok(Self::from_sorted(values, widths))
    }

    fn from_sorted(values: Vec<T>, widths: Vec<T>) -> Self {
        let n = values.len();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut breaks = Vec::with_capacity(n + 1);
        prefix.push(T::zero());
        breaks.push(T::zero());
        // values are sorted descending, so the running sum adds terms of
        // decreasing magnitude; a compensated sum keeps the tail visible.
        let (mut acc, mut comp) = (T::zero(), T::zero());
        let mut s = T::zero();
        for (v, w) in values.iter().zip(&widths) {
            let y = *v * *w - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            s = s + *w;
            prefix.push(acc);
            breaks.push(s);
        }
        Self {
            widths,
            values,
            prefix,
            breaks,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    /// Breakpoints `0 = S_0 < S_1 < … < S_n`.
    pub fn breakpoints(&self) -> &[T] {
        &self.breaks
    }

    pub fn total_measure(&self) -> T {
        *self.breaks.last().unwrap_or(&T::zero())
    }

    /// Value of `f*(s)`; zero beyond the support.
    pub fn eval(&self, s: T) -> T {
        match self.step_index(s) {
            Some(i) => self.values[i],
            None => T::zero(),
        }
    }

    fn step_index(&self, s: T) -> Option<usize> {
        if s < T::zero() || s >= self.total_measure() {
            return None;
        }
        // first breakpoint strictly greater than s
        let k = self.breaks.partition_point(|b| *b <= s);
        Some(k - 1)
    }

    /// `∫₀ˢ f*(τ) dτ`, exact for the step function.
    pub fn cumulative(&self, s: T) -> T {
        if !(s > T::zero()) {
            return T::zero();
        }
        match self.step_index(s) {
            Some(i) => self.prefix[i] + self.values[i] * (s - self.breaks[i]),
            None => *self.prefix.last().unwrap(),
        }
    }

    /// Measure of `{f* > k}`.
    pub fn distribution(&self, level: T) -> T {
        let k = self.values.partition_point(|v| *v > level);
        self.breaks[k]
    }

    pub fn lp_norm(&self, p: Norm<T>) -> T {
        if self.widths.iter().all(|w| *w == self.widths[0]) && !self.widths.is_empty() {
            return lp_norm_of(self.values.iter().copied(), self.widths[0], p);
        }
        match p {
            Norm::Inf => self.values.first().copied().unwrap_or(T::zero()),
            Norm::L(p) => sorted_sum(self.values.iter().zip(&self.widths).map(|(v, w)| v.powf(p) * *w))
                .powf(p.recip()),
        }
    }
}

/// Indices sorting `|values|` descending, stable in the input index.
fn descending_order<T: Real>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap_or(Ordering::Equal)
    });
    order
}

/// Cells ordered by distance from the origin, ties broken by index.
///
/// Distances are compared exactly in half-cell units, `|2i + 1 - n|`.
fn radial_cell_order(n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ((2 * i + 1) as isize - n as isize).unsigned_abs());
    order
}

/// `μ_f(k) = |{ |f| > k }|`.
pub fn distribution_function<T: Real>(f: &GridFunction<T>, level: T) -> Result<T> {
    if level < T::zero() {
        return Err(Error::param("level", format!("must be >= 0, got {level}")));
    }
    let count = f.values().iter().filter(|v| v.abs() > level).count();
    Ok(T::from_count(count) * f.grid().spacing())
}

pub fn decreasing_rearrangement<T: Real>(f: &GridFunction<T>) -> StepRearrangement<T> {
    let widths = vec![f.grid().spacing(); f.len()];
    StepRearrangement::from_weighted(f.values(), &widths).expect("grid cells have positive measure")
}

/// `f#(x) = f*(ω_N |x|^N)` on the same grid.
///
/// Only `dimension == 1` is meaningful for a line grid: the sorted values are
/// dealt to cells in order of increasing `|x|` (left cell first within a
/// mirror pair), which is an exact permutation. Radial functions in higher
/// dimensions go through [`RadialProfile`].
pub fn spherical_rearrangement<T: Real>(f: &GridFunction<T>, dimension: usize) -> Result<GridFunction<T>> {
    if dimension != 1 {
        return Err(Error::param(
            "dimension",
            format!("a line grid carries N = 1 only (got {dimension}); use RadialProfile"),
        ));
    }
    let star = decreasing_rearrangement(f);
    let mut out = vec![T::zero(); f.len()];
    for (k, cell) in radial_cell_order(f.len()).into_iter().enumerate() {
        out[cell] = star.values[k];
    }
    GridFunction::new(*f.grid(), out)
}

/// True when `f` is nonnegative and coincides with its spherical rearrangement.
pub fn is_rearranged<T: Real>(f: &GridFunction<T>) -> bool {
    if !f.is_nonnegative() {
        return false;
    }
    let v = f.values();
    radial_cell_order(f.len())
        .windows(2)
        .all(|w| v[w[0]] >= v[w[1]])
}

/// Outcome of comparing mass concentrations, `f ≺ g` meaning `f` is less
/// concentrated than `g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Equal,
    FirstLess,
    FirstGreater,
    Incomparable,
}

impl Relation {
    /// `f ≺ g` holds (including equality).
    pub fn is_first_less_or_equal(self) -> bool {
        matches!(self, Relation::Equal | Relation::FirstLess)
    }
}

/// Result of [`compare_concentration`]; gaps refer to `∫₀ˢ (g* - f*)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport<T: Real = f64> {
    pub relation: Relation,
    pub max_gap: T,
    pub min_gap: T,
    #[serde(rename = "crossings")]
    pub crossing_points: Vec<T>,
    pub tolerance: T,
    /// Both arguments are symmetrized before comparison, also when the
    /// second one is not rearranged.
    pub symmetrized: bool,
}

impl<T: Real + Serialize> ConcentrationReport<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Default tolerance `1e-9 · max(‖f‖₁, ‖g‖₁)`.
pub fn default_tolerance<T: Real>(f: &StepRearrangement<T>, g: &StepRearrangement<T>) -> T {
    T::lit(1e-9) * f.cumulative(f.total_measure()).max(g.cumulative(g.total_measure()))
}

/// Compares `f ≺ g` for two functions on the same grid.
pub fn compare_concentration<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    tol: Option<T>,
) -> Result<ConcentrationReport<T>> {
    f.grid().check_same(g.grid(), "compare_concentration")?;
    Ok(compare_rearrangements(
        &decreasing_rearrangement(f),
        &decreasing_rearrangement(g),
        tol,
    ))
}

/// Samples `s ↦ ∫₀ˢ (g* - f*)` at the union of both breakpoint sets.
fn gap_curve<T: Real>(f: &StepRearrangement<T>, g: &StepRearrangement<T>) -> Vec<(T, T)> {
    let (a, b) = (f.breakpoints(), g.breakpoints());
    let mut s_all = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
                *x
            }
            (Some(x), Some(y)) if x < y => {
                i += 1;
                *x
            }
            (Some(x), None) => {
                i += 1;
                *x
            }
            (_, Some(y)) => {
                j += 1;
                *y
            }
            (None, None) => unreachable!(),
        };
        s_all.push(next);
    }
    s_all
        .into_iter()
        .map(|s| (s, g.cumulative(s) - f.cumulative(s)))
        .collect()
}

pub fn compare_rearrangements<T: Real>(
    f: &StepRearrangement<T>,
    g: &StepRearrangement<T>,
    tol: Option<T>,
) -> ConcentrationReport<T> {
    let tol = tol.unwrap_or_else(|| default_tolerance(f, g));
    let curve = gap_curve(f, g);
    let mut max_gap = T::zero();
    let mut min_gap = T::zero();
    let mut crossings = Vec::new();
    let mut state = 0i8;
    let mut last_zero = T::zero();
    let mut prev: Option<(T, T)> = None;
    for &(s, d) in &curve {
        max_gap = max_gap.max(d);
        min_gap = min_gap.min(d);
        if let Some((s0, d0)) = prev {
            if (d0 > T::zero()) != (d > T::zero()) && d0 != d {
                last_zero = s0 + (s - s0) * d0 / (d0 - d);
            }
        }
        let sign = if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            0
        };
        if sign != 0 {
            if state != 0 && sign != state {
                crossings.push(last_zero);
            }
            state = sign;
        }
        prev = Some((s, d));
    }
    let relation = if max_gap <= tol && min_gap >= -tol {
        Relation::Equal
    } else if min_gap >= -tol {
        Relation::FirstLess
    } else if max_gap <= tol {
        Relation::FirstGreater
    } else {
        Relation::Incomparable
    };
    ConcentrationReport {
        relation,
        max_gap,
        min_gap,
        crossing_points: crossings,
        tolerance: tol,
        symmetrized: true,
    }
}

/// `∫₀ˢ f*`.
pub fn cumulative_concentration<T: Real>(r: &StepRearrangement<T>, s: T) -> T {
    r.cumulative(s)
}

/// Writes `s,F_cum,G_cum` at every breakpoint of either rearrangement.
pub fn write_cumulative_csv<T: Real, W: Write>(
    f: &StepRearrangement<T>,
    g: &StepRearrangement<T>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["s", "F_cum", "G_cum"])?;
    for (s, _) in gap_curve(f, g) {
        w.write_record([
            fmt17(s.as_f64()),
            fmt17(f.cumulative(s).as_f64()),
            fmt17(g.cumulative(s).as_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Both sides of `∫|fg| ≤ ∫ f* g*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardyLittlewood<T: Real = f64> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

pub fn hardy_littlewood_check<T: Real>(f: &GridFunction<T>, g: &GridFunction<T>) -> Result<HardyLittlewood<T>> {
    f.grid().check_same(g.grid(), "hardy_littlewood_check")?;
    let dx = f.grid().spacing();
    let lhs = sorted_sum(f.values().iter().zip(g.values()).map(|(a, b)| (*a * *b).abs())) * dx;
    let (fs, gs) = (decreasing_rearrangement(f), decreasing_rearrangement(g));
    let rhs = sorted_sum(fs.values.iter().zip(&gs.values).map(|(a, b)| *a * *b)) * dx;
    Ok(HardyLittlewood {
        lhs,
        rhs,
        holds: lhs <= rhs + T::lit(1e-12) * rhs,
    })
}

/// Checks `∫Φ(f) ≤ ∫Φ(g)` for rearranged `f`, `g` and a convex nondecreasing
/// `Φ` with `Φ(0) = 0`. Returns the comparison outcome; errors when an input
/// is not rearranged or `Φ` fails the sampled shape test.
pub fn convex_order_check<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    phi: impl Fn(T) -> T,
) -> Result<bool> {
    f.grid().check_same(g.grid(), "convex_order_check")?;
    for (name, h) in [("f", f), ("g", g)] {
        if !is_rearranged(h) {
            return Err(Error::NotRearranged(format!("{name} is not radially non-increasing")));
        }
    }
    let top = f.max_abs().max(g.max_abs());
    check_convex_nondecreasing(&phi, top)?;
    let dx = f.grid().spacing();
    let lhs = sorted_sum(f.values().iter().map(|&v| phi(v))) * dx;
    let rhs = sorted_sum(g.values().iter().map(|&v| phi(v))) * dx;
    let tol = T::lit(1e-12) * lhs.abs().max(rhs.abs());
    Ok(lhs <= rhs + tol)
}

fn check_convex_nondecreasing<T: Real>(phi: &impl Fn(T) -> T, top: T) -> Result<()> {
    if phi(T::zero()) != T::zero() {
        return Err(Error::param("phi", "Φ(0) must be 0"));
    }
    if top <= T::zero() {
        return Ok(());
    }
    let n = 64;
    let samples: Vec<T> = (0..=n).map(|k| phi(top * T::from_count(k) / T::from_count(n))).collect();
    let slack = T::lit(1e-12) * samples.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for w in samples.windows(3) {
        if w[1] < w[0] - slack {
            return Err(Error::param("phi", "Φ is decreasing on the value range"));
        }
        if w[2] - w[1] < w[1] - w[0] - slack {
            return Err(Error::param("phi", "Φ is not convex on the value range"));
        }
    }
    Ok(())
}

/// Radial function on `ℝ^N` sampled on shells `r_i ≤ |x| < r_{i+1}`, with
/// `r_0 = 0`. Shell `i` has measure `ω_N (r_{i+1}^N - r_i^N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile<T: Real = f64> {
    dimension: usize,
    edges: Vec<T>,
    values: Vec<T>,
}

/// Volume of the unit ball in `ℝ^N`.
pub fn unit_ball_volume(dimension: usize) -> f64 {
    let n = dimension as f64;
    std::f64::consts::PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0 + 1.0)
}

impl<T: Real> RadialProfile<T> {
    pub fn new(dimension: usize, edges: Vec<T>, values: Vec<T>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension", "must be >= 1"));
        }
        if edges.len() != values.len() + 1 || edges.first() != Some(&T::zero()) {
            return Err(Error::param("edges", "need n+1 edges starting at 0"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("edges", "must be strictly increasing"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            dimension,
            edges,
            values,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    /// `ω_N r^N` for each edge.
    fn volumes(&self) -> Vec<T> {
        let w = T::lit(unit_ball_volume(self.dimension));
        let n = self.dimension as i32;
        self.edges.iter().map(|r| w * r.powi(n)).collect()
    }

    pub fn shell_measures(&self) -> Vec<T> {
        self.volumes().windows(2).map(|v| v[1] - v[0]).collect()
    }

    pub fn integrate(&self) -> T {
        sorted_sum(self.values.iter().zip(self.shell_measures()).map(|(v, m)| *v * m))
    }

    pub fn decreasing_rearrangement(&self) -> Result<StepRearrangement<T>> {
        StepRearrangement::from_weighted(&self.values, &self.shell_measures())
    }

    /// `f#` averaged over each shell's `s`-range. Exact (no averaging) when
    /// the profile is already non-increasing.
    pub fn spherical_rearrangement(&self) -> Result<Self> {
        let star = self.decreasing_rearrangement()?;
        let vol = self.volumes();
        let values = vol
            .windows(2)
            .map(|v| (star.cumulative(v[1]) - star.cumulative(v[0])) / (v[1] - v[0]))
            .collect();
        Self::new(self.dimension, self.edges.clone(), values)
    }
}
