//! Uniform cell-centred grids on a truncated line and the sampled functions
//! that live on them.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{sorted_sum, Real};

/// Cell-centred uniform grid on `(-half_width, half_width)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D<T: Real = f64> {
    half_width: T,
    n_cells: usize,
    spacing: T,
}

impl<T: Real> Grid1D<T> {
    pub fn new(half_width: T, n_cells: usize) -> Result<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::param("half_width", format!("must be positive and finite, got {half_width}")));
        }
        if n_cells < 2 {
            return Err(Error::param("n_cells", format!("need at least 2 cells, got {n_cells}")));
        }
        let spacing = (half_width + half_width) / T::from_count(n_cells);
        Ok(Self {
            half_width,
            n_cells,
            spacing,
        })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Centre of cell `i`.
    #[inline]
    pub fn node(&self, i: usize) -> T {
        -self.half_width + (T::from_count(i) + T::lit(0.5)) * self.spacing
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_cells).map(|i| self.node(i)).collect()
    }

    /// Index of the cell containing `x`, if it lies inside the grid.
    pub fn cell_of(&self, x: T) -> Option<usize> {
        let k = ((x + self.half_width) / self.spacing).floor();
        if k < T::zero() {
            return None;
        }
        let k = k.to_usize()?;
        (k < self.n_cells).then_some(k)
    }

    /// True when the grid is mirror symmetric with an even cell count, so that
    /// cells `i` and `n-1-i` share the same `|x|`.
    pub fn is_symmetric_even(&self) -> bool {
        self.n_cells.is_multiple_of(2)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.n_cells == other.n_cells && self.half_width == other.half_width
    }

    pub(crate) fn check_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: ({}, {}) vs ({}, {})",
                self.half_width, self.n_cells, other.half_width, other.n_cells
            )))
        }
    }
}

/// Exponent of an Lᵖ norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm<T: Real = f64> {
    L(T),
    Inf,
}

impl<T: Real> Norm<T> {
    pub fn from_exponent(p: T) -> Result<Self> {
        if p.is_infinite() && p > T::zero() {
            Ok(Norm::Inf)
        } else if p >= T::one() {
            Ok(Norm::L(p))
        } else {
            Err(Error::param("p", format!("norm exponent must be >= 1, got {p}")))
        }
    }
}

/// Real function sampled at the cell centres of a [`Grid1D`].
///
/// Values are finite by construction. The function is read as piecewise
/// constant on cells, which makes midpoint quadrature exact and turns every
/// rearrangement into a permutation of the cell values.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T: Real = f64> {
    grid: Grid1D<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Like `new`, and additionally rejects negative values.
    pub fn nonnegative(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        let f = Self::new(grid, values)?;
        if let Some(i) = f.values.iter().position(|v| *v < T::zero()) {
            return Err(Error::param(
                "data",
                format!("value {} at cell {i} is negative", f.values[i]),
            ));
        }
        Ok(f)
    }

    pub fn zeros(grid: Grid1D<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.n_cells()],
        }
    }

    pub fn from_fn(grid: Grid1D<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = (0..grid.n_cells()).map(|i| f(grid.node(i))).collect();
        Self::new(grid, values)
    }

    /// Cell averages of `height · χ(lo, hi)`, so the discrete mass is exactly
    /// `height · |(lo, hi) ∩ (-L, L)|`.
    pub fn indicator(grid: Grid1D<T>, lo: T, hi: T, height: T) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::param("interval", format!("empty interval ({lo}, {hi})")));
        }
        let dx = grid.spacing();
        let half = dx / T::lit(2.0);
        let values = (0..grid.n_cells())
            .map(|i| {
                let x = grid.node(i);
                let overlap = ((x + half).min(hi) - (x - half).max(lo)).max(T::zero());
                height * overlap / dx
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= T::zero())
    }

    /// Pointwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid, "zip_with")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid, values)
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| alpha * v).collect(),
        }
    }

    /// `alpha * self + beta * other`
    pub fn axpby(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        self.zip_with(other, |a, b| alpha * a + beta * b)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral `Σ f_i Δx`.
    pub fn integrate(&self) -> T {
        sorted_sum(self.values.iter().copied()) * self.grid.spacing()
    }

    pub fn lp_norm(&self, p: Norm<T>) -> T {
        lp_norm_of(self.values.iter().copied(), self.grid.spacing(), p)
    }

    /// Writes `x,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt17(self.grid.node(i).as_f64()), fmt17(v.as_f64())])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the format written by [`GridFunction::write_csv`] back onto `grid`.
    /// The `x` column must match the grid nodes.
    pub fn read_csv<R: Read>(grid: Grid1D<T>, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() != 2 || &header[0] != "x" || &header[1] != "value" {
            return Err(Error::param("csv", format!("expected header `x,value`, got {header:?}")));
        }
        let tol = grid.spacing().as_f64() * 1e-6;
        let mut values = Vec::with_capacity(grid.n_cells());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::param("csv", format!("row {i}: {e}")))
            };
            let x = parse(&rec[0])?;
            if i >= grid.n_cells() || (x - grid.node(i).as_f64()).abs() > tol {
                return Err(Error::GridMismatch(format!("row {i}: x = {x} is not a node of the grid")));
            }
            values.push(T::lit(parse(&rec[1])?));
        }
        Self::new(grid, values)
    }
}

/// Norm of a value sequence with cell measure `dx`, summed in ascending order.
pub(crate) fn lp_norm_of<T: Real>(values: impl Iterator<Item = T>, dx: T, p: Norm<T>) -> T {
    match p {
        Norm::Inf => values.fold(T::zero(), |m, v| m.max(v.abs())),
        Norm::L(p) if p == T::one() => sorted_sum(values.map(|v| v.abs())) * dx,
        Norm::L(p) if p == T::lit(2.0) => (sorted_sum(values.map(|v| v * v)) * dx).sqrt(),
        Norm::L(p) => (sorted_sum(values.map(|v| v.abs().powf(p))) * dx).powf(p.recip()),
    }
}

/// Decimal rendering with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
