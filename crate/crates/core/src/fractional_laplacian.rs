//! Discrete realizations of `(-Δ)^{σ/2}`, `0 < σ < 2`, on a uniform line grid.
//!
//! Two backends:
//!
//! * [`Method::SpectralPeriodic`] multiplies by `|ξ|^σ` in the discrete Fourier
//!   basis of the period-`2L` torus.
//! * [`Method::SingularIntegralTruncated`] discretizes
//!   `c_{1,σ} PV∫ (u(x) - u(y)) |x - y|^{-1-σ} dy` with `u = 0` outside
//!   `(-L, L)`. Cell `j ≠ i` contributes the exact cell integral of the kernel,
//!   the exterior contributes `u_i e_i` in closed form, and the singular cell is
//!   closed with a second-difference correction that makes the scheme exact on
//!   quadratics. On a uniform grid the resulting matrix is symmetric Toeplitz,
//!   so it is stored by its first row and applied through a circulant
//!   embedding of twice the size.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt17, Grid1D, GridFunction};
use crate::quadrature::{tanh_sinh, GaussLegendre};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    SpectralPeriodic,
    SingularIntegralTruncated,
}

/// What the truncated operator assumes about `u` for `|x| > L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exterior {
    ZeroOutside,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorSpec<T: Real = f64> {
    sigma: T,
    method: Method,
    grid: Grid1D<T>,
}

impl<T: Real> OperatorSpec<T> {
    pub fn new(sigma: T, method: Method, grid: Grid1D<T>) -> Result<Self> {
        check_sigma(sigma.as_f64())?;
        Ok(Self { sigma, method, grid })
    }

    pub fn singular_integral(sigma: T, grid: Grid1D<T>) -> Result<Self> {
        Self::new(sigma, Method::SingularIntegralTruncated, grid)
    }

    pub fn spectral(sigma: T, grid: Grid1D<T>) -> Result<Self> {
        Self::new(sigma, Method::SpectralPeriodic, grid)
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn exterior(&self) -> Exterior {
        Exterior::ZeroOutside
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 2.0 {
        Ok(())
    } else {
        Err(Error::param("sigma", format!("must lie in (0, 2), got {sigma}")))
    }
}

/// `c_{1,σ} = 2^σ Γ((1+σ)/2) / (√π |Γ(-σ/2)|)`, the constant of the pointwise
/// kernel `c / |x - y|^{1+σ}` in one dimension.
pub fn normalization_constant(sigma: f64) -> Result<f64> {
    use statrs::function::gamma::gamma;
    check_sigma(sigma)?;
    Ok(2f64.powf(sigma) * gamma((1.0 + sigma) / 2.0)
        / (std::f64::consts::PI.sqrt() * gamma(-sigma / 2.0).abs()))
}

/// `ω_k = ∫_{k-1/2}^{k+1/2} y^{-1-σ} dy`, the kernel mass of a cell `k`
/// cells away, in units of `Δx^{-σ}`.
fn cell_weight(k: usize, sigma: f64) -> f64 {
    let a = k as f64 - 0.5;
    // a^{-σ} - (a+1)^{-σ} without cancellation
    -a.powf(-sigma) * (-sigma * (1.0 / a).ln_1p()).exp_m1() / sigma
}

/// Coefficient `κ(σ)` of the singular-cell correction.
///
/// For `u(y) = y²/2` about `x_i` (so `u'' = 1`) the cell-constant scheme with
/// exact cell weights misses
/// `κ Δx^{2-σ} = ∫_{|y|<Δx/2} u |y|^{-1-σ} + Σ_{j≠0} ∫_{cell j} (u - u_j) |y|^{-1-σ}`,
/// which is subtracted as `κ Δx^{2-σ} u''_i` with a centred second difference.
/// The sum over cells converges like `k^{-1-σ}`; it is evaluated exactly to
/// `K` cells and the remainder is taken from its leading asymptotic term.
pub fn singular_cell_coefficient(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    const K: usize = 4096;
    let rule = GaussLegendre::new(16);
    let mut far = 0.0;
    for k in (1..=K).rev() {
        let kf = k as f64;
        far += rule.integrate(-0.5, 0.5, |z| (kf * z + 0.5 * z * z) * (kf + z).powf(-1.0 - sigma));
    }
    // a_k ~ -(1 + 2σ)/24 k^{-1-σ};  Σ_{k>K} k^{-1-σ} ≈ (K + 1/2)^{-σ}/σ
    let tail = -(1.0 + 2.0 * sigma) / 24.0 * (K as f64 + 0.5).powf(-sigma) / sigma;
    let own = 0.5f64.powf(2.0 - sigma) / (2.0 - sigma);
    Ok(own + 2.0 * (far + tail))
}

enum Kernel<T: Real> {
    Spectral {
        multipliers: Vec<T>,
    },
    Toeplitz {
        diagonal: T,
        /// `off[k]` for `k ≥ 1` is minus the entry `k` places off the diagonal.
        off: Vec<T>,
        exterior: Vec<T>,
    },
}

/// Assembled operator; immutable and shareable across threads.
pub struct DiscreteOperator<T: Real = f64> {
    spec: OperatorSpec<T>,
    kernel: Kernel<T>,
    constant: f64,
    symbol: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for DiscreteOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("spec", &self.spec)
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

pub fn assemble<T: Real>(spec: OperatorSpec<T>) -> Result<DiscreteOperator<T>> {
    DiscreteOperator::assemble(spec)
}

impl<T: Real> DiscreteOperator<T> {
    pub fn assemble(spec: OperatorSpec<T>) -> Result<Self> {
        let n = spec.grid.n_cells();
        if n < 8 {
            return Err(Error::param("n_cells", format!("operator needs at least 8 cells, got {n}")));
        }
        let sigma = spec.sigma.as_f64();
        let constant = normalization_constant(sigma)?;
        let dx = spec.grid.spacing().as_f64();
        let half = spec.grid.half_width().as_f64();
        let mut planner = FftPlanner::<T>::new();
        match spec.method {
            Method::SpectralPeriodic => {
                let period = 2.0 * half;
                let multipliers: Vec<T> = (0..n)
                    .map(|j| {
                        let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                        T::lit((2.0 * std::f64::consts::PI * k / period).abs().powf(sigma))
                    })
                    .collect();
                Ok(Self {
                    spec,
                    symbol: multipliers.clone(),
                    kernel: Kernel::Spectral { multipliers },
                    constant,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            }
            Method::SingularIntegralTruncated => {
                // For very small σ the correction would flip the sign of the
                // nearest off-diagonal entry; cap it there to keep an M-matrix.
                let kappa = singular_cell_coefficient(sigma)?.max(-cell_weight(1, sigma));
                let scale = constant * dx.powf(-sigma);
                let mut off = vec![0.0; n];
                for (k, o) in off.iter_mut().enumerate().skip(1) {
                    *o = scale * cell_weight(k, sigma);
                }
                off[1] += scale * kappa;
                let diagonal = scale * (2f64.powf(1.0 + sigma) / sigma + 2.0 * kappa);
                let exterior: Vec<T> = (0..n)
                    .map(|i| {
                        let x = spec.grid.node(i).as_f64();
                        T::lit(constant / sigma * ((half - x).powf(-sigma) + (half + x).powf(-sigma)))
                    })
                    .collect();
                // circulant embedding of size 2n: [t_0, t_1..t_{n-1}, 0, t_{n-1}..t_1]
                let m = 2 * n;
                let mut col = vec![Complex::new(T::zero(), T::zero()); m];
                col[0].re = T::lit(diagonal);
                for k in 1..n {
                    col[k].re = T::lit(-off[k]);
                    col[m - k].re = T::lit(-off[k]);
                }
                let forward = planner.plan_fft_forward(m);
                forward.process(&mut col);
                let symbol = col.iter().map(|c| c.re).collect();
                Ok(Self {
                    spec,
                    kernel: Kernel::Toeplitz {
                        diagonal: T::lit(diagonal),
                        off: off.into_iter().map(T::lit).collect(),
                        exterior,
                    },
                    constant,
                    symbol,
                    forward,
                    inverse: planner.plan_fft_inverse(m),
                })
            }
        }
    }

    pub fn spec(&self) -> &OperatorSpec<T> {
        &self.spec
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.spec.grid
    }

    pub fn sigma(&self) -> T {
        self.spec.sigma
    }

    pub fn n(&self) -> usize {
        self.spec.grid.n_cells()
    }

    /// `c_{1,σ}` used during assembly.
    pub fn normalization(&self) -> f64 {
        self.constant
    }

    /// Fourier multipliers `|ξ_j|^σ` (spectral backend only).
    pub fn multipliers(&self) -> Option<&[T]> {
        match &self.kernel {
            Kernel::Spectral { multipliers } => Some(multipliers),
            Kernel::Toeplitz { .. } => None,
        }
    }

    /// Closed-form exterior terms `e_i = c σ^{-1}[(L - x_i)^{-σ} + (L + x_i)^{-σ}]`;
    /// zero for the periodic backend.
    pub fn exterior_correction(&self) -> Vec<T> {
        match &self.kernel {
            Kernel::Spectral { .. } => vec![T::zero(); self.n()],
            Kernel::Toeplitz { exterior, .. } => exterior.clone(),
        }
    }

    /// Matrix diagonal, used for Jacobi preconditioning.
    pub fn diagonal(&self) -> Vec<T> {
        match &self.kernel {
            Kernel::Spectral { multipliers } => {
                let mean = multipliers.iter().copied().sum::<T>() / T::from_count(self.n());
                vec![mean; self.n()]
            }
            Kernel::Toeplitz { diagonal, .. } => vec![*diagonal; self.n()],
        }
    }

    /// Row sums, i.e. the operator applied to the indicator of the grid.
    pub fn row_sums(&self) -> Vec<T> {
        match &self.kernel {
            Kernel::Spectral { .. } => vec![T::zero(); self.n()],
            Kernel::Toeplitz { diagonal, off, .. } => {
                let n = self.n();
                let mut prefix = vec![T::zero(); n];
                for k in 1..n {
                    prefix[k] = prefix[k - 1] + off[k];
                }
                (0..n).map(|i| *diagonal - prefix[i] - prefix[n - 1 - i]).collect()
            }
        }
    }

    pub fn apply(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.grid().check_same(f.grid(), "apply")?;
        GridFunction::new(*self.grid(), self.apply_slice(f.values()))
    }

    /// Matrix-vector product on raw cell values.
    pub fn apply_slice(&self, x: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(x.len(), n, "vector length does not match the grid");
        let m = self.symbol.len();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
        for (b, v) in buf.iter_mut().zip(x) {
            b.re = *v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b = *b * *s;
        }
        self.inverse.process(&mut buf);
        let scale = T::from_count(m).recip();
        buf[..n].iter().map(|c| c.re * scale).collect()
    }

    /// Row-by-row product, `O(n²)`. Independent of the FFT path.
    pub fn apply_direct(&self, x: &[T]) -> Vec<T> {
        let n = self.n();
        match &self.kernel {
            Kernel::Toeplitz { diagonal, off, .. } => (0..n)
                .map(|i| {
                    let mut acc = *diagonal * x[i];
                    for (j, xj) in x.iter().enumerate() {
                        if j != i {
                            acc = acc - off[i.abs_diff(j)] * *xj;
                        }
                    }
                    acc
                })
                .collect(),
            Kernel::Spectral { .. } => {
                let a = self.dense_matrix();
                (0..n)
                    .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
                    .collect()
            }
        }
    }

    /// Row-major dense matrix, `n²` entries.
    pub fn dense_matrix(&self) -> Vec<T> {
        let n = self.n();
        match &self.kernel {
            Kernel::Toeplitz { diagonal, off, .. } => {
                let mut a = vec![T::zero(); n * n];
                for i in 0..n {
                    for j in 0..n {
                        a[i * n + j] = if i == j { *diagonal } else { -off[i.abs_diff(j)] };
                    }
                }
                a
            }
            Kernel::Spectral { multipliers } => {
                // circulant: a_{ij} = (1/n) Σ_k m_k cos(2π k (i-j)/n)
                let col: Vec<T> = (0..n)
                    .map(|d| {
                        let s: f64 = multipliers
                            .iter()
                            .enumerate()
                            .map(|(k, m)| {
                                m.as_f64() * (2.0 * std::f64::consts::PI * (k * d) as f64 / n as f64).cos()
                            })
                            .sum();
                        T::lit(s / n as f64)
                    })
                    .collect();
                let mut a = vec![T::zero(); n * n];
                for i in 0..n {
                    for j in 0..n {
                        a[i * n + j] = col[(i + n - j) % n];
                    }
                }
                a
            }
        }
    }

    /// Writes `x,row_sum,exterior` per cell.
    pub fn write_dump_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "row_sum", "exterior"])?;
        let (rows, ext) = (self.row_sums(), self.exterior_correction());
        for i in 0..self.n() {
            w.write_record([
                fmt17(self.grid().node(i).as_f64()),
                fmt17(rows[i].as_f64()),
                fmt17(ext[i].as_f64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `g(x) = ½ (1 - x²)_+^{σ/2}`, whose fractional Laplacian is constant on `|x| < 1`.
pub fn getoor_profile<T: Real>(sigma: T, grid: Grid1D<T>) -> Result<GridFunction<T>> {
    check_sigma(sigma.as_f64())?;
    if grid.half_width() < T::one() {
        return Err(Error::param("grid", "must cover (-1, 1)"));
    }
    GridFunction::from_fn(grid, |x| {
        let r = T::one() - x * x;
        if r > T::zero() {
            T::lit(0.5) * r.powf(sigma / T::lit(2.0))
        } else {
            T::zero()
        }
    })
}

/// Poisson kernel `P_t(x) = t / (π (t² + x²))`, the heat kernel of `(-Δ)^{1/2}`.
pub fn poisson_kernel<T: Real>(t: T, grid: Grid1D<T>) -> Result<GridFunction<T>> {
    if !(t > T::zero()) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    GridFunction::from_fn(grid, |x| t / (T::PI() * (t * t + x * x)))
}

/// `(-Δ)^{1/2} P_t = -∂_t P_t = (t² - x²) / (π (t² + x²)²)`.
pub fn poisson_kernel_half_laplacian<T: Real>(t: T, grid: Grid1D<T>) -> Result<GridFunction<T>> {
    if !(t > T::zero()) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    GridFunction::from_fn(grid, |x| {
        let q = t * t + x * x;
        (t * t - x * x) / (T::PI() * q * q)
    })
}

/// Value of `(-Δ)^{σ/2} g` at the origin for the Getoor profile, by
/// adaptive quadrature of the singular integral:
/// `c [ 2∫₀¹ (g(0) - g(y)) y^{-1-σ} dy + 2∫₁^∞ g(0) y^{-1-σ} dy ]`.
pub fn getoor_constant(sigma: f64) -> Result<f64> {
    let c = normalization_constant(sigma)?;
    // y = s^q removes the y^{1-σ} singularity at the origin
    let q = 1.0 / (2.0 - sigma);
    let inner = tanh_sinh(
        |s| {
            // y^{1-σ} dy = q ds, leaving q (g(0) - g(y)) / y²
            let y2 = s.powf(2.0 * q);
            if y2 < 1e-300 {
                return q * sigma / 4.0;
            }
            // ½ (1 - (1-y²)^{σ/2}) computed as -½ expm1(σ/2 · ln(1-y²))
            q * -0.5 * (0.5 * sigma * (-y2).ln_1p()).exp_m1() / y2
        },
        0.0,
        1.0,
        1e-13,
    );
    let outer = 0.5 / sigma;
    Ok(c * 2.0 * (inner + outer))
}
