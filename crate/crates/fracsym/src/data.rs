//! Seeded data generators.

use fracsym_core::fractional_laplacian::poisson_kernel;
use fracsym_core::parabolic::SourceTerm;
use fracsym_core::{Grid64, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DataKind, ExperimentConfig, SourceKind};
use crate::error::Result;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Signed function with ties, zeros and tiny values on a random grid.
pub fn random_signed(rng: &mut ChaCha8Rng) -> Result<GridFunction<f64>> {
    let n = rng.random_range(8..400);
    let grid = Grid64::new(rng.random_range(0.5..20.0), n)?;
    random_signed_on(rng, grid)
}

/// Signed function with ties, zeros and tiny values on `grid`.
pub fn random_signed_on(rng: &mut ChaCha8Rng, grid: Grid64) -> Result<GridFunction<f64>> {
    let levels = [-1.0, 0.5, 1.0, 2.0];
    let values = (0..grid.n_cells())
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => levels[rng.random_range(0..levels.len())],
            2 => rng.random_range(0.0..1e-3),
            _ => rng.random_range(-3.0..3.0),
        })
        .collect();
    Ok(GridFunction::new(grid, values)?)
}

/// Nonnegative `g` and an averaged, rescaled `f` with `f ≺ g`.
pub fn random_ordered_pair(rng: &mut ChaCha8Rng) -> Result<(GridFunction<f64>, GridFunction<f64>)> {
    let n = rng.random_range(8..400);
    let grid = Grid64::new(rng.random_range(0.5..20.0), n)?;
    let g: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let theta = rng.random_range(0.0..=1.0);
    let scale = rng.random_range(0.5..=1.0);
    let f = (0..n).map(|i| scale * (theta * g[i] + (1.0 - theta) * g[perm[i]])).collect();
    Ok((GridFunction::new(grid, f)?, GridFunction::new(grid, g)?))
}

/// One to three bumps placed off centre in `|x| ≤ min(L/4, 10)`.
pub fn random_compact(rng: &mut ChaCha8Rng, grid: Grid64) -> Result<GridFunction<f64>> {
    let reach = (0.25 * grid.half_width()).min(10.0);
    let mut f = GridFunction::zeros(grid);
    for _ in 0..rng.random_range(1..=3) {
        let width = rng.random_range(0.1..0.5) * reach;
        let centre = rng.random_range(-(reach - width)..(reach - width));
        let height = rng.random_range(0.1..2.0);
        let bump = if rng.random_bool(0.5) {
            GridFunction::indicator(grid, centre - width, centre + width, height)?
        } else {
            GridFunction::from_fn(grid, |x| height * (1.0 - ((x - centre) / width).powi(2)).max(0.0))?
        };
        f = f.axpby(1.0, &bump, 1.0)?;
    }
    Ok(f)
}

/// Initial data or right-hand side selected by `data`.
pub fn initial_data(cfg: &ExperimentConfig, grid: Grid64) -> Result<GridFunction<f64>> {
    let w = 0.5 * cfg.width;
    Ok(match cfg.data {
        DataKind::Indicator => GridFunction::indicator(grid, -w, w, 1.0)?,
        DataKind::Poisson => poisson_kernel(1.0, grid)?,
        DataKind::TwoBump => {
            let bump = |c: f64, w: f64, a: f64| move |x: f64| a * (1.0 - ((x - c) / w).powi(2)).max(0.0);
            let (p, q) = (bump(3.0, 1.5, 1.0), bump(-4.0, 0.7, 2.0));
            GridFunction::from_fn(grid, |x| p(x) + q(x))?
        }
    })
}

pub fn source(cfg: &ExperimentConfig) -> SourceTerm<f64> {
    match cfg.source {
        SourceKind::None => SourceTerm::Zero,
        SourceKind::Moving => SourceTerm::field(|x: f64, t: f64| (-(x - 2.0 * t).powi(2)).exp()),
    }
}
