//! Flat `key = value` experiment configuration.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use fracsym_core::Method;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Rearrange,
    ApplyOp,
    SolveElliptic,
    EllipticSymmetrize,
    EllipticCounterexample,
    Evolve,
    ParabolicSymmetrize,
    FpmeCounterexample,
    Barenblatt,
    OracleCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Rearrange,
        Experiment::ApplyOp,
        Experiment::SolveElliptic,
        Experiment::EllipticSymmetrize,
        Experiment::EllipticCounterexample,
        Experiment::Evolve,
        Experiment::ParabolicSymmetrize,
        Experiment::FpmeCounterexample,
        Experiment::Barenblatt,
        Experiment::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Rearrange => "rearrange",
            Experiment::ApplyOp => "apply-op",
            Experiment::SolveElliptic => "solve-elliptic",
            Experiment::EllipticSymmetrize => "elliptic-symmetrize",
            Experiment::EllipticCounterexample => "elliptic-counterexample",
            Experiment::Evolve => "evolve",
            Experiment::ParabolicSymmetrize => "parabolic-symmetrize",
            Experiment::FpmeCounterexample => "fpme-counterexample",
            Experiment::Barenblatt => "barenblatt",
            Experiment::OracleCheck => "oracle-check",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::UnknownExperiment { name: s.to_string(), valid: Self::valid_names() })
    }
}

/// Initial data shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// `χ(-w/2, w/2)`, cell averaged.
    Indicator,
    /// Poisson kernel `P₁`.
    Poisson,
    /// Off-centre sum of two parabolic bumps.
    TwoBump,
}

impl DataKind {
    fn name(self) -> &'static str {
        match self {
            DataKind::Indicator => "indicator",
            DataKind::Poisson => "poisson",
            DataKind::TwoBump => "two-bump",
        }
    }
}

impl FromStr for DataKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "indicator" => Ok(DataKind::Indicator),
            "poisson" => Ok(DataKind::Poisson),
            "two-bump" => Ok(DataKind::TwoBump),
            _ => Err("expected indicator, poisson or two-bump".into()),
        }
    }
}

/// Right-hand side of the evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    None,
    /// `exp(-(x - 2t)²)`, a travelling nonnegative pulse.
    Moving,
}

impl SourceKind {
    fn name(self) -> &'static str {
        match self {
            SourceKind::None => "none",
            SourceKind::Moving => "moving",
        }
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(SourceKind::None),
            "moving" => Ok(SourceKind::Moving),
            _ => Err("expected none or moving".into()),
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::SingularIntegralTruncated => "singular",
        Method::SpectralPeriodic => "spectral",
    }
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub sigma: f64,
    pub m: f64,
    /// Key `L`.
    pub half_width: f64,
    /// Key `n`.
    pub n_cells: usize,
    /// Key `T`.
    pub final_time: f64,
    pub n_steps: usize,
    pub snapshot_every: usize,
    /// Key `R`.
    pub radius: f64,
    pub h: f64,
    pub newton_tol: f64,
    /// Concentration tolerance relative to mass.
    pub tol: f64,
    pub seed: u64,
    pub cases: usize,
    pub pairs: usize,
    pub method: Method,
    pub data: DataKind,
    /// Support width of indicator data.
    pub width: f64,
    pub source: SourceKind,
    /// Exponents of the Getoor constancy check.
    pub sigmas: Vec<f64>,
    pub plot_times: Vec<f64>,
    /// Tail prefactors are compared at `tail_t` and `2 tail_t`.
    pub tail_t: f64,
    pub t_min: f64,
    pub fit_tol: f64,
    /// Cells of the dense reference solve.
    pub direct_n: usize,
}

/// Keys accepted in config files and overrides.
pub const KEYS: [&str; 25] = [
    "experiment",
    "sigma",
    "m",
    "L",
    "n",
    "T",
    "n_steps",
    "snapshot_every",
    "R",
    "h",
    "newton_tol",
    "tol",
    "seed",
    "cases",
    "pairs",
    "method",
    "data",
    "width",
    "source",
    "sigmas",
    "plot_times",
    "tail_t",
    "t_min",
    "fit_tol",
    "direct_n",
];

impl ExperimentConfig {
    /// Defaults of the named experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            sigma: 1.0,
            m: 2.0,
            half_width: 100.0,
            n_cells: 4096,
            final_time: 1.0,
            n_steps: 400,
            snapshot_every: 50,
            radius: 4.0,
            h: 0.01,
            newton_tol: 1e-10,
            tol: 1e-6,
            seed: 1,
            cases: 20,
            pairs: 0,
            method: Method::SingularIntegralTruncated,
            data: DataKind::Indicator,
            width: 2.0,
            source: SourceKind::None,
            sigmas: vec![0.5, 1.0, 1.5],
            plot_times: vec![0.25, 0.5, 0.75, 1.0],
            tail_t: 0.05,
            t_min: 5.0,
            fit_tol: 0.1,
            direct_n: 512,
        };
        match experiment {
            Experiment::Rearrange => {
                c.half_width = 10.0;
                c.n_cells = 256;
                c.cases = 500;
                c.pairs = 1000;
            }
            Experiment::ApplyOp => {
                c.half_width = 40.0;
                c.data = DataKind::Poisson;
            }
            Experiment::SolveElliptic => {
                c.half_width = 40.0;
                c.cases = 200;
            }
            Experiment::EllipticSymmetrize => {
                c.half_width = 40.0;
                c.n_cells = 2048;
                c.m = 1.0;
                c.h = 0.1;
                c.data = DataKind::TwoBump;
            }
            Experiment::EllipticCounterexample => {
                c.half_width = 200.0;
                c.h = 1e-3;
            }
            Experiment::Evolve => {
                c.half_width = 200.0;
                c.n_cells = 8192;
                c.m = 1.0;
                c.n_steps = 200;
                c.data = DataKind::Poisson;
            }
            Experiment::ParabolicSymmetrize => {
                c.half_width = 30.0;
                c.n_cells = 1024;
                c.m = 0.5;
                c.n_steps = 50;
                c.snapshot_every = 10;
                c.data = DataKind::TwoBump;
            }
            Experiment::FpmeCounterexample => {}
            Experiment::Barenblatt => {
                c.half_width = 400.0;
                c.n_cells = 8192;
                c.final_time = 50.0;
                c.n_steps = 500;
                c.width = 1.0;
            }
            Experiment::OracleCheck => {
                c.half_width = 40.0;
                c.data = DataKind::Poisson;
            }
        }
        c
    }

    /// Defaults, then the file, then the overrides, then validation.
    pub fn resolve(experiment: Experiment, file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = Self::defaults(experiment);
        if let Some(text) = file {
            for (key, value) in parse_text(text)? {
                c.set(&key, &value)?;
            }
        }
        for (key, value) in overrides {
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |reason: String| CliError::InvalidValue { key: key.to_string(), value: value.to_string(), reason };
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.trim().parse::<T>().map_err(|e| e.to_string())
        }
        fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
            v.split(',').map(num::<f64>).collect()
        }
        match key {
            "experiment" => {
                let e: Experiment = value.trim().parse()?;
                if e != self.experiment {
                    return Err(bad(format!("config is for `{e}`, running `{}`", self.experiment)));
                }
            }
            "sigma" => self.sigma = num(value).map_err(bad)?,
            "m" => self.m = num(value).map_err(bad)?,
            "L" => self.half_width = num(value).map_err(bad)?,
            "n" => self.n_cells = num(value).map_err(bad)?,
            "T" => self.final_time = num(value).map_err(bad)?,
            "n_steps" => self.n_steps = num(value).map_err(bad)?,
            "snapshot_every" => self.snapshot_every = num(value).map_err(bad)?,
            "R" => self.radius = num(value).map_err(bad)?,
            "h" => self.h = num(value).map_err(bad)?,
            "newton_tol" => self.newton_tol = num(value).map_err(bad)?,
            "tol" => self.tol = num(value).map_err(bad)?,
            "seed" => self.seed = num(value).map_err(bad)?,
            "cases" => self.cases = num(value).map_err(bad)?,
            "pairs" => self.pairs = num(value).map_err(bad)?,
            "method" => {
                self.method = match value.trim() {
                    "singular" => Method::SingularIntegralTruncated,
                    "spectral" => Method::SpectralPeriodic,
                    _ => return Err(bad("expected singular or spectral".into())),
                }
            }
            "data" => self.data = value.trim().parse().map_err(bad)?,
            "width" => self.width = num(value).map_err(bad)?,
            "source" => self.source = value.trim().parse().map_err(bad)?,
            "sigmas" => self.sigmas = list(value).map_err(bad)?,
            "plot_times" => self.plot_times = list(value).map_err(bad)?,
            "tail_t" => self.tail_t = num(value).map_err(bad)?,
            "t_min" => self.t_min = num(value).map_err(bad)?,
            "fit_tol" => self.fit_tol = num(value).map_err(bad)?,
            "direct_n" => self.direct_n = num(value).map_err(bad)?,
            _ => return Err(CliError::UnknownKey { key: key.to_string(), valid: KEYS.join(", ") }),
        }
        Ok(())
    }

    /// Checks every parameter against the module preconditions.
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: &str| {
            Err(CliError::InvalidValue { key: key.to_string(), value: self.value_of(key), reason: reason.to_string() })
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(self.sigma > 0.0 && self.sigma < 2.0) {
            return fail("sigma", "must lie in (0, 2)");
        }
        if !positive(self.m) {
            return fail("m", "must be positive");
        }
        if !positive(self.half_width) {
            return fail("L", "must be positive");
        }
        if self.n_cells < 8 {
            return fail("n", "must be at least 8");
        }
        if !positive(self.final_time) {
            return fail("T", "must be positive");
        }
        if self.n_steps == 0 {
            return fail("n_steps", "must be at least 1");
        }
        if self.snapshot_every == 0 || self.snapshot_every > self.n_steps {
            return fail("snapshot_every", "must lie in [1, n_steps]");
        }
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return fail("R", "must be at least 1");
        }
        if !positive(self.h) {
            return fail("h", "must be positive");
        }
        if !positive(self.newton_tol) {
            return fail("newton_tol", "must be positive");
        }
        if !positive(self.tol) {
            return fail("tol", "must be positive");
        }
        if self.cases == 0 && (self.experiment != Experiment::Rearrange || self.pairs == 0) {
            return fail("cases", "must be at least 1");
        }
        if !positive(self.width) || self.width >= 2.0 * self.half_width {
            return fail("width", "must be positive and fit inside the grid");
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0 && *s < 2.0)) {
            return fail("sigmas", "must be a non-empty list in (0, 2)");
        }
        let timed = matches!(
            self.experiment,
            Experiment::Evolve | Experiment::ParabolicSymmetrize | Experiment::FpmeCounterexample
        );
        if timed && self.plot_times.iter().any(|t| !(*t > 0.0 && *t <= self.final_time)) {
            return fail("plot_times", "must lie in (0, T]");
        }
        if self.experiment == Experiment::FpmeCounterexample && !(self.tail_t > 0.0 && 2.0 * self.tail_t <= self.final_time) {
            return fail("tail_t", "needs 0 < tail_t and 2 tail_t <= T");
        }
        if self.experiment == Experiment::Barenblatt && !(self.t_min > 0.0 && self.t_min < self.final_time) {
            return fail("t_min", "must lie in (0, T)");
        }
        if !positive(self.fit_tol) {
            return fail("fit_tol", "must be positive");
        }
        if self.direct_n < 8 {
            return fail("direct_n", "must be at least 8");
        }
        if self.experiment == Experiment::FpmeCounterexample && self.half_width <= 8.0 {
            return fail("L", "must exceed 8 to hold the wide data");
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        self.echo()
            .lines()
            .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
            .unwrap_or_default()
    }

    /// Lossless `key = value` rendering; parsing it reproduces `self`.
    pub fn echo(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("experiment", self.experiment.name().into());
        line("sigma", self.sigma.to_string());
        line("m", self.m.to_string());
        line("L", self.half_width.to_string());
        line("n", self.n_cells.to_string());
        line("T", self.final_time.to_string());
        line("n_steps", self.n_steps.to_string());
        line("snapshot_every", self.snapshot_every.to_string());
        line("R", self.radius.to_string());
        line("h", self.h.to_string());
        line("newton_tol", self.newton_tol.to_string());
        line("tol", self.tol.to_string());
        line("seed", self.seed.to_string());
        line("cases", self.cases.to_string());
        line("pairs", self.pairs.to_string());
        line("method", method_name(self.method).into());
        line("data", self.data.name().into());
        line("width", self.width.to_string());
        line("source", self.source.name().into());
        line("sigmas", join(&self.sigmas));
        line("plot_times", join(&self.plot_times));
        line("tail_t", self.tail_t.to_string());
        line("t_min", self.t_min.to_string());
        line("fit_tol", self.fit_tol.to_string());
        line("direct_n", self.direct_n.to_string());
        s
    }

    /// Step index of time `t` on this schedule.
    pub fn step_of(&self, t: f64) -> usize {
        ((t / self.final_time * self.n_steps as f64).round() as usize).min(self.n_steps)
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("line {}: expected `key = value`, got `{raw}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        for e in Experiment::ALL {
            let mut c = ExperimentConfig::defaults(e);
            c.h = 0.1 + 0.2;
            c.seed = u64::MAX;
            c.sigmas = vec![1.0 / 3.0, 1.7];
            let back = ExperimentConfig::resolve(e, Some(&c.echo()), &[]).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn overrides_win_over_file() {
        let file = "# comment\nm = 3\nsigma = 0.5  # trailing\n";
        let c = ExperimentConfig::resolve(Experiment::Evolve, Some(file), &[("m".into(), "1.5".into())]).unwrap();
        assert_eq!((c.m, c.sigma), (1.5, 0.5));
    }

    #[test]
    fn errors_name_the_key() {
        let err = ExperimentConfig::resolve(Experiment::Evolve, None, &[("sigma".into(), "2".into())]).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
        let err = ExperimentConfig::resolve(Experiment::Evolve, None, &[("bogus".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = ExperimentConfig::resolve(Experiment::Evolve, None, &[("n".into(), "x".into())]).unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
        let err = ExperimentConfig::resolve(Experiment::Evolve, Some("experiment = barenblatt"), &[]).unwrap_err();
        assert!(err.to_string().contains("experiment"), "{err}");
        assert!(parse_text("no equals sign").is_err());
    }

    #[test]
    fn unknown_experiment_lists_names() {
        let err = "nope".parse::<Experiment>().unwrap_err().to_string();
        for e in Experiment::ALL {
            assert!(err.contains(e.name()));
        }
    }

    #[test]
    fn step_lookup() {
        let c = ExperimentConfig::defaults(Experiment::FpmeCounterexample);
        assert_eq!(c.step_of(0.05), 20);
        assert_eq!(c.step_of(1.0), 400);
    }
}
