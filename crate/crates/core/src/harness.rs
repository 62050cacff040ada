//! Convergence studies over a uniformly refined mesh series.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::solve_problem;
use crate::error::{Error, Result};
use crate::error_analysis::{
    error_h1w, error_l2, error_linf, error_superclose, ConvergenceReport, ErrorRecord, Sampling,
};
use crate::mesh::Mesh;
use crate::problems::{find_problem, ProblemSpec};
use crate::sparse_solver::{SolveReport, DEFAULT_TOL};
use crate::weak_gradient::WeakGradient;
use crate::weak_space::{WeakSpace, SUPPORTED_DEGREES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::Config(format!("unknown format '{s}' (expected csv or table)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub k: usize,
    /// Cells per side of the coarsest mesh.
    pub n: usize,
    pub levels: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub sampling: Sampling,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "table1".into(),
            k: 0,
            n: 4,
            levels: 5,
            tol: DEFAULT_TOL,
            max_iter: 20_000,
            format: OutputFormat::Table,
            out: None,
            threads: 0,
            sampling: Sampling::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Sets one field from its textual form, as used by config files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = value.to_string(),
            "k" => self.k = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "levels" => self.levels = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "format" => self.format = value.parse()?,
            "out" => self.out = Some(PathBuf::from(value)),
            "threads" => self.threads = parse(key, value)?,
            "sampling" => {
                self.sampling = Sampling::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown sampling '{value}'")))?
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<ProblemSpec> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.levels == 0 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if !SUPPORTED_DEGREES.contains(&self.k) {
            return Err(Error::Config(format!("k = {} is not supported (expected 0, 1 or 2)", self.k)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        let problem = find_problem(&self.problem)
            .ok_or_else(|| Error::Config(format!("unknown problem '{}'", self.problem)))?;
        if problem.exact.is_none() {
            return Err(Error::Config(format!("problem '{}' has no exact solution", self.problem)));
        }
        Ok(problem)
    }
}

/// Errors and solver statistics of one level.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub record: ErrorRecord,
    pub solve: SolveReport,
    pub unknowns: usize,
}

/// Solves `problem` on `mesh` and measures all four errors.
pub fn run_level(
    problem: &ProblemSpec,
    mesh: Arc<Mesh>,
    n: usize,
    k: usize,
    tol: f64,
    max_iter: usize,
    sampling: Sampling,
) -> Result<LevelResult> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config(format!("problem '{}' has no exact solution", problem.name)))?;
    let level = mesh.level;
    let width = problem.domain.x_max - problem.domain.x_min;
    let space = WeakSpace::new(mesh, k)?;
    let grads = WeakGradient::build(&space)?;
    let (uh, solve) = solve_problem(&space, &grads, &problem.coeffs, tol, max_iter)?;
    let u = |p: &nalgebra::Point2<f64>| (exact.u)(p);
    let record = ErrorRecord {
        level,
        n,
        h: width / n as f64,
        err_h1w: error_h1w(|p| (exact.grad)(p), &uh, &grads)?,
        err_l2: error_l2(u, &uh, sampling)?,
        err_linf: error_linf(u, &uh, sampling)?,
        err_superclose: error_superclose(u, &uh)?,
    };
    if !record.is_valid() {
        return Err(Error::NotConverged {
            method: solve.method.name(),
            iterations: solve.iterations,
            residual: f64::NAN,
        });
    }
    Ok(LevelResult {
        record,
        solve,
        unknowns: space.num_unknowns(),
    })
}

/// Runs every level of the study, refining the coarsest mesh uniformly.
pub fn run_convergence_detailed(config: &RunConfig) -> Result<(ConvergenceReport, Vec<LevelResult>)> {
    let problem = config.validate()?;
    let body = || -> Result<Vec<LevelResult>> {
        let mut mesh = Mesh::build_structured(config.n, problem.domain)?;
        let mut results = Vec::with_capacity(config.levels);
        for level in 0..config.levels {
            if level > 0 {
                mesh = mesh.refine_uniform()?;
            }
            let n = config.n << level;
            results.push(run_level(
                &problem,
                Arc::new(mesh.clone()),
                n,
                config.k,
                config.tol,
                config.max_iter,
                config.sampling,
            )?);
        }
        Ok(results)
    };
    let results = if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?
            .install(body)?
    } else {
        body()?
    };
    let report = ConvergenceReport::new(
        problem.name,
        config.k,
        config.sampling,
        results.iter().map(|r| r.record.clone()).collect(),
    );
    Ok((report, results))
}

pub fn run_convergence(config: &RunConfig) -> Result<ConvergenceReport> {
    run_convergence_detailed(config).map(|(report, _)| report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# study\nproblem = table2\nk=1\n\nlevels = 3 # short\nformat=csv\nsampling=quadrature\n")
            .unwrap();
        assert_eq!(c.problem, "table2");
        assert_eq!(c.k, 1);
        assert_eq!(c.levels, 3);
        assert_eq!(c.format, OutputFormat::Csv);
        assert_eq!(c.sampling, Sampling::Quadrature);
        assert_eq!(c.n, 4);
    }

    #[test]
    fn bad_config_is_rejected() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("levels"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("colour=red"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("k=two"), Err(Error::Config(_))));
        for bad in ["levels=0", "n=0", "k=3", "tol=0", "problem=nope"] {
            let mut c = RunConfig::default();
            c.apply_text(bad).unwrap();
            let err = c.validate().unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn poly_exact_single_level() {
        let config = RunConfig {
            problem: "poly-exact".into(),
            k: 1,
            n: 2,
            levels: 1,
            ..RunConfig::default()
        };
        let report = run_convergence(&config).unwrap();
        assert_eq!(report.records.len(), 1);
        assert!(report.records[0].errors().iter().all(|&e| e <= 1e-10));
    }

    #[test]
    fn table2_short_series_converges() {
        let config = RunConfig {
            problem: "table2".into(),
            levels: 3,
            threads: 2,
            ..RunConfig::default()
        };
        let (report, levels) = run_convergence_detailed(&config).unwrap();
        assert_eq!(levels.len(), 3);
        assert_eq!(report.records[2].n, 16);
        assert!((report.records[2].h - 1.0 / 16.0).abs() < 1e-15);
        let r = report.rates[1];
        assert!(r.h1w.unwrap() > 1.8 && r.l2.unwrap() > 1.8);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let base = RunConfig {
            problem: "table1".into(),
            levels: 2,
            threads: 1,
            ..RunConfig::default()
        };
        let a = run_convergence(&base).unwrap();
        let b = run_convergence(&RunConfig { threads: 3, ..base }).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
