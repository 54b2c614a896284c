use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use fractube::acceptance::{run_criterion, Check};
use fractube::crosssection::{
    asymptote_report, band_sweep, default_kappa_grid, eigen_table, laplacian_power, Discretization,
};
use fractube::csextension::{
    conormal_limit, energy_identity, extend_with, sample_profile, QuadratureConfig,
};
use fractube::report::{num, Table};
use fractube::waveguide::{bound_state_search, conjecture_probe, multitube_lowest};
use fractube::weyl::decay_fit;
use fractube::{FracOperator, SpectralParams};

use crate::config::{Experiment, RunConfig};
use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub criterion: Option<u8>,
    pub name: String,
    pub threshold: String,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub input_sha256: String,
    pub config: RunConfig,
    pub files: Vec<FileRecord>,
    pub checks: Vec<CheckRecord>,
    pub criteria: Vec<CriterionRecord>,
    pub summary: serde_json::Value,
    pub timings: Vec<Timing>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionRecord {
    pub id: u8,
    pub name: String,
    pub pass: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Session {
    out: PathBuf,
    files: Vec<FileRecord>,
    checks: Vec<CheckRecord>,
    criteria: Vec<CriterionRecord>,
    timings: Vec<Timing>,
    stage: String,
    started: Instant,
}

impl Session {
    fn stage(&mut self, name: impl Into<String>) {
        self.finish_stage();
        self.stage = name.into();
        self.started = Instant::now();
    }

    fn finish_stage(&mut self) {
        if !self.stage.is_empty() {
            self.timings.push(Timing {
                stage: std::mem::take(&mut self.stage),
                seconds: self.started.elapsed().as_secs_f64(),
            });
        }
    }

    fn fail(&self, e: fractube::Error) -> Failure {
        match e {
            fractube::Error::NotConverged { .. }
            | fractube::Error::Discretization(_)
            | fractube::Error::ZeroVector => Failure::Numerical {
                stage: self.stage.clone(),
                message: e.to_string(),
            },
            fractube::Error::Io(m) => Failure::Io(m),
            other => Failure::Config(other.to_string()),
        }
    }

    fn write(&mut self, name: &str, table: &Table) -> Result<(), Failure> {
        let path = self.out.join(name);
        let text = table.to_csv().map_err(|e| Failure::Io(e.to_string()))?;
        fs::write(&path, &text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileRecord {
            path: name.to_string(),
            rows: table.len(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(())
    }

    fn check(&mut self, criterion: Option<u8>, c: Check) {
        self.checks.push(CheckRecord {
            criterion,
            name: c.name,
            threshold: c.threshold,
            measured: c.measured,
            pass: c.pass,
        });
    }
}

fn summary<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

pub fn execute(cfg: &RunConfig, input: &[u8]) -> Result<Manifest, Failure> {
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let mut session = Session {
        out,
        files: Vec::new(),
        checks: Vec::new(),
        criteria: Vec::new(),
        timings: Vec::new(),
        stage: String::new(),
        started: Instant::now(),
    };
    let summary = run_experiment(cfg, &mut session)?;
    session.finish_stage();
    let pass = session.checks.iter().all(|c| c.pass);
    let manifest = Manifest {
        artifact: "fractube",
        version: env!("CARGO_PKG_VERSION"),
        input_sha256: sha256_hex(input),
        config: cfg.clone(),
        files: session.files,
        checks: session.checks,
        criteria: session.criteria,
        summary,
        timings: session.timings,
        pass,
    };
    write_manifest(&cfg.output_dir, &manifest)?;
    Ok(manifest)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), Failure> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run_experiment(cfg: &RunConfig, session: &mut Session) -> Result<serde_json::Value, Failure> {
    match &cfg.experiment {
        Experiment::CrossSection(p) => {
            session.stage("cross-section: eigenvalue table");
            let params = SpectralParams::new(p.s, p.kappa).map_err(|e| session.fail(e))?;
            let disc = p.discretization.unwrap_or(Discretization::Fourier);
            let table = eigen_table(&p.setup(), params, p.k_max, disc, p.tol)
                .map_err(|e| session.fail(e))?;
            session.write("eigenvalues.csv", &table.to_table())?;
            if p.kappa == 0.0 {
                let margin = table
                    .values
                    .iter()
                    .flat_map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(k, v)| laplacian_power(k + 1, p.s, p.half_width) - v)
                    })
                    .fold(f64::INFINITY, f64::min);
                session.check(
                    None,
                    Check::above("min (k pi/(2a))^(2s) - lambda_k", margin, p.tol),
                );
            }
            if p.half_width == 1.0 && p.kappa == 0.0 {
                session.stage("cross-section: asymptote");
                let asym = asymptote_report(&table, 1, p.k_max).map_err(|e| session.fail(e))?;
                session.write("asymptote.csv", &asym.to_table())?;
            }
            Ok(summary(&table))
        }
        Experiment::Band(p) => {
            session.stage("band: threshold");
            let setup = p.setup();
            let params = SpectralParams::laplacian(p.s).map_err(|e| session.fail(e))?;
            let base = eigen_table(&setup, params, 1, Discretization::Fourier, p.tol)
                .map_err(|e| session.fail(e))?;
            let kappas = p
                .kappas
                .clone()
                .unwrap_or_else(|| default_kappa_grid(base.values[0][0], p.s));
            session.stage("band: sweep");
            let band =
                band_sweep(&setup, p.spacing, p.s, &kappas, p.tol).map_err(|e| session.fail(e))?;
            session.write("band.csv", &band.to_table())?;
            session.check(
                None,
                Check::holds("band strictly increasing", band.strictly_increasing()),
            );
            session.check(
                None,
                Check::above("min squeeze margin", band.squeeze_margin(), 0.0),
            );
            Ok(summary(&band))
        }
        Experiment::Weyl(p) => {
            session.stage("weyl: decay fit");
            let d = decay_fit(&p.config()).map_err(|e| session.fail(e))?;
            session.write("weyl.csv", &d.to_table())?;
            Ok(summary(&d))
        }
        Experiment::Extension(p) => {
            let q = p.quadrature();
            let mut configs: Vec<(&str, QuadratureConfig)> = vec![("reference", q)];
            if p.refine {
                configs.push(("refined", q.refined()));
            }
            let mut energy = Table::new(&[
                "config",
                "spacing",
                "levels",
                "y_max",
                "grading",
                "form",
                "scaled_energy",
                "relative_error",
                "tail_estimate",
            ]);
            let mut results = Vec::new();
            for (name, c) in &configs {
                session.stage(format!("extension: energy identity ({name})"));
                let u = sample_profile(&p.profile, p.s, c).map_err(|e| session.fail(e))?;
                let id = energy_identity(&u, p.s, c).map_err(|e| session.fail(e))?;
                energy.push(vec![
                    name.to_string(),
                    num(c.spacing),
                    c.levels.to_string(),
                    num(c.y_max),
                    num(id.grading),
                    num(id.form),
                    num(id.scaled_energy),
                    num(id.relative_error),
                    num(id.tail_estimate),
                ]);
                results.push(id);
            }
            session.write("energy.csv", &energy)?;
            if !p.conormal_points.is_empty() || p.export_slices {
                session.stage("extension: field");
                let u = sample_profile(&p.profile, p.s, &q).map_err(|e| session.fail(e))?;
                let field = extend_with(&u, p.s, &q).map_err(|e| session.fail(e))?;
                if !p.conormal_points.is_empty() {
                    session.stage("extension: conormal limit");
                    let op = FracOperator::new(
                        SpectralParams::laplacian(p.s).map_err(|e| session.fail(e))?,
                        u.mask().clone(),
                    );
                    let au = op.apply(&u).map_err(|e| session.fail(e))?;
                    let mut t = Table::new(&["x", "conormal", "operator", "flagged"]);
                    for &x in &p.conormal_points {
                        let c = conormal_limit(&field, [x, 0.0]).map_err(|e| session.fail(e))?;
                        let k = (0..u.mask().len())
                            .min_by(|&a, &b| {
                                (u.mask().position(a)[0] - x)
                                    .abs()
                                    .total_cmp(&(u.mask().position(b)[0] - x).abs())
                            })
                            .ok_or_else(|| Failure::Config("empty trace mask".into()))?;
                        t.push(vec![
                            num(x),
                            num(c.value),
                            num(au.values()[k].re),
                            c.flagged.to_string(),
                        ]);
                    }
                    session.write("conormal.csv", &t)?;
                }
                if p.export_slices {
                    session.stage("extension: slices");
                    session.write("slices.csv", &field.to_table(p.slice_x_limit))?;
                }
            }
            Ok(summary(&results))
        }
        Experiment::Tube(p) => {
            session.stage("tube: bound-state search");
            let rep = bound_state_search(&p.config(cfg.seed)).map_err(|e| session.fail(e))?;
            session.write("tube.csv", &rep.to_table())?;
            session.check(
                None,
                Check::holds(
                    "lambda_1 non-increasing in truncation",
                    rep.monotone_in_truncation,
                ),
            );
            Ok(summary(&rep))
        }
        Experiment::Multitube(p) => {
            session.stage("multitube: truncations");
            let rep = multitube_lowest(&p.config(cfg.seed)).map_err(|e| session.fail(e))?;
            session.write("multitube.csv", &rep.to_table())?;
            session.check(
                None,
                Check::holds("lambda_1 non-increasing in arm length", rep.monotone),
            );
            Ok(summary(&rep))
        }
        Experiment::ProbeConjecture(p) => {
            session.stage("probe-conjecture: sweep");
            let rep = conjecture_probe(&p.config(cfg.seed)).map_err(|e| session.fail(e))?;
            session.write("probe.csv", &rep.to_table())?;
            session.check(
                None,
                Check::holds("gap non-decreasing in bump depth", rep.gap_monotone(p.tol)),
            );
            Ok(summary(&rep.rows))
        }
        Experiment::AllAcceptance(p) => {
            let mut sizes = p.sizes.clone();
            sizes.seed = cfg.seed;
            let mut all = Table::new(&["criterion", "check", "threshold", "measured", "pass"]);
            let mut lines = Vec::new();
            for &id in &p.criteria {
                session.stage(format!("acceptance: criterion {id}"));
                let report = run_criterion(id, &sizes).map_err(|e| session.fail(e))?;
                for (name, table) in &report.tables {
                    session.write(&format!("c{id:02}_{name}.csv"), table)?;
                }
                for row in report.checks_table().rows() {
                    all.push(row.clone());
                }
                let line = report.summary_line();
                let mut out = std::io::stdout().lock();
                let _ = writeln!(out, "{line}");
                lines.push(line);
                session.criteria.push(CriterionRecord {
                    id,
                    name: report.name.to_string(),
                    pass: report.pass(),
                });
                for c in report.checks {
                    session.check(Some(id), c);
                }
            }
            session.write("acceptance_checks.csv", &all)?;
            Ok(summary(&lines))
        }
    }
}
