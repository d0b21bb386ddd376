use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use telegraphnet::carleman::{check_assumption1, evaluate_estimate};
use telegraphnet::dynamics::{
    apply_operator, boundary_trace, energy_bound_report, energy_series, manufacture_homogeneous_field, solve,
    Direction, FieldTrajectory, ManufacturedOptions,
};
use telegraphnet::inverse::{
    least_squares_reconstruct, reconstruct_from_simulation, simulate_measurements, stability_experiment,
    CoefficientPerturbation, DirectOptions, GaussNewtonOptions, NoiseModel,
};

use crate::config::{Mode, Setup};
use crate::error::CliError;
use crate::plot::{line_plot, Axes, Scale, Series};

/// What a run produced.
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Output<'a> {
    dir: &'a Path,
    stem: String,
    plot: bool,
    files: Vec<PathBuf>,
}

impl Output<'_> {
    fn path(&self, suffix: &str, ext: &str) -> PathBuf {
        let name = if suffix.is_empty() {
            format!("{}.{ext}", self.stem)
        } else {
            format!("{}_{suffix}.{ext}", self.stem)
        };
        self.dir.join(name)
    }

    fn csv(
        &mut self,
        suffix: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.path(suffix, "csv");
        let mut out = BufWriter::new(File::create(&path)?);
        write(&mut out)?;
        out.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn svg(&mut self, suffix: &str, axes: &Axes, series: &[Series]) -> Result<(), CliError> {
        if !self.plot {
            return Ok(());
        }
        let path = self.path(suffix, "svg");
        line_plot(&path, axes, series)?;
        self.files.push(path);
        Ok(())
    }
}

pub fn run(mode: Mode, setup: &Setup, dir: &Path, plot: bool) -> Result<Report, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Output {
        dir,
        stem: mode.file_stem(),
        plot,
        files: Vec::new(),
    };
    let (summary, warnings) = match mode {
        Mode::Simulate => simulate(setup, &mut out)?,
        Mode::EnergyCheck => energy_check(setup, &mut out)?,
        Mode::CarlemanCheck => carleman_check(setup, &mut out)?,
        Mode::ReconstructDirect => reconstruct_direct(setup, &mut out)?,
        Mode::ReconstructLsq => reconstruct_lsq(setup, &mut out)?,
        Mode::Stability => stability(setup, &mut out)?,
    };
    Ok(Report {
        summary: format!("{}: {summary}", mode.name()),
        files: out.files,
        warnings,
    })
}

type ModeResult = Result<(String, Vec<String>), CliError>;

/// Per-edge profiles of one component at one level.
fn profile_series(setup: &Setup, traj: &FieldTrajectory, level: usize, comp: usize, label: &str) -> Vec<Series> {
    (0..traj.edge_count())
        .map(|k| {
            let m = traj.mesh(k);
            let v = traj.component(comp, k, level);
            Series::new(
                format!("edge {} {label}", setup.topo.edges()[k].id),
                (0..m.nodes()).map(|i| (m.x(i), v[i])).collect(),
            )
        })
        .collect()
}

fn simulate(setup: &Setup, out: &mut Output) -> ModeResult {
    let data = setup.config.problem.to_data();
    let direction: Direction = setup.config.grid.direction.into();
    let sol = solve(&setup.topo, &setup.coeffs, &data, &setup.grid, direction)?;
    let u = &sol.trajectory;
    out.csv("trajectory", |w| u.write_csv(&setup.topo, w, setup.config.output.stride))?;
    let traces = boundary_trace(u, &setup.topo);
    out.csv("traces", |w| {
        write!(w, "t")?;
        for lt in &traces.leaves {
            write!(w, ",leaf{}_current", lt.vertex)?;
        }
        writeln!(w)?;
        for n in 0..traces.len() {
            write!(w, "{}", traces.time(n))?;
            for lt in &traces.leaves {
                write!(w, ",{:e}", lt.channels[0][n])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    let last = u.levels() - 1;
    let title = format!("voltage at t = {}", u.time(last));
    out.svg(
        "voltage",
        &Axes {
            title: &title,
            x_label: "x",
            y_label: "u2",
            x_scale: Scale::Linear,
        },
        &profile_series(setup, u, last, 1, "voltage"),
    )?;
    let energy = energy_series(u, &setup.coeffs);
    Ok((
        format!(
            "{} levels on [{}, {}], max |u| = {:.6e}, energy {:.6e} -> {:.6e}",
            u.levels(),
            u.t0(),
            u.t_end(),
            u.max_abs(),
            energy[0],
            energy[last]
        ),
        sol.warnings,
    ))
}

fn energy_check(setup: &Setup, out: &mut Output) -> ModeResult {
    let data = setup.config.problem.to_data();
    let sol = solve(&setup.topo, &setup.coeffs, &data, &setup.grid, Direction::Forward)?;
    let u = &sol.trajectory;
    let energy = energy_series(u, &setup.coeffs);
    out.csv("", |w| {
        writeln!(w, "t,energy")?;
        for (l, e) in energy.iter().enumerate() {
            writeln!(w, "{},{e:e}", u.time(l))?;
        }
        Ok(())
    })?;
    let bound = energy_bound_report(u)?;
    out.csv("derivatives", |w| {
        writeln!(w, "t,k0,k1,k2,k3,total")?;
        for (t, v) in &bound.profile {
            writeln!(w, "{t},{:e},{:e},{:e},{:e},{:e}", v[0], v[1], v[2], v[3], v.iter().sum::<f64>())?;
        }
        Ok(())
    })?;
    out.svg(
        "",
        &Axes {
            title: "energy",
            x_label: "t",
            y_label: "E(t)",
            x_scale: Scale::Linear,
        },
        &[Series::new(
            "E",
            energy.iter().enumerate().map(|(l, e)| (u.time(l), *e)).collect(),
        )],
    )?;
    let e0 = energy[0];
    let drift = energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.max(f64::MIN_POSITIVE);
    let increases = energy.windows(2).filter(|w| w[1] > w[0]).count();
    let kind = if setup.coeffs.is_lossless() { "lossless" } else { "lossy" };
    Ok((
        format!(
            "{kind}, E(0) = {e0:.6e}, max relative drift = {drift:.3e}, increasing steps = {increases}, max derivative energy = {:.6e} at t = {}",
            bound.max, bound.time_of_max
        ),
        sol.warnings,
    ))
}

fn carleman_check(setup: &Setup, out: &mut Output) -> ModeResult {
    let weights = setup.weights()?;
    let mesh = &setup.grid.mesh;
    let steps = setup.grid.steps;
    check_assumption1(&setup.topo, &weights, &setup.coeffs, mesh, steps)?.into_result()?;
    let horizon = setup.grid.horizon;
    let field = manufacture_homogeneous_field(&setup.topo, horizon, ManufacturedOptions::default());
    let u = field.sample(mesh, steps);
    let f = apply_operator(&setup.coeffs, mesh, &field, -horizon, setup.grid.dt(), 2 * steps + 1)?;
    let s_grid = setup.s_grid(&weights);
    let report = evaluate_estimate(&setup.topo, &setup.coeffs, &u, &f, &weights, &s_grid)?;
    out.csv("", |w| report.write_csv(w))?;
    out.svg(
        "",
        &Axes {
            title: "weighted estimate",
            x_label: "s",
            y_label: "LHS / (RHS + boundary)",
            x_scale: Scale::Log,
        },
        &[Series::new("ratio", report.rows.iter().map(|r| (r.s, r.ratio)).collect())],
    )?;
    Ok((
        format!("empirical constant C = {:.6e} over {} values of s", report.c_hat, report.rows.len()),
        report.warnings,
    ))
}

fn perturbation_series(rho: &CoefficientPerturbation, label: &str) -> Vec<Series> {
    let mut out = Vec::new();
    for k in 0..rho.edge_count() {
        let m = rho.mesh(k);
        for n in 0..4 {
            let v = rho.edge(k).component(n);
            if v.iter().all(|x| x.abs() < 1e-12) {
                continue;
            }
            out.push(Series::new(
                format!("edge {} rho{} {label}", m.id, n + 1),
                (0..m.nodes()).map(|i| (m.x(i), v[i])).collect(),
            ));
        }
    }
    out
}

fn reconstruct_direct(setup: &Setup, out: &mut Output) -> ModeResult {
    let (truth, _) = setup.perturbation()?;
    let q = truth.apply(&setup.coeffs)?;
    let pair = setup.pair();
    let options = DirectOptions {
        margin: setup.config.direct.margin,
        condition_limit: setup.config.direct.condition_limit,
    };
    let r = reconstruct_from_simulation(&setup.topo, &setup.coeffs, &q, &pair, &setup.grid, options)?;
    out.csv("", |w| r.rho.write_csv(w))?;
    out.csv("truth", |w| truth.write_csv(w))?;
    let mut series = perturbation_series(&r.rho, "reconstructed");
    series.extend(perturbation_series(&truth, "true"));
    out.svg(
        "",
        &Axes {
            title: "direct reconstruction",
            x_label: "x",
            y_label: "rho",
            x_scale: Scale::Linear,
        },
        &series,
    )?;
    let error = r.rho.relative_error(&truth)?;
    let mut warnings = pair.compatibility_warnings(&setup.topo);
    warnings.extend(
        r.flagged
            .iter()
            .map(|(e, x)| format!("ill-conditioned node on edge {e} at x = {x}")),
    );
    Ok((
        format!("relative L2 error = {error:.6e}, flagged nodes = {}", r.flagged.len()),
        warnings,
    ))
}

fn reconstruct_lsq(setup: &Setup, out: &mut Output) -> ModeResult {
    let (truth, _) = setup.perturbation()?;
    let pair = setup.pair();
    let cfg = &setup.config.lsq;
    let clean = simulate_measurements(&setup.topo, &setup.coeffs, &truth, &pair, &setup.grid)?;
    let (measured, noise) = if cfg.noise > 0.0 {
        let (noisy, delta2) = clean.with_noise(cfg.noise, setup.config.seed);
        (
            noisy,
            NoiseModel::Discrepancy {
                noise_misfit: delta2,
                tau: cfg.tau,
                candidates: cfg.lambdas.clone(),
            },
        )
    } else {
        (clean, NoiseModel::Exact { lambda: 0.0 })
    };
    let initial = cfg
        .initial
        .clone()
        .unwrap_or_else(|| vec![0.0; 4 * setup.topo.edge_count()]);
    let options = GaussNewtonOptions {
        max_iterations: cfg.max_iterations,
        noise,
        ..GaussNewtonOptions::default()
    };
    let r = least_squares_reconstruct(&setup.topo, &measured, &pair, &setup.coeffs, &initial, &setup.grid, &options)?;
    out.csv("", |w| r.rho.write_csv(w))?;
    out.csv("history", |w| r.write_history_csv(w))?;
    out.svg(
        "history",
        &Axes {
            title: "Gauss-Newton history",
            x_label: "iteration",
            y_label: "log10 misfit",
            x_scale: Scale::Linear,
        },
        &[Series::new(
            "misfit",
            r.history
                .iter()
                .enumerate()
                .map(|(k, it)| (k as f64, it.misfit.max(1e-300).log10()))
                .collect(),
        )],
    )?;
    let error = r.rho.relative_error(&truth)?;
    Ok((
        format!(
            "relative L2 error = {error:.6e} after {} iterations ({}), misfit = {:.6e}, lambda = {:e}",
            r.iterations(),
            if r.converged { "converged" } else { "not converged" },
            r.misfit,
            r.lambda
        ),
        r.warnings,
    ))
}

fn stability(setup: &Setup, out: &mut Output) -> ModeResult {
    let (profile, cfg) = setup.perturbation()?;
    let pair = setup.pair();
    let weights = match setup.config.weights {
        Some(_) => Some(setup.weights()?),
        None => None,
    };
    let table = stability_experiment(
        &setup.topo,
        &setup.coeffs,
        &profile,
        &cfg.epsilons,
        &pair,
        &setup.grid,
        weights.as_ref(),
    )?;
    out.csv("", |w| table.write_csv(w))?;
    out.svg(
        "",
        &Axes {
            title: "stability ratio",
            x_label: "epsilon",
            y_label: "perturbation norm / data norm",
            x_scale: Scale::Log,
        },
        &[Series::new(
            "ratio",
            table
                .rows
                .iter()
                .filter(|r| r.ratio.is_finite())
                .map(|r| (r.epsilon, r.ratio))
                .collect(),
        )],
    )?;
    let reliable = table.rows.iter().filter(|r| r.is_reliable()).count();
    let summary = match (table.lipschitz_estimate(), table.spread()) {
        (Some(c), Some(s)) => format!(
            "stability ratio C = {c:.6e}, spread = {s:.4} over {reliable} of {} rows",
            table.rows.len()
        ),
        _ => format!("no reliable rows among {}", table.rows.len()),
    };
    Ok((summary, table.warnings))
}
