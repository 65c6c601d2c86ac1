// SPDX-License-Identifier: MIT OR Apache-2.0

use std::time::Instant;

use mft_core::bootstrap::bootstrap_decision;
use mft_core::cpd::{detect, mfa, score_detections, sfa, ChangePointReport, WindowDetections};
use mft_core::filtered_derivative::{g_process, scale_abs};
use mft_core::limit::LimitSamples;
use mft_core::process_sim::{
    simulate_change_point_process, simulate_random_cp_model, simulate_rpvv, ChangePointModel,
    GammaLaw, LifetimeSchedule,
};
use mft_core::rng::derive_seed;
use mft_core::stats::mean_var;
use mft_core::{calibrate, run_test, EventSeries, LimitCalibration, Result, WindowSet};
use rayon::prelude::*;

use crate::report::{mean_se, num, Cell, Check, ExperimentReport, Table};
use crate::{invalid, ExperimentSpec, Model};

/// Stream tags under the spec seed.
const CALIBRATION: u64 = 0;
const DATA: u64 = 1;
const PERMUTATION: u64 = 2;

struct Pipeline {
    windows: WindowSet,
    calib: LimitCalibration,
}

impl Pipeline {
    fn new(spec: &ExperimentSpec, horizon: f64) -> Result<Self> {
        let windows = spec.window_set()?;
        let calib = calibrate(
            horizon,
            &windows,
            spec.alpha,
            spec.n_sims,
            spec.grid_step,
            derive_seed(spec.seed, &[CALIBRATION]),
        )?;
        Ok(Self { windows, calib })
    }

    fn analyze(&self, series: &EventSeries) -> Result<ChangePointReport> {
        let test = run_test(series, &self.windows, &self.calib)?;
        Ok(detect(series, test))
    }
}

fn replicates<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

fn finish(
    spec: &ExperimentSpec,
    started: Instant,
    cells: Vec<Cell>,
    table: Table,
    notes: Vec<String>,
) -> ExperimentReport {
    ExperimentReport {
        name: spec.name.to_string(),
        spec: spec.clone(),
        cells,
        table,
        notes,
        runtime_secs: started.elapsed().as_secs_f64(),
    }
}

fn near(target: f64, tolerance: f64) -> Check {
    Check::Near { target, tolerance }
}

/// Standardized 95 % quantile of `|Z|` for standard normal `Z`:
/// `(z_0.975 - sqrt(2/π)) / sqrt(1 - 2/π)`.
const ONE_POINT_Q: f64 = 1.927_770;

/// Threshold `Q` over horizons and window sets, all sets of one horizon
/// calibrated from the same limit draws.
pub fn run_q_sweep(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let Model::QSweep {
        horizons,
        single_windows,
        pair_windows,
    } = &spec.model
    else {
        return Err(invalid("q-sweep needs a q-sweep model"));
    };
    let nested = spec.window_set()?;
    let base = nested.min();
    let mut table = Table::new(&["T", "set", "H", "Q"]);
    let mut cells = Vec::new();
    let mut singles_all = Vec::new();
    let mut h7_by_t = Vec::new();

    for (ti, &horizon) in horizons.iter().enumerate() {
        let mut union: Vec<f64> = single_windows.clone();
        union.extend(pair_windows);
        union.extend(nested.iter());
        union.push(base);
        union.retain(|&h| h <= horizon / 2.0);
        let union = WindowSet::new(union)?;
        let samples = LimitSamples::simulate(
            horizon,
            &union,
            spec.n_sims,
            spec.grid_step,
            derive_seed(spec.seed, &[CALIBRATION, ti as u64]),
        )?;
        let q_of = |set: &WindowSet| samples.calibration(set, spec.alpha).map(|c| c.q);
        let mut row = |set: &str, w: &WindowSet, q: f64| {
            let list: Vec<String> = w.iter().map(num).collect();
            table.push(vec![num(horizon), set.into(), list.join(" "), num(q)]);
        };

        for &h in single_windows.iter().filter(|&&h| h <= horizon / 2.0) {
            let w = WindowSet::single(h)?;
            let q = q_of(&w)?;
            row("single", &w, q);
            let label = format!("Q single h={} T={}", num(h), num(horizon));
            if h == horizon / 2.0 {
                // The region is the single point T/2 and M*_h = |N(0, 1)|.
                cells.push(
                    Cell::info(
                        format!("{label} (one-point region)"),
                        q,
                        f64::NAN,
                        spec.n_sims,
                    )
                    .with_check(near(ONE_POINT_Q, 0.05)),
                );
                continue;
            }
            singles_all.push(q);
            cells.push(Cell::info(label, q, f64::NAN, spec.n_sims).with_check(near(1.8, 0.1)));
        }
        for &h2 in pair_windows
            .iter()
            .filter(|&&h| h <= horizon / 2.0 && h != base)
        {
            let w = WindowSet::new(vec![base, h2])?;
            let q = q_of(&w)?;
            row("pair", &w, q);
            // Close to the base window the two maxima are strongly dependent
            // and Q stays well below the plateau.
            let check = if h2 >= 2.0 * base {
                near(2.23, 0.1)
            } else {
                Check::Info
            };
            cells.push(
                Cell::info(
                    format!("Q pair {{{},{}}} T={}", num(base), num(h2), num(horizon)),
                    q,
                    f64::NAN,
                    spec.n_sims,
                )
                .with_check(check),
            );
        }
        let fitting: Vec<f64> = nested.iter().filter(|&h| h <= horizon / 2.0).collect();
        for k in 1..=fitting.len() {
            let w = WindowSet::new(fitting[..k].to_vec())?;
            let q = q_of(&w)?;
            row("nested", &w, q);
            let full = k == nested.len();
            if full {
                h7_by_t.push(q);
            }
            let check = if full && horizon == spec.horizon {
                near(2.75, 0.1)
            } else {
                Check::Info
            };
            cells.push(
                Cell::info(
                    format!("Q first {k} windows T={}", num(horizon)),
                    q,
                    f64::NAN,
                    spec.n_sims,
                )
                .with_check(check),
            );
        }
    }
    if singles_all.len() > 1 {
        let lo = singles_all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = singles_all
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        cells.push(
            Cell::info(
                "single window Q spread over h and T",
                hi - lo,
                f64::NAN,
                singles_all.len(),
            )
            .with_check(Check::AtMost { bound: 0.1 }),
        );
    }
    if h7_by_t.len() > 1 {
        let lo = h7_by_t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = h7_by_t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        cells.push(Cell::info(
            "full set Q spread over T",
            hi - lo,
            f64::NAN,
            h7_by_t.len(),
        ));
    }
    let notes = vec![format!(
        "calibration: {} limit draws per horizon, alpha {}",
        spec.n_sims, spec.alpha
    )];
    Ok(finish(spec, started, cells, table, notes))
}

fn log_grid(range: (f64, f64), size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![range.0];
    }
    let (a, b) = (range.0.ln(), range.1.ln());
    (0..size)
        .map(|i| (a + (b - a) * i as f64 / (size - 1) as f64).exp())
        .collect()
}

/// Rejection rate of the test on i.i.d. Gamma life times over a grid of
/// life time means and standard deviations.
pub fn run_significance_heatmap(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let Model::Significance {
        mu_range,
        sigma_range,
        size,
    } = &spec.model
    else {
        return Err(invalid("significance needs a significance model"));
    };
    if *size == 0 {
        return Err(invalid("grid size must be positive"));
    }
    let pipeline = Pipeline::new(spec, spec.horizon)?;
    let mus = log_grid(*mu_range, *size);
    let sigmas = log_grid(*sigma_range, *size);
    let n = spec.n_replicates;
    let h_min = pipeline.windows.min();

    struct CellOutcome {
        mu: f64,
        sigma: f64,
        rejections: usize,
        multi: usize,
    }
    let mut outcomes = Vec::new();
    for (i, &mu) in mus.iter().enumerate() {
        for (j, &sigma) in sigmas.iter().enumerate() {
            let schedule = LifetimeSchedule::Iid {
                law: GammaLaw::with_moments(mu, sigma * sigma)?,
            };
            let runs = replicates(n, |r| {
                let seed = derive_seed(spec.seed, &[DATA, i as u64, j as u64, r as u64]);
                let series = simulate_rpvv(&schedule, spec.horizon, seed)?;
                let rep = pipeline.analyze(&series)?;
                Ok((rep.test.rejected(), rep.accepted.len() >= 2))
            })?;
            outcomes.push(CellOutcome {
                mu,
                sigma,
                rejections: runs.iter().filter(|r| r.0).count(),
                multi: runs.iter().filter(|r| r.1).count(),
            });
        }
    }

    let mut table = Table::new(&["mu", "sigma", "rejection_rate", "se"]);
    let mut cells = Vec::new();
    for o in &outcomes {
        let c = Cell::proportion(
            format!("rejection mu={} sigma={}", num(o.mu), num(o.sigma)),
            o.rejections,
            n,
        );
        table.push(vec![num(o.mu), num(o.sigma), num(c.estimate), num(c.se)]);
        cells.push(c);
    }

    let pooled = |label: &str,
                  pick: &dyn Fn(&CellOutcome) -> bool,
                  count: &dyn Fn(&CellOutcome) -> usize| {
        let sel: Vec<&CellOutcome> = outcomes.iter().filter(|o| pick(o)).collect();
        (!sel.is_empty())
            .then(|| Cell::proportion(label, sel.iter().map(|o| count(o)).sum(), sel.len() * n))
    };
    if let Some(c) = pooled("rejection, life time CV >= 1", &|o| o.sigma >= o.mu, &|o| {
        o.rejections
    }) {
        cells.push(c.with_check(Check::AtMost { bound: spec.alpha }));
    }
    if mus.len() > 1 && sigmas.len() > 1 {
        let (mu_max, sigma_min) = (mus[mus.len() - 1], sigmas[0]);
        if let Some(c) = pooled(
            "rejection, lowest rate and highest regularity",
            &|o| o.mu == mu_max && o.sigma == sigma_min,
            &|o| o.rejections,
        ) {
            cells.push(c.with_check(Check::AtLeast { bound: spec.alpha }));
        }
        let regular = pooled("", &|o| o.sigma == sigma_min, &|o| o.rejections).unwrap();
        let irregular = pooled("", &|o| o.sigma == sigmas[sigmas.len() - 1], &|o| {
            o.rejections
        })
        .unwrap();
        cells.push(
            Cell::info(
                "rejection drop from most regular to most irregular column",
                regular.estimate - irregular.estimate,
                (regular.se.powi(2) + irregular.se.powi(2)).sqrt(),
                2 * mus.len() * n,
            )
            .with_check(Check::Holds {
                holds: regular.estimate > irregular.estimate,
            }),
        );
    }
    if let Some(c) = pooled(
        "two or more detections, cells with rejection <= 0.10",
        &|o| o.rejections as f64 <= 0.10 * n as f64,
        &|o| o.multi,
    ) {
        cells.push(c.with_check(Check::AtMost { bound: 0.01 }));
    }
    let notes = vec![
        format!(
            "Q = {} from {} limit draws",
            num(pipeline.calib.q),
            spec.n_sims
        ),
        format!(
            "mean events per smallest window ranges from {} to {}",
            num(h_min / mus[mus.len() - 1]),
            num(h_min / mus[0])
        ),
    ];
    Ok(finish(spec, started, cells, table, notes))
}

/// Level of the test and of the permutation test on processes whose life
/// time law alternates every `g/2` life times.
pub fn run_table1(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let Model::Table1 {
        first,
        second,
        grids,
    } = &spec.model
    else {
        return Err(invalid("table1 needs a table1 model"));
    };
    if spec.n_perms == 0 {
        return Err(invalid("table1 needs permutations"));
    }
    let pipeline = Pipeline::new(spec, spec.horizon)?;
    let n = spec.n_replicates;
    let mft_targets = [0.059, 0.047, 0.055];
    let boot_targets = [0.030, 0.066, 0.151];
    let default_grids = [5000, 10_000, 20_000];

    let mut table = Table::new(&["g", "mft_rate", "mft_se", "bootstrap_rate", "bootstrap_se"]);
    let mut cells = Vec::new();
    let mut boot_rates = Vec::new();
    for (row, &grid) in grids.iter().enumerate() {
        let schedule = LifetimeSchedule::Alternating {
            first: *first,
            second: *second,
            grid,
        };
        schedule.validate()?;
        let runs = replicates(n, |r| {
            let seed = derive_seed(spec.seed, &[DATA, row as u64, r as u64]);
            let series = simulate_rpvv(&schedule, spec.horizon, seed)?;
            let test = run_test(&series, &pipeline.windows, &pipeline.calib)?;
            let boot = bootstrap_decision(
                &series,
                &pipeline.windows,
                spec.alpha,
                spec.n_perms,
                derive_seed(spec.seed, &[PERMUTATION, row as u64, r as u64]),
            )?;
            Ok((test.rejected(), boot == mft_core::Decision::Reject))
        })?;
        let mft = Cell::proportion(
            format!("MFT rejection g={grid}"),
            runs.iter().filter(|r| r.0).count(),
            n,
        );
        let boot = Cell::proportion(
            format!("bootstrap rejection g={grid}"),
            runs.iter().filter(|r| r.1).count(),
            n,
        );
        table.push(vec![
            grid.to_string(),
            num(mft.estimate),
            num(mft.se),
            num(boot.estimate),
            num(boot.se),
        ]);
        let reference_row = default_grids.iter().position(|&g| g == grid);
        boot_rates.push(boot.estimate);
        cells.push(match reference_row {
            Some(i) => mft.with_check(near(mft_targets[i], 0.025)),
            None => mft,
        });
        cells.push(match reference_row {
            Some(i) => boot.with_check(near(boot_targets[i], 0.04)),
            None => boot,
        });
    }
    if boot_rates.len() > 1 {
        let increasing = boot_rates.windows(2).all(|w| w[0] < w[1]);
        cells.push(
            Cell::info(
                "bootstrap rejection strictly increasing in g",
                boot_rates[boot_rates.len() - 1] - boot_rates[0],
                f64::NAN,
                boot_rates.len(),
            )
            .with_check(Check::Holds { holds: increasing }),
        );
    }
    let notes = vec![
        format!("life time mean {} for both laws", num(first.mean())),
        format!(
            "Q = {}, {} permutations per bootstrap test",
            num(pipeline.calib.q),
            spec.n_perms
        ),
    ];
    Ok(finish(spec, started, cells, table, notes))
}

/// Detection probability and false positives for a single rate change.
pub fn run_table2(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let Model::Table2 {
        before,
        after_rates,
        change_point,
    } = &spec.model
    else {
        return Err(invalid("table2 needs a table2 model"));
    };
    let pipeline = Pipeline::new(spec, spec.horizon)?;
    let n = spec.n_replicates;
    // Reference rows keyed by the Gamma rate parameter after the change.
    let reference = [
        (25.0, 0.119, 0.051, 0.049),
        (26.0, 0.653, 0.048, 0.046),
        (28.0, 0.996, 0.050, 0.049),
        (30.0, 0.999, 0.048, 0.046),
    ];

    let mut table = Table::new(&[
        "rates",
        "detection_prob",
        "detection_se",
        "mean_fp",
        "mean_fp_se",
        "share_with_fp",
        "share_with_fp_se",
    ]);
    let mut cells = Vec::new();
    for (row, &rate) in after_rates.iter().enumerate() {
        let after = GammaLaw::new(before.shape, rate)?;
        let null = after.mean() == before.mean();
        let model = if null {
            ChangePointModel::stationary(spec.horizon, LifetimeSchedule::Iid { law: *before })?
        } else {
            ChangePointModel::new(
                spec.horizon,
                vec![
                    LifetimeSchedule::Iid { law: *before },
                    LifetimeSchedule::Iid { law: after },
                ],
                vec![*change_point],
            )?
        };
        let truth = model.change_points.clone();
        let runs = replicates(n, |r| {
            let seed = derive_seed(spec.seed, &[DATA, row as u64, r as u64]);
            let series = simulate_change_point_process(&model, seed)?;
            let rep = pipeline.analyze(&series)?;
            Ok(score_detections(&rep.accepted, &truth, spec.horizon))
        })?;
        let label = format!("{}->{}", num(before.event_rate()), num(after.event_rate()));
        let detected = runs.iter().filter(|s| s.detected_true > 0).count();
        let fps: Vec<f64> = runs.iter().map(|s| s.false_positives as f64).collect();
        let (fp_mean, fp_se) = mean_se(&fps);
        let with_fp = runs.iter().filter(|s| s.false_positives > 0).count();

        let target = reference.iter().find(|p| p.0 == rate && !null);
        let det = (!null).then(|| Cell::proportion(format!("detection {label}"), detected, n));
        let fp = Cell::info(format!("mean FP {label}"), fp_mean, fp_se, n)
            .with_check(Check::Range { lo: 0.02, hi: 0.09 });
        let share = Cell::proportion(format!("share with FP {label}"), with_fp, n);
        table.push(vec![
            label.clone(),
            det.as_ref().map_or(String::new(), |c| num(c.estimate)),
            det.as_ref().map_or(String::new(), |c| num(c.se)),
            num(fp.estimate),
            num(fp.se),
            num(share.estimate),
            num(share.se),
        ]);
        if let Some(det) = det {
            let check = match target {
                Some(&(_, p, _, _)) if p > 0.99 => Check::AtLeast { bound: 0.98 },
                Some(&(_, p, _, _)) => near(p, 0.05),
                None => Check::Info,
            };
            cells.push(det.with_check(check));
        }
        cells.push(fp);
        cells.push(match target {
            Some(&(_, _, _, s)) => share.with_check(near(s, 0.025)),
            None => share,
        });
    }
    let notes = vec![format!(
        "Q = {} from {} limit draws",
        num(pipeline.calib.q),
        spec.n_sims
    )];
    Ok(finish(spec, started, cells, table, notes))
}

fn moving_average(xs: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Single filter detection rate per window against the multiple filter
/// algorithm on the same simulated processes.
pub fn run_multiwindow_study(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let Model::Multiwindow {
        model,
        single_windows,
        smoothing,
    } = &spec.model
    else {
        return Err(invalid("multiwindow needs a multiwindow model"));
    };
    let horizon = model.horizon;
    let multi = spec.window_set()?;
    let singles = WindowSet::new(single_windows.clone())?;
    let mut all = singles.as_slice().to_vec();
    all.extend(multi.iter());
    let all = WindowSet::new(all)?;
    let samples = LimitSamples::simulate(
        horizon,
        &all,
        spec.n_sims,
        spec.grid_step,
        derive_seed(spec.seed, &[CALIBRATION]),
    )?;
    let multi_calib = samples.calibration(&multi, spec.alpha)?;
    // Per window mean and sd agree between subsets; only Q differs.
    let window_stats = samples.global_maxima(&all)?.0;
    let single_q = singles
        .iter()
        .map(|h| {
            samples
                .calibration(&WindowSet::single(h)?, spec.alpha)
                .map(|c| c.q)
        })
        .collect::<Result<Vec<_>>>()?;
    let single_idx: Vec<usize> = singles.iter().map(|h| all.position(h).unwrap()).collect();
    let multi_idx: Vec<usize> = multi.iter().map(|h| all.position(h).unwrap()).collect();

    let n = spec.n_replicates;
    // Row r: detection share of each single window, then of the MFA.
    let rows = replicates(n, |r| {
        let sim = simulate_random_cp_model(model, derive_seed(spec.seed, &[DATA, r as u64]))?;
        let truth = &sim.change_points;
        let share = |est: &[mft_core::cpd::ChangePointEstimate]| {
            let s = score_detections(est, truth, horizon);
            if s.n_true == 0 {
                0.0
            } else {
                s.matched as f64 / s.n_true as f64
            }
        };
        let r_procs = all
            .iter()
            .zip(&window_stats)
            .map(|(h, w)| Ok(scale_abs(&g_process(&sim.series, h)?, w.mean, w.sd())))
            .collect::<Result<Vec<_>>>()?;
        let mut out: Vec<f64> = single_idx
            .iter()
            .zip(&single_q)
            .map(|(&j, &q)| {
                let h = all.as_slice()[j];
                share(&sfa(&r_procs[j], h, q))
            })
            .collect();
        let per_window: Vec<WindowDetections> = multi_idx
            .iter()
            .map(|&j| {
                let h = all.as_slice()[j];
                WindowDetections {
                    h,
                    estimates: sfa(&r_procs[j], h, multi_calib.q),
                }
            })
            .collect();
        out.push(share(&mfa(&per_window, horizon)));
        Ok((out, truth.len()))
    })?;

    let k = singles.len();
    let column = |j: usize| rows.iter().map(|r| r.0[j]).collect::<Vec<f64>>();
    let curve: Vec<(f64, f64)> = (0..k).map(|j| mean_se(&column(j))).collect();
    let raw: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let smooth = moving_average(&raw, *smoothing);
    let best = argmax(&raw);
    let best_smooth = argmax(&smooth);
    let mfa_col = column(k);
    let (mfa_mean, mfa_se) = mean_se(&mfa_col);
    let diffs: Vec<f64> = rows.iter().map(|r| r.0[k] - r.0[best]).collect();
    let (d_mean, d_se) = mean_se(&diffs);
    let n_true: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();

    let mut table = Table::new(&["h", "detection_rate", "se", "moving_average"]);
    for (j, h) in singles.iter().enumerate() {
        table.push(vec![
            num(h),
            num(curve[j].0),
            num(curve[j].1),
            num(smooth[j]),
        ]);
    }
    let cells = vec![
        Cell::info(
            "best single window detection rate",
            curve[best].0,
            curve[best].1,
            n,
        )
        .with_check(near(0.59, 0.06)),
        Cell::info(
            "best single window h (raw)",
            singles.as_slice()[best],
            f64::NAN,
            n,
        ),
        Cell::info(
            format!("best single window h (moving average of {smoothing})"),
            singles.as_slice()[best_smooth],
            f64::NAN,
            n,
        )
        .with_check(Check::Range { lo: 18.0, hi: 38.0 }),
        Cell::info("MFA detection rate", mfa_mean, mfa_se, n).with_check(near(0.66, 0.06)),
        Cell::info("paired MFA minus best single window", d_mean, d_se, n).with_check(
            Check::Holds {
                holds: d_mean - 1.96 * d_se > 0.0,
            },
        ),
        Cell::info(
            "true change points per process",
            mean_var(&n_true).0,
            mean_se(&n_true).1,
            n,
        ),
    ];
    let notes = vec![
        format!("MFA threshold Q = {}", num(multi_calib.q)),
        format!("moving average of width {smoothing} over the raw single window curve"),
        "detection rate: correct estimates per true change point, each estimate and change point counted once, averaged over processes".into(),
    ];
    Ok(finish(spec, started, cells, table, notes))
}

/// Test plus MFA on replicates of a fixed piecewise stationary model.
pub fn run_worked_example(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let Model::WorkedExample { model } = &spec.model else {
        return Err(invalid("worked-example needs a change point model"));
    };
    let pipeline = Pipeline::new(spec, model.horizon)?;
    let truth = model.change_points.clone();
    let true_rates = model.segment_rates();
    let n = spec.n_replicates;

    struct Run {
        rejected: bool,
        n_accepted: usize,
        covered: Vec<bool>,
        /// Largest relative rate error when exactly the true number of points is accepted.
        rate_error: Option<f64>,
        points: Vec<f64>,
    }
    let runs = replicates(n, |r| {
        let series =
            simulate_change_point_process(model, derive_seed(spec.seed, &[DATA, r as u64]))?;
        let rep = pipeline.analyze(&series)?;
        let covered: Vec<bool> = truth
            .iter()
            .map(|&c| {
                rep.accepted
                    .iter()
                    .any(|e| mft_core::cpd::in_neighborhood(c, e.time, e.window, model.horizon))
            })
            .collect();
        let all_found = covered.iter().all(|&c| c);
        let rate_error = (all_found && rep.accepted.len() == truth.len()).then(|| {
            rep.segments
                .iter()
                .zip(&true_rates)
                .map(|(s, &t)| ((s.rate - t) / t).abs())
                .fold(0.0, f64::max)
        });
        Ok(Run {
            rejected: rep.test.rejected(),
            n_accepted: rep.accepted.len(),
            covered,
            rate_error,
            points: rep.change_points(),
        })
    })?;

    let mut cells = vec![
        Cell::proportion("rejection", runs.iter().filter(|r| r.rejected).count(), n)
            .with_check(Check::AtLeast { bound: 0.99 }),
        Cell::proportion(
            format!("at least {} accepted points", truth.len()),
            runs.iter().filter(|r| r.n_accepted >= truth.len()).count(),
            n,
        )
        .with_check(Check::AtLeast { bound: 0.90 }),
    ];
    for (i, &c) in truth.iter().enumerate() {
        cells.push(
            Cell::proportion(
                format!("change point {} covered", num(c)),
                runs.iter().filter(|r| r.covered[i]).count(),
                n,
            )
            .with_check(Check::AtLeast { bound: 0.85 }),
        );
    }
    let errors: Vec<f64> = runs.iter().filter_map(|r| r.rate_error).collect();
    if !errors.is_empty() {
        let within = errors.iter().filter(|&&e| e <= 0.10).count();
        cells.push(
            Cell::proportion(
                "segment rates within 10% when all points found",
                within,
                errors.len(),
            )
            .with_check(Check::AtLeast { bound: 0.90 }),
        );
    }
    let mut table = Table::new(&["replicate", "rejected", "change_points"]);
    for (i, r) in runs.iter().enumerate() {
        let pts: Vec<String> = r.points.iter().map(|&p| num(p)).collect();
        table.push(vec![i.to_string(), r.rejected.to_string(), pts.join(" ")]);
    }
    let notes = vec![
        format!(
            "Q = {} from {} limit draws",
            num(pipeline.calib.q),
            spec.n_sims
        ),
        format!(
            "{} of {} runs found exactly the true points and entered the rate check",
            errors.len(),
            n
        ),
    ];
    Ok(finish(spec, started, cells, table, notes))
}
