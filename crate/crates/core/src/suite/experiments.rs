//! The experiments: one function per verified scaling or identity claim.
//!
//! Conventions shared by all races below:
//! * a trigger list is checked in order each step, so list order decides
//!   ties: exit-first implements `tau <= T`, target-first implements
//!   `tau < T`;
//! * unbounded line targets are clipped to the race disk where an exact
//!   cross-check needs the clipped event (the two events differ only on
//!   trajectories exiting exactly onto the target, which the tie rule
//!   already attributes consistently);
//! * each estimate draws from its own derived seed so products and
//!   differences of estimates carry independent noise.

use super::{fit_power, ScalingRow, ScalingTable, SuiteError};
use crate::green::{DirichletField, GreenSolver};
use crate::mc::{estimate_event, estimate_expectation, Estimate, Functional, McConfig, StoppingRule, Trigger};
use crate::model::WalkModel;
use crate::region::{make_dense, LineKind, Policy, Region};
use crate::stats::{ratio_spread, spearman};
use serde_json::{json, Map, Value};

// Bands and thresholds the experiments are judged against.
pub const HALFLINE_SLOPE_BAND: (f64, f64) = (-0.57, -0.43);
pub const STRIP_SLOPE_BAND: (f64, f64) = (-0.6, -0.4);
pub const LINE_SLOPE_BAND: (f64, f64) = (-1.1, -0.9);
pub const RATIO_SPREAD_MAX: f64 = 3.0;
pub const TREND_SPEARMAN_MAX: f64 = 0.5;
pub const OVERSHOOT_EXPONENT_MAX: f64 = 0.75;
pub const GREEN_LOG_BRACKET_MAX: f64 = 1.5;
pub const LOGN_BAND_SPREAD_MAX: f64 = 4.0;
pub const MC_SIGMAS: f64 = 3.0;

/// Table plus derived metrics and the experiment's own verdict.
#[derive(Debug, Clone)]
pub struct ExpOutput {
    pub table: ScalingTable,
    pub metrics: Map<String, Value>,
    pub pass: bool,
}

impl ExpOutput {
    fn new(table: ScalingTable) -> ExpOutput {
        ExpOutput { table, metrics: Map::new(), pass: true }
    }

    fn put(&mut self, key: &str, v: Value) {
        self.metrics.insert(key.to_string(), v);
    }

    fn gate(&mut self, key: &str, ok: bool) {
        self.put(key, json!(ok));
        self.pass &= ok;
    }
}

/// SplitMix64 step, for deriving independent sub-seeds.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn push_estimate(table: &mut ScalingTable, n: u32, k: Option<i64>, label: &str, e: &Estimate) {
    table.push(ScalingRow {
        n,
        k,
        label: label.to_string(),
        estimate: e.value,
        stderr: e.stderr,
        n_samples: e.n_samples,
        cap_hits: e.cap_hits,
    });
}

/// Escape-to-the-disk-boundary race against a target region.
/// `tie_escape` picks the `tau <= T` convention (exit checked first).
fn disk_race(
    model: &WalkModel,
    n: f64,
    target: Region,
    tie_escape: bool,
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<Estimate, SuiteError> {
    let exit = ("exit".to_string(), Trigger::Exit { region: Region::disk(n) });
    let hit = ("hit".to_string(), Trigger::Enter { region: target, at_time_zero: false });
    let rule = if tie_escape {
        StoppingRule::new(vec![exit, hit])
    } else {
        StoppingRule::new(vec![hit, exit])
    };
    Ok(estimate_event(model, (0, 0), &rule, &["exit"], samples, seed, mc)?)
}

fn strip_race(
    model: &WalkModel,
    n: f64,
    target: Region,
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<Estimate, SuiteError> {
    let rule = StoppingRule::new(vec![
        ("exit".to_string(), Trigger::Exit { region: Region::strip(n) }),
        ("hit".to_string(), Trigger::Enter { region: target, at_time_zero: false }),
    ]);
    Ok(estimate_event(model, (0, 0), &rule, &["exit"], samples, seed, mc)?)
}

/// Decreasing within two combined standard errors along the grid.
fn decreasing_within_noise(rows: &[&ScalingRow]) -> bool {
    rows.windows(2).all(|w| w[1].estimate <= w[0].estimate + 2.0 * (w[0].stderr + w[1].stderr))
}

/// Escape past radius n before the positive half-axis multiples.
pub fn exp_halfline(
    model: &WalkModel,
    kappa: u32,
    n_grid: &[u32],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("halfline", model.hash(), seed);
    for (i, &n) in n_grid.iter().enumerate() {
        for (j, (label, kind)) in [("kN", LineKind::NonNeg), ("kZplus", LineKind::Pos)].iter().enumerate() {
            let e = disk_race(
                model,
                n as f64,
                Region::line(kappa, *kind),
                true,
                samples,
                derive_seed(seed, (i * 2 + j) as u64),
                mc,
            )?;
            push_estimate(&mut table, n, None, label, &e);
        }
    }
    let mut out = ExpOutput::new(table);
    for label in ["kN", "kZplus"] {
        let fit = out.table.fit_power(label, -0.5)?;
        out.put(&format!("slope_{label}"), json!(fit.slope));
        out.gate(
            &format!("slope_{label}_in_band"),
            fit.slope >= HALFLINE_SLOPE_BAND.0 && fit.slope <= HALFLINE_SLOPE_BAND.1,
        );
        out.gate(&format!("monotone_{label}"), decreasing_within_noise(&out.table.rows_for(label)));
    }
    // Exact cross-check at a solvable size: within the disk the half-line
    // event coincides with its clipped version.
    let n0 = 12u32;
    let clipped = Region::segment(kappa, 0, n0 as i64);
    let field = DirichletField::solve(model, &Region::disk(n0 as f64), &clipped)?;
    let exact = 1.0 - field.hit_positive_time((0, 0));
    let e = disk_race(model, n0 as f64, Region::line(kappa, LineKind::NonNeg), true, samples, derive_seed(seed, 77), mc)?;
    push_estimate(&mut out.table, n0, None, "kN_cross", &e);
    let sig = (e.value - exact).abs() / e.stderr.max(1e-12);
    out.put("cross_exact", json!(exact));
    out.put("cross_sigmas", json!(sig));
    out.gate("cross_within_3_sigma", sig <= MC_SIGMAS);
    Ok(out)
}

/// Escape from the strip before the half-axis / negative multiples.
pub fn exp_strip(
    model: &WalkModel,
    kappa: u32,
    n_grid: &[u32],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("strip", model.hash(), seed);
    for (i, &n) in n_grid.iter().enumerate() {
        for (j, (label, kind)) in [("kN", LineKind::NonNeg), ("kZminus", LineKind::Neg)].iter().enumerate() {
            let e = strip_race(
                model,
                n as f64,
                Region::line(kappa, *kind),
                samples,
                derive_seed(seed, (i * 2 + j) as u64),
                mc,
            )?;
            push_estimate(&mut table, n, None, label, &e);
        }
    }
    let mut out = ExpOutput::new(table);
    for label in ["kN", "kZminus"] {
        let fit = out.table.fit_power(label, -0.5)?;
        out.put(&format!("slope_{label}"), json!(fit.slope));
        out.gate(
            &format!("slope_{label}_in_band"),
            fit.slope >= STRIP_SLOPE_BAND.0 && fit.slope <= STRIP_SLOPE_BAND.1,
        );
    }
    Ok(out)
}

/// Escape past radius n before the two-sided segment of multiples.
pub fn exp_line(
    model: &WalkModel,
    kappa: u32,
    n_grid: &[u32],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("line", model.hash(), seed);
    let seg = |n: u32| {
        // Clipped to the open disk so the exact solve and the race agree.
        Region::annulus_slice(
            Region::segment_two_sided(kappa, -(n as i64), n as i64),
            0.0,
            n as f64,
        )
    };
    for (i, &n) in n_grid.iter().enumerate() {
        let e = disk_race(model, n as f64, seg(n), false, samples, derive_seed(seed, i as u64), mc)?;
        push_estimate(&mut table, n, None, "segment", &e);
    }
    let mut out = ExpOutput::new(table);
    let fit = out.table.fit_power("segment", -1.0)?;
    out.put("slope", json!(fit.slope));
    out.gate("slope_in_band", fit.slope >= LINE_SLOPE_BAND.0 && fit.slope <= LINE_SLOPE_BAND.1);
    out.put("ratio_spread", json!(fit.ratio_spread()));
    out.gate("ratio_spread_ok", fit.ratio_spread() <= RATIO_SPREAD_MAX);
    // Exact cross-check at n = 12.
    let n0 = 12u32;
    let field = DirichletField::solve(model, &Region::disk(n0 as f64), &seg(n0))?;
    let exact = 1.0 - field.hit_positive_time((0, 0));
    let e = disk_race(model, n0 as f64, seg(n0), false, samples, derive_seed(seed, 91), mc)?;
    push_estimate(&mut out.table, n0, None, "segment_cross", &e);
    let sig = (e.value - exact).abs() / e.stderr.max(1e-12);
    out.put("cross_exact", json!(exact));
    out.put("cross_sigmas", json!(sig));
    out.gate("cross_within_3_sigma", sig <= MC_SIGMAS);
    Ok(out)
}

/// Product identity for strip escapes: the full-line event factors into the
/// reversed strictly-negative event and the nonpositive event.
pub fn exp_factorization(
    model: &WalkModel,
    kappa: u32,
    n_list: &[u32],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let reversed = model.reverse();
    // Symmetry across the y-axis makes the two one-sided events independent
    // under the forward law as well.
    let y_axis_symmetric = model
        .support()
        .iter()
        .all(|&((x, y), p)| (model.dist().pmf((-x, y)) - p).abs() == 0.0);
    let mut table = ScalingTable::new("factorization", model.hash(), seed);
    let mut worst: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for (i, &n) in n_list.iter().enumerate() {
        let s = |j: u64| derive_seed(seed, 10 * i as u64 + j);
        let e_full = strip_race(model, n as f64, Region::line(kappa, LineKind::All), samples, s(0), mc)?;
        let e_minus = strip_race(model, n as f64, Region::line(kappa, LineKind::NonPos), samples, s(1), mc)?;
        let e_tilde_rev =
            strip_race(&reversed, n as f64, Region::line(kappa, LineKind::Neg), samples, s(2), mc)?;
        push_estimate(&mut table, n, None, "E", &e_full);
        push_estimate(&mut table, n, None, "E_minus", &e_minus);
        push_estimate(&mut table, n, None, "Etilde_rev", &e_tilde_rev);
        let product = e_tilde_rev.value * e_minus.value;
        let disc = (e_full.value - product).abs();
        let sigma = (e_full.stderr.powi(2)
            + (e_minus.value * e_tilde_rev.stderr).powi(2)
            + (e_tilde_rev.value * e_minus.stderr).powi(2))
        .sqrt();
        worst = worst.max(disc / sigma.max(1e-300));
        if y_axis_symmetric {
            let e_tilde_fwd =
                strip_race(model, n as f64, Region::line(kappa, LineKind::Neg), samples, s(3), mc)?;
            push_estimate(&mut table, n, None, "Etilde_fwd", &e_tilde_fwd);
            let product2 = e_tilde_fwd.value * e_minus.value;
            let sigma2 = (e_full.stderr.powi(2)
                + (e_minus.value * e_tilde_fwd.stderr).powi(2)
                + (e_tilde_fwd.value * e_minus.stderr).powi(2))
            .sqrt();
            worst_sym = worst_sym.max((e_full.value - product2).abs() / sigma2.max(1e-300));
        }
    }
    let mut out = ExpOutput::new(table);
    out.put("worst_discrepancy_sigmas", json!(worst));
    out.gate("identity_within_3_sigma", worst <= MC_SIGMAS);
    if y_axis_symmetric {
        out.put("worst_symmetric_sigmas", json!(worst_sym));
        out.gate("symmetric_identity_within_3_sigma", worst_sym <= MC_SIGMAS);
    }
    Ok(out)
}

/// Probability that the half-axis is first entered exactly at the origin,
/// from the far side and from the near side.
pub fn exp_entry_point(
    model: &WalkModel,
    kappa: u32,
    n_grid_minus: &[u32],
    n_grid_plus: &[u32],
    samples_minus: u64,
    samples_plus: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("entry", model.hash(), seed);
    let rule = StoppingRule::new(vec![
        (
            "zero".to_string(),
            Trigger::Enter { region: Region::explicit([(0, 0)]), at_time_zero: false },
        ),
        (
            "line".to_string(),
            Trigger::Enter { region: Region::line(kappa, LineKind::NonNeg), at_time_zero: false },
        ),
    ]);
    for (i, &n) in n_grid_minus.iter().enumerate() {
        let e = estimate_event(
            model,
            (-(n as i64), 0),
            &rule,
            &["zero"],
            samples_minus,
            derive_seed(seed, i as u64),
            mc,
        )?;
        push_estimate(&mut table, n, None, "from_minus", &e);
    }
    for (i, &n) in n_grid_plus.iter().enumerate() {
        let e = estimate_event(
            model,
            (n as i64, 0),
            &rule,
            &["zero"],
            samples_plus,
            derive_seed(seed, 100 + i as u64),
            mc,
        )?;
        push_estimate(&mut table, n, None, "from_plus", &e);
    }
    let mut out = ExpOutput::new(table);
    let minus = out.table.rows_for("from_minus");
    let scaled: Vec<f64> = minus.iter().map(|r| r.estimate * (r.n as f64).sqrt()).collect();
    out.put("minus_sqrt_spread", json!(ratio_spread(&scaled)));
    out.gate("minus_sqrt_spread_ok", ratio_spread(&scaled) <= RATIO_SPREAD_MAX);
    let plus = out.table.rows_for("from_plus");
    let ns: Vec<f64> = plus.iter().map(|r| r.n as f64).collect();
    let scaled_plus: Vec<f64> = plus.iter().map(|r| r.estimate * (r.n as f64).powf(1.5)).collect();
    let trend = spearman(&ns, &scaled_plus);
    out.put("plus_n32_trend", json!(trend));
    out.gate("plus_no_upward_trend", trend <= TREND_SPEARMAN_MAX);
    let caps: u64 = out.table.rows.iter().map(|r| r.cap_hits).sum();
    let total: u64 = out.table.rows.iter().map(|r| r.n_samples).sum();
    out.put("cap_rate", json!(caps as f64 / total as f64));
    Ok(out)
}

/// Escape past radius n before a shifted half-axis, both shift directions.
pub fn exp_shifted(
    model: &WalkModel,
    kappa: u32,
    j_list: &[i64],
    n_grid: &[u32],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("shifted", model.hash(), seed);
    let mut salt = 0;
    for &n in n_grid {
        for &j in j_list {
            for (label, shift) in [("right", j), ("left", -j)] {
                let e = disk_race(
                    model,
                    n as f64,
                    Region::shifted_line(kappa, LineKind::NonNeg, shift),
                    false,
                    samples,
                    derive_seed(seed, salt),
                    mc,
                )?;
                salt += 1;
                push_estimate(&mut table, n, Some(j), label, &e);
            }
        }
    }
    let mut out = ExpOutput::new(table);
    // Right shift: p / sqrt(j/n) bounded; monotone in j at fixed n.
    let (norm_r, monotone) = {
        let right = out.table.rows_for("right");
        let norm: Vec<f64> = right
            .iter()
            .map(|r| r.estimate / ((r.k.unwrap() as f64) / (r.n as f64)).sqrt())
            .collect();
        let mut monotone = true;
        for &n in n_grid {
            let mut per_n: Vec<&&ScalingRow> = right.iter().filter(|r| r.n == n).collect();
            per_n.sort_by_key(|r| r.k.unwrap());
            monotone &= per_n
                .windows(2)
                .all(|w| w[1].estimate >= w[0].estimate - 2.0 * (w[0].stderr + w[1].stderr));
        }
        (norm, monotone)
    };
    out.put("right_ratio_spread", json!(ratio_spread(&norm_r)));
    out.gate("right_spread_ok", ratio_spread(&norm_r) <= RATIO_SPREAD_MAX);
    out.gate("right_monotone_in_shift", monotone);
    // Left shift: p * sqrt(j n) bounded.
    let norm_l: Vec<f64> = out
        .table
        .rows_for("left")
        .iter()
        .map(|r| r.estimate * ((r.k.unwrap() as f64) * (r.n as f64)).sqrt())
        .collect();
    out.put("left_ratio_spread", json!(ratio_spread(&norm_l)));
    out.gate("left_spread_ok", ratio_spread(&norm_l) <= RATIO_SPREAD_MAX);
    Ok(out)
}

/// Exit-overshoot moments over a radius grid.
pub fn exp_overshoot(
    model: &WalkModel,
    n_grid: &[u32],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("overshoot", model.hash(), seed);
    for (i, &n) in n_grid.iter().enumerate() {
        let rule =
            StoppingRule::new(vec![("exit".to_string(), Trigger::Exit { region: Region::disk(n as f64) })]);
        let e_abs = estimate_expectation(
            model,
            (0, 0),
            &rule,
            &Functional::AbsEnd,
            samples,
            derive_seed(seed, 2 * i as u64),
            mc,
        )?;
        let mut abs_row = e_abs.clone();
        abs_row.value -= n as f64;
        push_estimate(&mut table, n, None, "abs_excess", &abs_row);
        let e_log = estimate_expectation(
            model,
            (0, 0),
            &rule,
            &Functional::LogAbsEnd,
            samples,
            derive_seed(seed, 2 * i as u64 + 1),
            mc,
        )?;
        let mut log_row = e_log.clone();
        log_row.value -= (n as f64).ln();
        push_estimate(&mut table, n, None, "log_excess", &log_row);
    }
    let mut out = ExpOutput::new(table);
    let abs_rows = out.table.rows_for("abs_excess");
    let ns: Vec<f64> = abs_rows.iter().map(|r| r.n as f64).collect();
    let vals: Vec<f64> = abs_rows.iter().map(|r| r.estimate).collect();
    if let Ok(fit) = fit_power(&ns, &vals, 2.0 / 3.0) {
        out.put("excess_exponent", json!(fit.slope));
        out.gate("excess_exponent_ok", fit.slope <= OVERSHOOT_EXPONENT_MAX);
    }
    // log |S| >= log n holds pointwise, so the sample mean is nonnegative.
    let log_ok = out.table.rows_for("log_excess").iter().all(|r| r.estimate >= 0.0);
    out.gate("log_excess_nonnegative", log_ok);
    let max_step = model.max_step();
    if max_step <= 2.5 {
        // Bounded steps: the overshoot is below one step length, surely.
        let bounded = out
            .table
            .rows_for("abs_excess")
            .iter()
            .all(|r| r.estimate >= 0.0 && r.estimate <= max_step);
        out.gate("excess_within_one_step", bounded);
    }
    Ok(out)
}

/// Exact logarithmic asymptotics of the centered Green's function and the
/// origin-hitting probability.
pub fn exp_log_asymptotics(model: &WalkModel, n_grid: &[u32]) -> Result<ExpOutput, SuiteError> {
    let mut table = ScalingTable::new("logasym", model.hash(), 0);
    let sigma2 = model.sigma2();
    let mut band_values: Map<String, Value> = Map::new();
    let mut bands: Vec<(String, Vec<f64>)> =
        ["inner", "mid", "outer"].iter().map(|b| (b.to_string(), Vec::new())).collect();
    let mut adjacency_ok = true;
    let mut all_band_vals: Vec<f64> = Vec::new();
    for &n in n_grid {
        let solver = GreenSolver::new(model, &Region::disk(n as f64))?;
        let col0 = solver.column((0, 0))?;
        let g00 = col0[solver.sites().index((0, 0)).unwrap() as usize];
        let centered = std::f64::consts::PI * sigma2 * g00 - (n as f64).ln();
        table.push(ScalingRow {
            n,
            k: None,
            label: "green00_centered".into(),
            estimate: centered,
            stderr: 0.0,
            n_samples: 0,
            cap_hits: 0,
        });
        for (bi, frac) in [0.1, 0.5, 0.9].iter().enumerate() {
            let x = ((n as f64) * frac).round() as i64;
            let z = (x, 0);
            let h = solver.sites().index(z).map(|i| col0[i as usize] / g00).unwrap_or(0.0);
            let v = h * (n as f64).ln();
            bands[bi].1.push(v);
            all_band_vals.push(v);
            table.push(ScalingRow {
                n,
                k: Some(x),
                label: format!("hit_logn_{}", bands[bi].0),
                estimate: v,
                stderr: 0.0,
                n_samples: 0,
                cap_hits: 0,
            });
        }
        // One-step lower bound at a neighbor of the origin.
        for &((dx, dy), p) in model.support() {
            let z = (-dx, -dy);
            if let Some(i) = solver.sites().index(z) {
                let h = col0[i as usize] / g00;
                if h + 1e-12 < p {
                    adjacency_ok = false;
                }
            }
        }
    }
    let mut out = ExpOutput::new(table);
    let centered: Vec<f64> =
        out.table.rows_for("green00_centered").iter().map(|r| r.estimate).collect();
    let width = centered.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - centered.iter().cloned().fold(f64::INFINITY, f64::min);
    out.put("green00_bracket_width", json!(width));
    out.gate("green00_bracket_ok", width <= GREEN_LOG_BRACKET_MAX);
    for (name, vals) in &bands {
        let s = ratio_spread(vals);
        band_values.insert(name.clone(), json!(s));
        out.gate(&format!("band_{name}_spread_ok"), s <= LOGN_BAND_SPREAD_MAX);
    }
    out.put("band_spreads_over_n", Value::Object(band_values));
    // Reported for context: the spread across the whole annulus mixes the
    // log(n/|z|) profile and is large by design.
    out.put("whole_annulus_spread", json!(ratio_spread(&all_band_vals)));
    out.gate("one_step_lower_bound", adjacency_ok);
    Ok(out)
}

/// Uniform lower bound for hitting a dense set's annulus slice before
/// leaving the disk, by exact solves over all starts in the inner disk.
pub fn exp_gottahit(
    model: &WalkModel,
    kappa: u32,
    n_grid: &[u32],
    policies: &[Policy],
) -> Result<ExpOutput, SuiteError> {
    let basis = *model.basis();
    let max_n = *n_grid.iter().max().unwrap_or(&16);
    let mut table = ScalingTable::new("gottahit", model.hash(), 0);
    let mut min_overall = f64::INFINITY;
    let mut per_policy_spread_ok = true;
    for policy in policies {
        let dense = make_dense(&basis, kappa, max_n, *policy)?;
        let mut narrow_infs = Vec::new();
        for &n in n_grid {
            let nf = n as f64;
            let region_a = Region::dense(dense.clone());
            let narrow = Region::annulus_slice(region_a.clone(), nf / 4.0, nf / 2.0);
            let wide = Region::annulus_slice(region_a, nf / 4.0, nf);
            let disk = Region::disk(nf);
            let f_narrow = DirichletField::solve(model, &disk, &narrow)?;
            let f_wide = DirichletField::solve(model, &disk, &wide)?;
            let mut inf_narrow = f64::INFINITY;
            let mut inf_wide = f64::INFINITY;
            let mut nested_ok = true;
            for &z in f_narrow.domain_sites().points() {
                if basis.norm2(z) < (0.75 * nf) * (0.75 * nf) {
                    let hn = f_narrow.value(z);
                    let hw = f_wide.value(z);
                    inf_narrow = inf_narrow.min(hn);
                    inf_wide = inf_wide.min(hw);
                    if hw + 1e-10 < hn {
                        nested_ok = false;
                    }
                }
            }
            per_policy_spread_ok &= nested_ok;
            min_overall = min_overall.min(inf_narrow);
            narrow_infs.push(inf_narrow);
            for (label, v) in [("narrow", inf_narrow), ("wide", inf_wide)] {
                table.push(ScalingRow {
                    n,
                    k: None,
                    label: format!("inf_{label}_{}", policy.label()),
                    estimate: v,
                    stderr: 0.0,
                    n_samples: 0,
                    cap_hits: 0,
                });
            }
        }
        per_policy_spread_ok &= ratio_spread(&narrow_infs) <= 2.0;
    }
    let mut out = ExpOutput::new(table);
    out.put("min_inf", json!(min_overall));
    out.gate("uniformly_positive", min_overall > 0.05);
    out.gate("stable_across_n_and_policies", per_policy_spread_ok);
    Ok(out)
}

/// The flagship escape experiment: leave the doubled disk before touching
/// a dense set's slice between radii k and n.
#[allow(clippy::too_many_arguments)]
pub fn exp_beurling(
    model: &WalkModel,
    kappa: u32,
    k_grid: &[i64],
    n_grid: &[u32],
    policies: &[Policy],
    samples: u64,
    seed: u64,
    mc: McConfig,
) -> Result<ExpOutput, SuiteError> {
    for &k in k_grid {
        for &n in n_grid {
            if k <= 0 || 2 * k > n as i64 {
                return Err(SuiteError::Config(format!(
                    "beurling grid requires 0 < k <= n/2, got k={k}, n={n}"
                )));
            }
        }
    }
    let basis = *model.basis();
    let max_n = *n_grid.iter().max().unwrap();
    let mut table = ScalingTable::new("beurling", model.hash(), seed);
    let mut metrics = Map::new();
    let mut pass = true;
    let mut worst_spread: f64 = 0.0;
    let mut worst_trend: f64 = -1.0;
    for (pi, policy) in policies.iter().enumerate() {
        let dense = make_dense(&basis, kappa, max_n, *policy)?;
        let label = policy.label();
        let mut ratios = Vec::new();
        let mut salt = 1000 * pi as u64;
        for &k in k_grid {
            let mut per_k: Vec<(f64, f64)> = Vec::new();
            for &n in n_grid {
                let target =
                    Region::annulus_slice(Region::dense(dense.clone()), k as f64, n as f64);
                let rule = StoppingRule::new(vec![
                    ("hit".to_string(), Trigger::Enter { region: target, at_time_zero: false }),
                    ("exit".to_string(), Trigger::Exit { region: Region::disk(2.0 * n as f64) }),
                ]);
                let e = estimate_event(
                    model,
                    (0, 0),
                    &rule,
                    &["exit"],
                    samples,
                    derive_seed(seed, salt),
                    mc,
                )?;
                salt += 1;
                table.push(ScalingRow {
                    n,
                    k: Some(k),
                    label: label.clone(),
                    estimate: e.value,
                    stderr: e.stderr,
                    n_samples: e.n_samples,
                    cap_hits: e.cap_hits,
                });
                let r = e.value / ((k as f64) / (n as f64)).sqrt();
                ratios.push(r);
                per_k.push((n as f64, r));
            }
            let (ns, rs): (Vec<f64>, Vec<f64>) = per_k.into_iter().unzip();
            worst_trend = worst_trend.max(spearman(&ns, &rs));
        }
        worst_spread = worst_spread.max(ratio_spread(&ratios));
        // Exact cross-check at n = 12, k = 2 for this policy.
        let dense12 = make_dense(&basis, kappa, 12, *policy)?;
        let target = Region::annulus_slice(Region::dense(dense12), 2.0, 12.0);
        let field = DirichletField::solve(model, &Region::disk(24.0), &target)?;
        let exact = 1.0 - field.value((0, 0));
        let rule = StoppingRule::new(vec![
            ("hit".to_string(), Trigger::Enter { region: target.clone(), at_time_zero: false }),
            ("exit".to_string(), Trigger::Exit { region: Region::disk(24.0) }),
        ]);
        let e = estimate_event(model, (0, 0), &rule, &["exit"], samples, derive_seed(seed, salt + 7), mc)?;
        table.push(ScalingRow {
            n: 12,
            k: Some(2),
            label: format!("cross_{label}"),
            estimate: e.value,
            stderr: e.stderr,
            n_samples: e.n_samples,
            cap_hits: e.cap_hits,
        });
        let sig = (e.value - exact).abs() / e.stderr.max(1e-12);
        metrics.insert(format!("cross_exact_{label}"), json!(exact));
        metrics.insert(format!("cross_sigmas_{label}"), json!(sig));
        pass &= sig <= MC_SIGMAS;
    }
    metrics.insert("worst_ratio_spread".into(), json!(worst_spread));
    metrics.insert("worst_trend_spearman".into(), json!(worst_trend));
    pass &= worst_spread <= RATIO_SPREAD_MAX;
    pass &= worst_trend <= TREND_SPEARMAN_MAX;
    let mut out = ExpOutput::new(table);
    out.metrics = metrics;
    out.pass = pass;
    out.put("pass_spread", json!(worst_spread <= RATIO_SPREAD_MAX));
    out.put("pass_trend", json!(worst_trend <= TREND_SPEARMAN_MAX));
    Ok(out)
}
