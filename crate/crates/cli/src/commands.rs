use std::path::Path;

use phantomlab::asymptotics::{asymptote_half, asymptote_k2, transition_curve, AsymptoteRegime};
use phantomlab::haar::{compare_with_model, mc_average};
use phantomlab::kernel::KernelChecker;
use phantomlab::model::{
    auto_precision_bits, characteristic_rates, delta_sequences, steady_state, timescales,
};
use phantomlab::pseudospectrum::{
    epsilon_grid, is_real, kernel_cloud_radius, sweep, PerturbationConfig,
};
use phantomlab::spectral::coefficients::{coefficients, CoefficientMethod};
use phantomlab::spectral::magic::{magic_sum_exact, magic_sum_f, magic_sum_lognum, zero_pattern};
use phantomlab::{make_params, ArithMode, LogNum, ModelParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{emit, manifest, Cell, Table};
use crate::{
    Arith, CoeffMethod, CoefficientsArgs, Command, KernelArgs, MagicArgs, McArgs, OutputArgs,
    PseudoArgs, RatesArgs, SpectrumTable, ThetaArgs, TrajectoryArgs,
};

pub enum Failure {
    Usage(Vec<String>),
    Compute(String),
}

impl From<phantomlab::Error> for Failure {
    fn from(e: phantomlab::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Collects every violated constraint before giving up.
#[derive(Default)]
struct Problems(Vec<String>);

impl Problems {
    fn push(&mut self, p: impl Into<String>) {
        let p = p.into();
        if !self.0.contains(&p) {
            self.0.push(p);
        }
    }

    /// Model constraints for every cut in `ks`.
    fn params(&mut self, n: usize, ks: &[usize], d: u32) -> Vec<ModelParams> {
        let mut out = Vec::new();
        for &k in ks {
            match make_params(n, k, d) {
                Ok(p) => out.push(p),
                Err(phantomlab::Error::InvalidParams(msg)) => {
                    msg.split("; ").for_each(|m| self.push(m))
                }
                Err(e) => self.push(e.to_string()),
            }
        }
        out
    }

    fn finish(self) -> Result<(), Failure> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Failure::Usage(self.0))
        }
    }
}

fn log10(x: &LogNum) -> f64 {
    if x.is_zero() {
        f64::NEG_INFINITY
    } else {
        x.log10_abs()
    }
}

fn arith(mode: Arith, bits: Option<usize>, params: &ModelParams) -> ArithMode {
    match mode {
        Arith::Rational => ArithMode::Rational,
        Arith::Float64 => ArithMode::Float64,
        Arith::Extended => ArithMode::Extended(bits.unwrap_or_else(|| auto_precision_bits(params))),
    }
}

fn write<A: Serialize>(
    name: &str,
    args: &A,
    out: &OutputArgs,
    derived: Value,
    table: &Table,
) -> Outcome {
    let config = serde_json::to_value(args).expect("arguments serialize");
    let man = manifest(name, config, derived, table, out.format);
    emit(table, out.format, out.out.as_deref().map(Path::new), &man)
        .map_err(|e| Failure::Compute(format!("cannot write output: {e}")))
}

fn rates_json(p: &ModelParams) -> Value {
    let r = characteristic_rates(p);
    json!({ "alpha": p.alpha_f64(), "lambda_ph": r.lambda_ph, "lambda_1": r.lambda_1 })
}

fn timescales_json(ps: &[ModelParams]) -> Value {
    Value::Array(
        ps.iter()
            .map(|p| {
                let ts = timescales(p);
                json!({ "k": p.k(), "t_K": ts.t_k, "t_c": ts.t_c, "t_inf": ts.t_inf })
            })
            .collect(),
    )
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Trajectory(a) => trajectory(&a),
        Command::Rates(a) => rates(&a),
        Command::Coefficients(a) => coefficient_table(&a),
        Command::MagicSums(a) => magic(&a),
        Command::KernelCheck(a) => kernel_check(&a),
        Command::Theta(a) => theta(&a),
        Command::Pseudospectrum(a) => pseudospectrum(&a),
        Command::Montecarlo(a) => montecarlo(&a),
    }
}

fn trajectory(a: &TrajectoryArgs) -> Outcome {
    let mut pr = Problems::default();
    let ks: Vec<usize> = if a.k.is_empty() {
        (2..a.n.max(3)).collect()
    } else {
        a.k.clone()
    };
    let ps = pr.params(a.n, &ks, a.d);
    pr.finish()?;
    // both terms are positive, so I = I_inf + Delta I loses nothing in doubles
    let mode = arith(a.mode, None, &ps[0]);
    let samples = delta_sequences(&ps[0], &ks, a.t_max, mode)?;
    let steady = steady_state(&ps[0]);
    let mut table = Table::new(&["t", "k", "purity", "delta", "log10_abs_delta"]);
    for s in &samples {
        for (&k, d) in ks.iter().zip(&s.delta) {
            let dv = d.to_f64();
            table.push(vec![
                s.t.into(),
                k.into(),
                (steady[k - 1] + dv).into(),
                dv.into(),
                log10(d).into(),
            ]);
        }
    }
    let derived = json!({
        "rates": rates_json(&ps[0]),
        "timescales": timescales_json(&ps),
        "steady_state": ps.iter().map(|p| json!({ "k": p.k(), "purity": steady[p.k() - 1] })).collect::<Vec<_>>(),
        "arithmetic": mode.name(),
    });
    write("trajectory", a, &a.output, derived, &table)
}

fn rates(a: &RatesArgs) -> Outcome {
    let mut pr = Problems::default();
    let ps = pr.params(a.n, &a.k, a.d);
    if a.precision_bits.is_some_and(|b| b < 53) {
        pr.push("precision-bits must be at least 53");
    }
    pr.finish()?;
    let t_max = a.t_max.unwrap_or(4 * a.n);
    let mode = arith(a.mode, a.precision_bits, &ps[0]);
    let samples = delta_sequences(&ps[0], &a.k, t_max, mode)?;
    let mut table = Table::new(&["t", "k", "lambda_eff", "lambda_eff_minus_lambda1"]);
    for (i, k) in a.k.iter().enumerate() {
        for s in &samples[..t_max] {
            table.push(vec![
                s.t.into(),
                (*k).into(),
                s.rate[i].into(),
                s.rate_minus_lambda1[i].into(),
            ]);
        }
    }
    let derived = json!({ "rates": rates_json(&ps[0]), "timescales": timescales_json(&ps), "t_max": t_max, "arithmetic": mode.name() });
    write("rates", a, &a.output, derived, &table)
}

fn coefficient_table(a: &CoefficientsArgs) -> Outcome {
    let mut pr = Problems::default();
    let ps = pr.params(a.n, &[a.k], a.d);
    pr.finish()?;
    let method = match a.method {
        CoeffMethod::Exact => CoefficientMethod::ExactInnerProduct,
        CoeffMethod::Approx => CoefficientMethod::ClosedFormApprox,
    };
    let set = coefficients(&ps[0], method);
    let mut table = Table::new(&["j", "lambda_j", "sign", "log10_abs_c"]);
    for c in &set.entries {
        table.push(vec![
            c.j.into(),
            c.lambda.into(),
            i64::from(c.value.sign).into(),
            log10(&c.value).into(),
        ]);
    }
    write(
        "coefficients",
        a,
        &a.output,
        json!({ "rates": rates_json(&ps[0]) }),
        &table,
    )
}

fn magic(a: &MagicArgs) -> Outcome {
    let mut pr = Problems::default();
    let ks: Vec<usize> = if a.k.is_empty() {
        (2..a.n.max(3)).collect()
    } else {
        a.k.clone()
    };
    pr.params(a.n, &ks, 2);
    let (p_min, p_max) = (
        a.p_min.unwrap_or(-(a.n as i64)),
        a.p_max.unwrap_or(a.n as i64),
    );
    if p_min > p_max {
        pr.push(format!(
            "p-min must not exceed p-max (got {p_min} > {p_max})"
        ));
    }
    pr.finish()?;
    let rows: Vec<Vec<Cell>> = ks
        .par_iter()
        .map(|&k| -> Result<Vec<Vec<Cell>>, Failure> {
            let zeros = zero_pattern(a.n, k);
            (p_min..=p_max)
                .map(|p| {
                    let v = magic_sum_f(a.n, k, p)?;
                    let l = magic_sum_lognum(a.n, k, p)?;
                    let exact = magic_sum_exact(a.n, k, p)
                        .map(|r| r.to_string())
                        .unwrap_or_default();
                    Ok(vec![
                        k.into(),
                        p.into(),
                        v.into(),
                        log10(&l).into(),
                        zeros.contains(&p).into(),
                        Cell::Text(exact),
                    ])
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut table = Table::new(&["k", "p", "value", "log10_abs", "in_zero_pattern", "exact"]);
    rows.into_iter().for_each(|r| table.push(r));
    write(
        "magic-sums",
        a,
        &a.output,
        json!({ "p_min": p_min, "p_max": p_max }),
        &table,
    )
}

fn kernel_check(a: &KernelArgs) -> Outcome {
    let mut pr = Problems::default();
    if a.all_k == !a.k.is_empty() {
        pr.push("give exactly one of --k or --all-k");
    }
    let ks: Vec<usize> = if a.all_k {
        (2..a.n.max(3)).collect()
    } else {
        a.k.clone()
    };
    let ps = pr.params(a.n, &ks, a.d);
    pr.finish()?;
    let reports = ps
        .par_iter()
        .map(|p| {
            let mut ch = KernelChecker::new(p)?;
            (0..=ch.t_k())
                .map(|t| ch.check(t))
                .collect::<phantomlab::Result<Vec<_>>>()
        })
        .collect::<phantomlab::Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        "k",
        "t",
        "kernel",
        "spectral",
        "residual",
        "relative_residual",
        "series_vs_iteration",
        "passed",
    ]);
    let mut failed = Vec::new();
    for r in reports.iter().flatten() {
        if !r.passed {
            failed.push(format!(
                "(k={}, t={}: {:.3e})",
                r.k, r.t, r.relative_residual
            ));
        }
        table.push(vec![
            r.k.into(),
            r.t.into(),
            Cell::Text(r.kernel.to_string()),
            r.spectral.into(),
            r.residual.into(),
            r.relative_residual.into(),
            r.series_vs_iteration.into(),
            r.passed.into(),
        ]);
    }
    let derived = json!({ "tolerance": phantomlab::kernel::CANCELLATION_TOL, "timescales": timescales_json(&ps) });
    write("kernel-check", a, &a.output, derived, &table)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Compute(format!(
            "kernel/spectrum cancellation failed in {} cell(s): {}",
            failed.len(),
            failed.join(" ")
        )))
    }
}

fn theta(a: &ThetaArgs) -> Outcome {
    let mut pr = Problems::default();
    let ps = pr.params(a.n, &[a.k], a.d);
    if a.k != 2 && 2 * a.k != a.n {
        pr.push(format!(
            "theta curves exist for k = 2 and k = n/2 (got k={})",
            a.k
        ));
    }
    let t_c = a.n.saturating_sub(a.k + 1);
    let t_min = a.t_min.unwrap_or(t_c);
    if t_min < t_c {
        pr.push(format!("t-min must be at least t_c = {t_c} (got {t_min})"));
    }
    if t_min > a.t_max {
        pr.push(format!(
            "t-min must not exceed t-max (got {t_min} > {})",
            a.t_max
        ));
    }
    if a.t_step == 0 {
        pr.push("t-step must be positive");
    }
    pr.finish()?;
    let p = &ps[0];
    let ts: Vec<usize> = (t_min..=a.t_max).step_by(a.t_step).collect();
    let theory = transition_curve(p, &ts)?;
    let exact: Option<Vec<Option<f64>>> = if a.no_exact {
        None
    } else {
        let s = delta_sequences(p, &[a.k], a.t_max + 1, arith(a.exact_mode, None, p))?;
        Some(ts.iter().map(|&t| s[t].rate_minus_lambda1[0]).collect())
    };
    let asym = |t: usize, r| {
        if a.k == 2 {
            asymptote_k2(p, t, r)
        } else {
            asymptote_half(p, t, r)
        }
    };
    let mut table = Table::new(&[
        "t", "regime", "theory", "exact", "rel_err", "short", "long", "long_exp",
    ]);
    for (i, rv) in theory.iter().enumerate() {
        let ex = exact.as_ref().and_then(|e| e[i]);
        let rel = ex.map(|x| (rv.value - x).abs() / x.abs());
        let long = asym(rv.t, AsymptoteRegime::Long);
        table.push(vec![
            rv.t.into(),
            Cell::Text(rv.regime.as_str().into()),
            rv.value.into(),
            ex.into(),
            rel.into(),
            asym(rv.t, AsymptoteRegime::Short).value.into(),
            long.value.into(),
            long.exp_form.into(),
        ]);
    }
    let derived = json!({ "rates": rates_json(p), "t_c": t_c, "t_min": t_min });
    write("theta", a, &a.output, derived, &table)
}

fn parse_grid(s: &str) -> Option<(f64, f64, f64)> {
    let v: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse().ok())
        .collect::<Option<_>>()?;
    match v[..] {
        [from, step, to] if step > 0.0 && from <= to && from.is_finite() && to.is_finite() => {
            Some((from, step, to))
        }
        _ => None,
    }
}

fn pseudospectrum(a: &PseudoArgs) -> Outcome {
    let mut pr = Problems::default();
    let ps = pr.params(a.n, &[2], a.d);
    let grid = parse_grid(&a.eps_exp);
    if grid.is_none() {
        pr.push(format!(
            "eps-exp must be from:step:to with step > 0 and from <= to (got {:?})",
            a.eps_exp
        ));
    }
    if a.precision_bits < 53 {
        pr.push("precision-bits must be at least 53");
    }
    if a.realizations == 0 {
        pr.push("realizations must be at least 1");
    }
    if !(a.real_threshold > 0.0) {
        pr.push("real-threshold must be positive");
    }
    pr.finish()?;
    let (from, step, to) = grid.expect("validated");
    let config = PerturbationConfig {
        params: ps[0].clone(),
        epsilons: epsilon_grid(from, to, step),
        seed: a.seed,
        realizations: a.realizations,
        precision_bits: a.precision_bits,
        real_threshold: a.real_threshold,
    };
    let res = sweep(&config)?;
    let table = match a.table {
        SpectrumTable::Counts => {
            let mut t = Table::new(&[
                "log10_eps",
                "realization",
                "real_count",
                "theory_count",
                "kernel_radius",
            ]);
            for (row, snap) in res.summary.iter().zip(&res.snapshots) {
                t.push(vec![
                    row.epsilon.log10.into(),
                    row.realization.into(),
                    row.real_count.into(),
                    row.theory_count.into(),
                    kernel_cloud_radius(snap, a.n).into(),
                ]);
            }
            t
        }
        SpectrumTable::Spectra => {
            let mut t = Table::new(&["log10_eps", "realization", "index", "re", "im", "real"]);
            for snap in &res.snapshots {
                for (i, z) in snap.eigenvalues.iter().enumerate() {
                    t.push(vec![
                        snap.epsilon.log10.into(),
                        snap.realization.into(),
                        i.into(),
                        z.re.into(),
                        z.im.into(),
                        is_real(*z, snap.epsilon, a.n, a.real_threshold).into(),
                    ]);
                }
            }
            t
        }
    };
    write(
        "pseudospectrum",
        a,
        &a.output,
        json!({ "rates": rates_json(&ps[0]), "grid_points": config.epsilons.len() }),
        &table,
    )
}

fn montecarlo(a: &McArgs) -> Outcome {
    let mut pr = Problems::default();
    if a.n < 2 {
        pr.push(format!("n must be at least 2 (got {})", a.n));
    }
    if a.d < 2 {
        pr.push(format!("d must be at least 2 (got {})", a.d));
    }
    if a.realizations < phantomlab::haar::MIN_REALIZATIONS {
        pr.push(format!(
            "realizations must be at least {}",
            phantomlab::haar::MIN_REALIZATIONS
        ));
    }
    if a.compare {
        pr.params(a.n, &[2], a.d as u32);
    }
    pr.finish()?;
    let mc = mc_average(a.n, a.d, a.t_max, a.realizations, a.seed)?;
    let mut table;
    if a.compare {
        table = Table::new(&[
            "k",
            "t",
            "mean",
            "stderr",
            "realizations",
            "model",
            "within_3sigma",
        ]);
        let checks = compare_with_model(&mc, 3.0)?;
        for c in mc.cells() {
            let m = checks.iter().find(|x| x.k == c.k && x.t == c.t);
            table.push(vec![
                c.k.into(),
                c.t.into(),
                c.mean.into(),
                c.stderr.into(),
                mc.realizations.into(),
                m.map(|x| x.model).into(),
                m.map(|x| Cell::Bool(x.within))
                    .unwrap_or(Cell::Text(String::new())),
            ]);
        }
    } else {
        table = Table::new(&["k", "t", "mean", "stderr", "realizations"]);
        for c in mc.cells() {
            table.push(vec![
                c.k.into(),
                c.t.into(),
                c.mean.into(),
                c.stderr.into(),
                mc.realizations.into(),
            ]);
        }
    }
    write(
        "montecarlo",
        a,
        &a.output,
        json!({ "seed": mc.seed }),
        &table,
    )
}
