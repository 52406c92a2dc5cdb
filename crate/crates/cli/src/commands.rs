use hdplab_core::entropy::kl;
use hdplab_core::ldp::{ball_probability, empirical_rate, mc_ball_probability, zero_cell_experiment};
use hdplab_core::moments::{lln_experiment, mc_integral_variance, mc_stick_moments, MC_SIGMA};
use hdplab_core::rates::{rate_i, rate_i_upper_bounds, rate_j_partition};
use hdplab_core::samplers::sample_coupled_hdp;
use hdplab_core::{
    CosineFamily, Error, LdpExperiment, OptimizerSettings, Params, RadiusSchedule, RateCoefficients, RateJInstance, SamplerConfig,
    SubProbVector,
};
use serde::Serialize;
use serde_json::Value;

use crate::args::{LdpArgs, LdpMode, LlnArgs, MomentsArgs, RateIArgs, RateJArgs, SampleArgs, Schedule};
use crate::output::{Cell, Table};

#[derive(Debug)]
pub enum Failure {
    /// Invalid flags or parameter values.
    Usage(String),
    /// A numerical routine could not deliver the requested accuracy.
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Accuracy { .. } | Error::StepSize { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub table: Table,
    /// Some check fell outside its tolerance.
    pub flagged: bool,
}

type CmdResult = Result<Outcome, Failure>;

/// Tool version, subcommand, every parameter, then the seed.
fn header(command: &str, args: &impl Serialize, seed: u64) -> Vec<(String, Value)> {
    let mut h = vec![
        ("tool".to_string(), Value::String(format!("hdplab {}", env!("CARGO_PKG_VERSION")))),
        ("command".to_string(), Value::String(command.to_string())),
    ];
    if let Ok(Value::Object(map)) = serde_json::to_value(args) {
        h.extend(map);
    }
    h.push(("seed".to_string(), Value::from(seed)));
    h
}

fn coefficients(c: f64) -> Result<RateCoefficients, Failure> {
    if c.is_finite() && c > 0.0 {
        Ok(RateCoefficients::from_ratio(c))
    } else {
        Err(Failure::Usage(format!("--c must be finite and positive, got {c}")))
    }
}

pub fn sample(args: &SampleArgs, seed: u64) -> CmdResult {
    let params = args.conc.params().map_err(Failure::Usage)?;
    let cfg = match (args.n, args.eps) {
        (Some(n), _) => SamplerConfig::fixed(seed, n),
        (None, eps) => SamplerConfig::tolerance(seed, eps.unwrap_or(1e-6))?,
    };
    let (dp, hdp) = sample_coupled_hdp(&params, &args.base.dist, &cfg);
    let mut table = Table::new(&["index", "atom", "v", "z"]);
    table.header = header("sample", args, seed);
    table.header.push(("sticks".into(), Value::from(dp.len())));
    for (i, ((x, v), z)) in dp
        .locations()
        .iter()
        .zip(dp.weights().prefix())
        .zip(hdp.weights().prefix())
        .enumerate()
    {
        table.push(vec![Cell::from(i + 1), Cell::from(*x), Cell::from(*v), Cell::from(*z)]);
    }
    table.footer.push(("tail_v".into(), Cell::Num(dp.weights().tail_mass())));
    table.footer.push(("tail_z".into(), Cell::Num(hdp.weights().tail_mass())));
    Ok(Outcome { table, flagged: false })
}

pub fn moments(args: &MomentsArgs, seed: u64) -> CmdResult {
    let params = args.conc.params().map_err(Failure::Usage)?;
    if args.n < 4 || args.max_index == 0 {
        return Err(Failure::Usage("need --n >= 4 and --max-index >= 1".into()));
    }
    let mut reports = mc_stick_moments(&params, &SamplerConfig::fixed(seed, args.max_index), args.n, args.max_index);
    let cfg = SamplerConfig::tolerance(seed.wrapping_add(1), args.eps)?;
    reports.push(mc_integral_variance(&params, &args.base.dist, &args.test_fn.f, &cfg, args.n)?);

    let mut table = Table::new(&["quantity", "index", "closed_form", "mc_estimate", "std_error", "n_samples", "flagged"]);
    table.header = header("moments", args, seed);
    table.header.push(("sigma_threshold".into(), Value::from(MC_SIGMA)));
    let flagged = reports.iter().any(|r| r.flagged);
    for r in reports {
        table.push(vec![
            Cell::Text(r.quantity),
            Cell::from(r.index),
            Cell::Num(r.closed_form),
            Cell::Num(r.mc_estimate),
            Cell::Num(r.std_error),
            Cell::from(r.n_samples),
            Cell::from(r.flagged),
        ]);
    }
    Ok(Outcome { table, flagged })
}

pub fn lln(args: &LlnArgs, seed: u64) -> CmdResult {
    if args.grid.is_empty() || args.grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::Usage("--grid must be a non-empty increasing list".into()));
    }
    if args.n < 2 {
        return Err(Failure::Usage("need --n >= 2".into()));
    }
    let grid = args
        .grid
        .iter()
        .map(|&alpha| Params::from_concentrations(alpha, alpha / args.c))
        .collect::<hdplab_core::Result<Vec<_>>>()?;
    let cfg = SamplerConfig::tolerance(seed, args.eps)?;
    let rows = lln_experiment(&grid, &args.base.dist, &CosineFamily, args.terms, &cfg, args.n)?;

    let mut table = Table::new(&[
        "alpha",
        "beta",
        "sticks",
        "d_mean",
        "d_std_error",
        "d_exact",
        "d_flagged",
        "rho_mean",
        "rho_std_error",
        "d_bias_bound",
        "rho_bias_bound",
    ]);
    table.header = header("lln", args, seed);
    let flagged = rows.iter().any(|r| r.d_flagged);
    for r in rows {
        table.push(vec![
            Cell::Num(r.alpha),
            Cell::Num(r.beta),
            Cell::from(r.sticks),
            Cell::Num(r.d_mean),
            Cell::Num(r.d_std_error),
            Cell::Num(r.d_exact),
            Cell::from(r.d_flagged),
            Cell::Num(r.rho_mean),
            Cell::Num(r.rho_std_error),
            Cell::Num(r.d_bias_bound),
            Cell::Num(r.rho_bias_bound),
        ]);
    }
    Ok(Outcome { table, flagged })
}

pub fn rate_i_cmd(args: &RateIArgs, seed: u64) -> CmdResult {
    let z = SubProbVector::new(args.z.clone())?;
    let coeffs = coefficients(args.c)?;
    let settings = OptimizerSettings {
        seed,
        ..OptimizerSettings::default()
    };
    let series = rate_i(&z, coeffs, args.m_max, args.tol, &settings)?;
    let bounds = rate_i_upper_bounds(&z, coeffs)?;

    let mut table = Table::new(&["m", "rate"]);
    table.header = header("rate-i", args, seed);
    table.header.push(("a".into(), Value::from(coeffs.a)));
    table.header.push(("b".into(), Value::from(coeffs.b)));
    for (m, v) in series.by_m.iter().enumerate() {
        table.push(vec![Cell::from(m + 1), Cell::Num(*v)]);
    }
    table.footer.push(("converged".into(), Cell::from(series.converged)));
    for (name, b) in ["bound_u_zero", "bound_u_w", "bound_first_stick"].iter().zip(bounds) {
        table.footer.push((name.to_string(), Cell::Num(b)));
    }
    let flagged = bounds.iter().any(|b| series.value > b + 1e-9);
    Ok(Outcome { table, flagged })
}

pub fn rate_j_cmd(args: &RateJArgs, seed: u64) -> CmdResult {
    let coeffs = coefficients(args.c)?;
    let inst = RateJInstance::new(args.r.clone(), args.p.clone(), coeffs)?;
    let res = rate_j_partition(&inst)?;
    let bound = coeffs.min() * kl(inst.r(), inst.p())?;

    let m = inst.len();
    let mut columns = vec!["value".to_string()];
    columns.extend((1..=m).map(|i| format!("q_{i}")));
    let mut table = Table::new(&columns.iter().map(String::as_str).collect::<Vec<_>>());
    table.header = header("rate-j", args, seed);
    table.header.push(("a".into(), Value::from(coeffs.a)));
    table.header.push(("b".into(), Value::from(coeffs.b)));
    let mut row = vec![Cell::Num(res.value)];
    match &res.q {
        Some(q) => row.extend(q.iter().map(|x| Cell::Num(*x))),
        None => row.extend((0..m).map(|_| Cell::Empty)),
    }
    table.push(row);
    table.footer.push(("bound".into(), Cell::Num(bound)));
    let flagged = res.value > bound + 1e-9;
    Ok(Outcome { table, flagged })
}

pub fn ldp(args: &LdpArgs, seed: u64) -> CmdResult {
    let center = match args.center.as_slice() {
        [v1, u1] => (*v1, *u1),
        _ => return Err(Failure::Usage("--center takes two values v1,u1".into())),
    };
    if args.grid_step.is_nan() || args.grid_step <= 0.0 || args.grid_step >= 1.0 {
        return Err(Failure::Usage("--grid-step must lie in (0, 1)".into()));
    }
    let exp = LdpExperiment::new(args.c, args.r1, center, args.delta, args.gamma_grid.clone())?;
    let rows = match args.mode {
        LdpMode::Ball => empirical_rate(&exp, args.grid_step)?,
        LdpMode::ZeroCell => {
            let schedule = match args.schedule {
                Schedule::Quarter => RadiusSchedule::QuarterPower,
                Schedule::Fixed => RadiusSchedule::Fixed(args.delta),
            };
            zero_cell_experiment(&exp, schedule, args.grid_step)?
        }
    };

    let mut table = Table::new(&[
        "kind",
        "gamma",
        "alpha",
        "beta",
        "delta",
        "probability",
        "quad_error",
        "empirical_rate",
        "reference",
    ]);
    table.header = header("ldp", args, seed);
    let coeffs = exp.coefficients();
    table.header.push(("a".into(), Value::from(coeffs.a)));
    table.header.push(("b".into(), Value::from(coeffs.b)));
    for r in &rows {
        table.push(vec![
            Cell::from("gamma"),
            Cell::Num(r.gamma),
            Cell::Num(r.alpha),
            Cell::Num(r.beta),
            Cell::Num(r.delta),
            Cell::Num(r.probability),
            Cell::Num(r.quad_error),
            Cell::Num(r.empirical_rate),
            Cell::Num(r.reference),
        ]);
    }
    if args.mode == LdpMode::Ball {
        let mut row = vec![Cell::from("reference")];
        row.extend((0..3).map(|_| Cell::Empty));
        row.push(Cell::Num(args.delta));
        row.extend((0..3).map(|_| Cell::Empty));
        row.push(Cell::Num(rows[0].reference));
        table.push(row);
    }

    let mut flagged = false;
    if args.mc_samples > 0 {
        let params = exp.params_at(args.mc_gamma)?;
        let delta = match (args.mode, args.schedule) {
            (LdpMode::ZeroCell, Schedule::Quarter) => RadiusSchedule::QuarterPower.radius(args.mc_gamma),
            _ => args.delta,
        };
        let quad = ball_probability(&params, args.r1, center, delta)?;
        let cfg = SamplerConfig::fixed(seed, 1);
        let mc = mc_ball_probability(&params, args.r1, center, delta, args.mc_samples, &cfg)?;
        flagged = mc.z_score(quad.value) > MC_SIGMA;
        table.footer.push(("mc_gamma".into(), Cell::Num(args.mc_gamma)));
        table.footer.push(("mc_quadrature".into(), Cell::Num(quad.value)));
        table.footer.push(("mc_estimate".into(), Cell::Num(mc.mean)));
        table.footer.push(("mc_std_error".into(), Cell::Num(mc.std_error)));
        table.footer.push(("mc_flagged".into(), Cell::from(flagged)));
    }
    Ok(Outcome { table, flagged })
}
