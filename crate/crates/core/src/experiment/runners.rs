//! One runner per experiment kind. Runners push checks as they go, so a failure part-way
//! still leaves the finished checks in the report.

use super::config::*;
use super::report::Check;
use crate::conductance::{audit_assumptions, vertex_weight, ConductanceModel, ModelSpec};
use crate::error::{Error, Result};
use crate::exact::{
    green_function, heat_kernel, hitting_distribution, lower_bound_check, nash_check, resolvent, semigroup_perturbation,
    time_reversal_check, truncated_kernel_check, weighted_poincare_check, WindowPolicy,
};
use crate::form::{energy_from_generator, RescaledForm};
use crate::generator::{build_generator, build_operator};
use crate::harnack::{counterexample_ratio, harmonic_solve, harnack_constant, BoundaryData, DataFamily};
use crate::homogenize::{
    a_matrix_at, cell_gradient_identity, clt_compare, convergence_diagnostics, form_side_sum, path_sum, ExtensionGrid,
    FieldKind, MatrixField, SmallMatrix,
};
use crate::lattice::Site;
use crate::reference::{bessel_kernel, bessel_plateau};
use crate::sampler::{
    doob_transfer_check, exit_statistics, exit_times, fit_gamma, jump_tightness, levy_system_check, simulate, Clock,
    JumpSampler, JumpWeight, LevyStop, PairFunction, ProcessKind, SimulateOptions,
};
use crate::window::{ExteriorPolicy, LatticeWindow};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub(crate) struct Ctx<'a> {
    pub seed: u64,
    pub out: PathBuf,
    pub base: Option<&'a Path>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Ctx<'_> {
    fn model(&self, spec: &ModelSpec) -> Result<ConductanceModel> {
        spec.build_in(self.base)
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(v)? + "\n";
        self.artifacts.push(name.to_string());
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.file(name)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic sub-seed for the `tag`-th independent stream family of a run.
pub(crate) fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn s(v: f64) -> String {
    format!("{v}")
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

pub(crate) fn run_kind(exp: &Experiment, ctx: &mut Ctx) -> Result<()> {
    match exp {
        Experiment::CheckAssumptions(p) => check_assumptions(p, ctx),
        Experiment::HeatKernel(p) => heat_kernel_run(p, ctx),
        Experiment::Identities(p) => identities(p, ctx),
        Experiment::Oracles(p) => oracles(p, ctx),
        Experiment::Reversal(p) => {
            for (i, c) in p.cases.iter().enumerate() {
                reversal_case(c, p.tol, p.gen_tol, &format!("reversal.{i}"), ctx)?;
            }
            Ok(())
        }
        Experiment::Nash(p) => nash(p, ctx),
        Experiment::LowerBound(p) => lower_bound(p, ctx),
        Experiment::ExitProb(p) => exit_prob(p, ctx),
        Experiment::Levy(p) => levy(p, ctx),
        Experiment::Tightness(p) => tightness(p, ctx),
        Experiment::Poincare(p) => poincare(p, ctx),
        Experiment::TruncatedKernel(p) => truncated(p, ctx),
        Experiment::Harnack(p) => harnack(p, ctx),
        Experiment::Counterexample(p) => counterexample(p, "counterexample", ctx),
        Experiment::Homogenize(p) => homogenize(p, ctx),
        Experiment::Clt(p) => clt(p, ctx),
    }
}

fn check_assumptions(p: &CheckAssumptions, ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model(&p.model)?;
    let region = p.region.build(m.dim())?;
    let rep = audit_assumptions(&m, &region, &p.audit);
    ctx.json("assumptions.json", &rep)?;
    for (a, want) in &p.expect {
        let got = rep.get(a).map(|e| e.verdict);
        ctx.push(Check::flag(format!("assumptions.{a}"), got == Some(*want), format!("expected {want:?}, got {got:?}")));
    }
    for (key, want) in &p.expect_constants {
        let (a, k) = key.split_once('.').ok_or_else(|| Error::Config(format!("constant key {key} is not <assumption>.<name>")))?;
        let got = rep.constant(a, k).unwrap_or(f64::NAN);
        ctx.push(Check::at_most(format!("assumptions.{key}"), (got - want).abs(), 1e-9, format!("expected {want}, got {got}")));
    }
    Ok(())
}

fn heat_kernel_run(p: &HeatKernel, ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model(&p.model)?;
    let d = m.dim();
    let w = p.window.build(d)?;
    let sources = p.sources.iter().map(|v| site(d, v, "source")).collect::<Result<Vec<_>>>()?;
    let op = build_operator(&m, &w, p.tol)?;
    let k = heat_kernel(op.as_ref(), &p.times, &sources, p.killed)?;
    k.write_csv(ctx.file("kernel.csv")?, p.floor)?;
    if p.export_coo {
        let gen = build_generator(&m, &w, p.tol)?;
        gen.write_coo(ctx.file("generator.coo")?)?;
    }
    let mut mass: f64 = 0.0;
    let mut low = f64::INFINITY;
    for si in 0..sources.len() {
        for ti in 0..p.times.len() {
            mass = mass.max(k.mass(ti, si));
            low = low.min(k.row(ti, si).iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    ctx.push(Check::at_most("heat_kernel.mass", mass, 1.0 + 1e-12, "largest total mass"));
    ctx.push(Check::at_least("heat_kernel.nonnegative", low, -1e-14, "smallest kernel value"));
    Ok(())
}

fn reversal_case(c: &ReversalCase, tol: f64, gen_tol: f64, id: &str, ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model(&c.model)?;
    let d = m.dim();
    let w = c.window.build(d)?;
    let op = build_operator(&m, &w, gen_tol)?;
    let avoid = c.avoid.iter().map(|v| site(d, v, "avoid")).collect::<Result<Vec<_>>>()?;
    let r = time_reversal_check(op.as_ref(), &avoid, &site(d, &c.x, "x")?, &site(d, &c.y, "y")?, c.t)?;
    ctx.push(Check::at_most(id, (r.lhs - r.rhs).abs(), tol, format!("lhs {:e}, rhs {:e}", r.lhs, r.rhs)));
    Ok(())
}

fn probe_f(s: &Site, d: usize) -> f64 {
    1.5 + (0.3 * s.0[..d].iter().sum::<i64>() as f64).cos()
}

fn probe_g(s: &Site, d: usize) -> f64 {
    (0.2 * s.0[0] as f64 + 0.1).sin() + 0.3 * (0.5 * s.0[d - 1] as f64).cos()
}

fn identities(p: &Identities, ctx: &mut Ctx) -> Result<()> {
    for (i, c) in p.duality.iter().enumerate() {
        let m = ctx.model(&c.model)?;
        let d = m.dim();
        let w = c.window.build(d)?.with_policy(ExteriorPolicy::TrackTargets { radius: c.track_radius });
        let gen = build_generator(&m, &w, p.gen_tol)?;
        let h = hitting_distribution(&gen, &site(d, &c.start, "start")?)?;
        let n = gen.len();
        ctx.push(Check::at_most(format!("identities.duality.{i}"), h.discrepancy, p.tol, format!("{n} states")));
        ctx.push(Check::at_most(format!("identities.duality.{i}.mass"), (h.total() - 1.0).abs(), p.tol, "exit law total mass"));
    }
    for (i, c) in p.reversal.iter().enumerate() {
        reversal_case(c, p.tol, p.gen_tol, &format!("identities.reversal.{i}"), ctx)?;
    }
    for (i, c) in p.resolvent.iter().enumerate() {
        let m = ctx.model(&c.model)?;
        let d = m.dim();
        let w = c.window.build(d)?;
        let gen = build_generator(&m, &w, p.gen_tol)?;
        let form = RescaledForm::new(c.scale, true);
        let mu = form.site_measure(d);
        let d2 = c.scale * c.scale;
        let f: Vec<f64> = w.sites().iter().map(|s| probe_f(s, d)).collect();
        let g: Vec<f64> = w.sites().iter().map(|s| probe_g(s, d)).collect();
        let fg: f64 = mu * f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        for &lambda in &c.lambdas {
            let rhs: Vec<f64> = f.iter().map(|v| v / d2).collect();
            let big_f = resolvent(&gen, lambda / d2, &rhs)?;
            let ff: f64 = mu * big_f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
            let lhs = energy_from_generator(&gen, &form, &big_f, &g) + lambda * ff;
            ctx.push(Check::at_most(
                format!("identities.resolvent.{i}.lambda{lambda}"),
                (lhs - fg).abs() / fg.abs().max(1.0),
                p.tol,
                format!("E(F,g) + lambda (F,g) = {lhs:e}, (f,g) = {fg:e}"),
            ));
        }
    }
    for (i, c) in p.cell_gradient.iter().enumerate() {
        let d = c.dim;
        let cells = c.cells.iter().map(|v| site(d, v, "cell")).collect::<Result<Vec<_>>>()?;
        let (mut lo, mut hi) = (Site::ORIGIN, Site::ORIGIN);
        for a in 0..d {
            lo.0[a] = cells.iter().map(|s| s.0[a]).min().unwrap_or(0) - 1;
            hi.0[a] = cells.iter().map(|s| s.0[a]).max().unwrap_or(0) + 2;
        }
        let grid = ExtensionGrid::restrict(d, c.n, lo, hi, |x| {
            x[0].sin() + x[0] * x[d - 1] + (0.5 * x[d - 1]).exp() + if d == 3 { x[1] * x[2] * x[0] } else { 0.0 }
        });
        let mut err: f64 = 0.0;
        for cell in &cells {
            for axis in 0..d {
                let (l, r) = cell_gradient_identity(&grid, cell, axis)?;
                err = err.max((l - r).abs());
            }
        }
        ctx.push(Check::at_most(format!("identities.cell_gradient.{i}"), err, p.strict_tol, format!("{} cells, n = {}", cells.len(), c.n)));
    }
    for (i, c) in p.path_sum.iter().enumerate() {
        let d = c.dim;
        let x = site(d, &c.x, "x")?;
        let g = |z: &Site| (0.37 * z.0[0] as f64).sin() + 0.02 * (z.0[1] * z.0[1]) as f64 + (0.3 * z.0[2] as f64).cos();
        let mut err: f64 = 0.0;
        for k in &c.steps {
            let k = site(d, k, "step")?;
            err = err.max((path_sum(d, &g, &x, &k) - (g(&(x + k)) - g(&x))).abs());
        }
        ctx.push(Check::at_most(format!("identities.path_sum.{i}"), err, p.strict_tol, format!("{} steps", c.steps.len())));
    }
    for (i, c) in p.form_field.iter().enumerate() {
        let m = ctx.model(&c.model)?;
        let d = m.dim();
        let scale = (c.n as f64).powi(1 - d as i32);
        let mut err: f64 = 0.0;
        for v in &c.points {
            let x = site(d, v, "point")?;
            let a = a_matrix_at(&m, c.n, c.radius, &x);
            for a_i in 0..d {
                for a_j in 0..d {
                    let lhs = form_side_sum(&m, c.n, c.radius, &x, a_i, a_j);
                    let rhs = scale * a.get(a_i, a_j);
                    err = err.max((lhs - rhs).abs() / rhs.abs().max(1.0));
                }
            }
        }
        ctx.push(Check::at_most(format!("identities.form_field.{i}"), err, p.strict_tol, format!("{} points, n = {}", c.points.len(), c.n)));
    }
    Ok(())
}

fn oracles(p: &Oracles, ctx: &mut Ctx) -> Result<()> {
    let nn = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build()?;
    let mut rows = Vec::new();
    for &t in &p.bessel_times {
        let half = (t + 12.0 * (2.0 * t).sqrt() + 30.0).ceil() as i64;
        let w = LatticeWindow::cube(1, Site::ORIGIN, half)?;
        let op = build_operator(&nn, &w, 1e-13)?;
        let k = heat_kernel(op.as_ref(), &[t], &[Site::ORIGIN], false)?;
        let got = k.p(0, 0, &Site::ORIGIN);
        let (want, _) = bessel_kernel(t, 0);
        rows.push(vec![s(t), s(got), s(want)]);
        ctx.push(Check::at_most(format!("oracles.bessel.t{t}"), (got - want).abs(), p.bessel_tol, format!("p = {got:e}, e^-2t I0(2t) = {want:e}")));
    }
    if !rows.is_empty() {
        ctx.table("bessel.csv", &["t", "kernel", "closed_form"], rows)?;
    }
    for &len in &p.ruin_lengths {
        let w = LatticeWindow::new_box(1, Site::new(&[1]), Site::new(&[len - 1]))?
            .with_policy(ExteriorPolicy::TrackTargets { radius: None });
        let gen = build_generator(&nn, &w, 1e-13)?;
        let mut err: f64 = 0.0;
        for x in 1..len {
            let h = hitting_distribution(&gen, &Site::new(&[x]))?;
            // the oracle is P(hit 0 before len) on {1..len-1}
            err = err.max((h.prob(&Site::new(&[0])) - crate::reference::gamblers_ruin(x, len - 1)).abs());
        }
        ctx.push(Check::at_most(format!("oracles.ruin.m{len}"), err, p.ruin_tol, "max over starts of |P(hit 0 before m) - (1 - x/m)|"));
    }
    for (i, c) in p.single_site.iter().enumerate() {
        let m = ctx.model(&c.model)?;
        let x = site(m.dim(), &c.site, "site")?;
        let w = LatticeWindow::from_sites(m.dim(), vec![x])?;
        let gen = build_generator(&m, &w, 1e-15)?;
        let g = green_function(&gen)?.get(0, 0);
        let (nu, tail) = vertex_weight(&m, &x, 1e-15)?;
        let allowed = 4.0 * f64::EPSILON + tail / nu;
        ctx.push(Check::at_most(format!("oracles.single_site.{i}"), (g * nu - 1.0).abs(), allowed, format!("G = {g:e}, 1/nu = {:e}", 1.0 / nu)));
    }
    Ok(())
}

fn nash(p: &Nash, ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for c in &p.cases {
        let m = ctx.model(&c.model)?;
        let prof = nash_check(&m, &p.t_grid, &p.policy)?;
        for r in &prof.rows {
            rows.push(vec![c.label.clone(), s(r.t), s(r.value), s(r.upper), s(r.leakage)]);
        }
        ctx.push(Check::at_most(
            format!("nash.{}", c.label),
            prof.max_upper(),
            c.bound,
            format!("half-width {}, R* {}", prof.half_width, prof.r_star),
        ));
    }
    ctx.table("nash.csv", &["label", "t", "value", "upper", "leakage"], rows)?;
    if let Some(t) = p.plateau_t {
        let nn = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build()?;
        let prof = nash_check(&nn, &[t], &p.policy)?;
        let v = prof.rows[0].value;
        let asym = bessel_kernel(t, 0).0 * t.sqrt();
        ctx.push(Check::at_most(
            "nash.plateau_d1",
            (v / bessel_plateau() - 1.0).abs(),
            p.plateau_tol,
            format!("p(t,0,0) sqrt(t) = {v:.9} at t = {t}; Bessel value {asym:.9}; 1/(2 sqrt(pi)) = {:.9}", bessel_plateau()),
        ));
        // The profile approaches the plateau from above (I_0(x) e^{-x} √(2πx) = 1 + 1/(8x) + ...),
        // so this carries the plateau value itself for freezing.
        ctx.push(Check::at_most(
            "nash.plateau_d1.value",
            v,
            bessel_plateau() * (1.0 + p.plateau_tol),
            format!("exact series value {asym:.12}"),
        ));
    }
    Ok(())
}

fn lower_bound(p: &LowerBound, ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for c in &p.cases {
        let m = ctx.model(&c.model)?;
        let res = lower_bound_check(&m, &p.t_grid, p.r_factor, &p.policy)?;
        for r in &res {
            rows.push(vec![c.label.clone(), s(r.t), s(r.unkilled), s(r.killed), s(r.gap)]);
        }
        let free = res.iter().map(|r| r.unkilled).fold(f64::INFINITY, f64::min);
        let killed = res.iter().map(|r| r.killed).fold(f64::INFINITY, f64::min);
        ctx.push(Check::at_least(format!("lower_bound.{}.free", c.label), free, c.bound, "min over t, |x-y| <= 2 sqrt(t)"));
        ctx.push(Check::at_least(
            format!("lower_bound.{}.killed", c.label),
            killed,
            c.bound,
            format!("killed outside B(x, {} sqrt(t))", p.r_factor),
        ));
    }
    ctx.table("lower_bound.csv", &["label", "t", "free", "killed", "gap"], rows)
}

fn exit_prob(p: &ExitProb, ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for (ci, c) in p.cases.iter().enumerate() {
        let m = ctx.model(&c.model)?;
        let x = site(m.dim(), &c.start, "start")?;
        let sampler = JumpSampler::new(&m, p.tol)?;
        for (clock, name) in [(Clock::Rate, "Y"), (Clock::Discrete, "X")] {
            let tag = (ci as u64) << 8 | (clock == Clock::Discrete) as u64;
            let d0 = p.scales[0];
            let times = exit_times(&sampler, clock, x, p.a * d0, f64::INFINITY, p.n_paths, mix(ctx.seed, tag << 8));
            let gamma = fit_gamma(&times, d0, p.quantile);
            for (k, &scale) in p.scales.iter().enumerate() {
                let e = exit_statistics(&sampler, clock, x, p.a, scale, gamma, p.n_paths, mix(ctx.seed, tag << 8 | (k as u64 + 1)));
                rows.push(vec![c.label.clone(), name.into(), s(scale), s(gamma), s(e.freq.p), s(e.freq.sigma)]);
                ctx.push(Check::at_most(
                    format!("exit.{}.{name}.D{scale}", c.label),
                    e.freq.p,
                    0.5 + p.sigmas * e.freq.sigma,
                    format!("gamma = {gamma:.6} fitted at D = {d0}"),
                ));
            }
        }
    }
    ctx.table("exit.csv", &["label", "process", "D", "gamma", "p", "sigma"], rows)
}

fn levy(p: &Levy, ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model(&p.model)?;
    let x = site(m.dim(), &p.start, "start")?;
    let sampler = JumpSampler::new(&m, p.tol)?;
    let mut rows = Vec::new();
    for (fi, f) in p.functions.iter().enumerate() {
        let weight = match f.weight.as_str() {
            "long_jumps" => JumpWeight::LongJumps { min_len: f.param },
            "capped_length" => JumpWeight::CappedLength { cap: f.param },
            other => return Err(Error::Config(format!("unknown jump weight {other}"))),
        };
        let pf = PairFunction { marked: f.marked_radius.map(|r| (x, r)), weight };
        for (si, st) in p.stops.iter().enumerate() {
            let (stop, label) = match *st {
                LevyStopSpec::Fixed { t } => (LevyStop::Fixed { t }, format!("fixed{t}")),
                LevyStopSpec::ExitBall { radius, cap } => (LevyStop::ExitBall { center: x, radius, cap }, format!("exit{radius}")),
            };
            let r = levy_system_check(&sampler, x, &pf, &stop, p.n_paths, mix(ctx.seed, (fi as u64) << 16 | si as u64));
            rows.push(vec![f.label.clone(), label.clone(), s(r.lhs), s(r.rhs), s(r.sigma)]);
            ctx.push(Check::at_most(
                format!("levy.{}.{label}", f.label),
                (r.lhs - r.rhs).abs(),
                p.sigmas * r.sigma,
                format!("lhs {:.6} rhs {:.6} sigma {:.2e}", r.lhs, r.rhs, r.sigma),
            ));
        }
    }
    ctx.table("levy.csv", &["function", "stop", "lhs", "rhs", "sigma"], rows)
}

fn tightness(p: &Tightness, ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model(&p.model)?;
    let sampler = JumpSampler::new(&m, p.tol)?;
    let rows = jump_tightness(&sampler, m.envelope(), &p.n_grid, p.eta, p.t0, p.n_paths, ctx.seed);
    for r in &rows {
        ctx.push(Check::at_most(
            format!("tightness.n{}.envelope", r.n),
            r.freq.p,
            r.envelope + p.sigmas * r.freq.sigma,
            format!("p = {:.3e}, union bound {:.3e}, series {:.3e}", r.freq.p, r.envelope, r.series),
        ));
        ctx.push(Check::at_most(
            format!("tightness.n{}.series", r.n),
            r.freq.p,
            r.series + p.sigmas * r.freq.sigma,
            "against t0 eta^-2 sum_{i >= eta sqrt(n)} phi(i) (i+1)^{d+1}",
        ));
    }
    for w in rows.windows(2) {
        let slack = p.sigmas * (w[0].freq.sigma.powi(2) + w[1].freq.sigma.powi(2)).sqrt();
        ctx.push(Check::at_most(
            format!("tightness.n{}.monotone", w[1].n),
            w[1].freq.p - w[0].freq.p,
            slack,
            format!("p(n={}) = {:.3e} after p(n={}) = {:.3e}", w[1].n, w[1].freq.p, w[0].n, w[0].freq.p),
        ));
    }
    let table = rows.iter().map(|r| vec![r.n.to_string(), s(r.freq.p), s(r.freq.sigma), s(r.envelope), s(r.series)]).collect();
    ctx.table("tightness.csv", &["n", "p", "sigma", "envelope", "series"], table)
}

fn poincare(p: &Poincare, ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for &d in &p.dims {
        for &scale in &p.scales {
            let rep = weighted_poincare_check(d, scale, &p.families, p.extent, ctx.seed)?;
            for r in &rep.rows {
                rows.push(vec![d.to_string(), s(scale), format!("{:?}", r.family), s(r.variance), s(r.energy), s(r.ratio)]);
            }
            ctx.push(Check::at_most(format!("poincare.d{d}.D{scale}"), rep.max_ratio(), p.bound, "largest ratio over the family"));
            if let Some(opt) = rep.optimum {
                ctx.push(Check::at_most(
                    format!("poincare.d{d}.D{scale}.optimum"),
                    rep.max_ratio(),
                    opt * (1.0 + 1e-9),
                    format!("generalised-eigenvalue optimum {opt:.6}"),
                ));
            }
        }
    }
    ctx.table("poincare.csv", &["dim", "D", "family", "variance", "energy", "ratio"], rows)
}

fn truncated(p: &TruncatedKernel, ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for c in &p.cases {
        let m = ctx.model(&c.model)?;
        for &lambda in &p.lambdas {
            let res = truncated_kernel_check(&m, lambda, p.scale, &p.t_grid, &p.policy)?;
            for r in &res {
                rows.push(vec![c.label.clone(), s(lambda), s(r.t), s(r.value)]);
            }
            let v = res.iter().map(|r| r.value).fold(0.0, f64::max);
            ctx.push(Check::at_most(format!("truncated.{}.lambda{lambda}", c.label), v, c.bound, format!("D = {}", p.scale)));
        }
    }
    ctx.table("truncated.csv", &["label", "lambda", "t", "value"], rows)?;
    if let Some(q) = &p.perturbation {
        let m = ctx.model(&q.model)?;
        let fit = semigroup_perturbation(&m, q.lambda, q.scale, &q.times, q.half_width, q.tol)?;
        let rows = fit.times.iter().zip(&fit.norms).map(|(t, n)| vec![s(*t), s(*n), s(fit.c * t)]).collect();
        ctx.table("perturbation.csv", &["t", "norm", "fit"], rows)?;
        ctx.push(Check::at_most("truncated.perturbation.fit", fit.fit_error, q.max_fit_error, format!("slope {:.4e}", fit.c)));
    }
    Ok(())
}

fn harnack(p: &Harnack, ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model(&p.model)?;
    let center = site(m.dim(), &p.center, "center")?;
    let rows = harnack_constant(&m, center, &p.radii, DataFamily::PointMasses { shell: p.shell }, p.theta, p.tol)?;
    let table = rows
        .iter()
        .map(|r| vec![s(r.radius), s(r.constant), r.sites.to_string(), r.core_sites.to_string(), r.members.to_string(), r.skipped.to_string()])
        .collect();
    ctx.table("harnack.csv", &["R", "constant", "sites", "core_sites", "members", "skipped"], table)?;
    let worst = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    let skipped: usize = rows.iter().map(|r| r.skipped).sum();
    ctx.push(Check::at_most("harnack.constant", worst, p.bound, format!("radii {:?}, {skipped} members vanished on a core", p.radii)));
    // Constant data reproduce themselves: a cheap end-to-end check of the solve.
    let w = LatticeWindow::ball(m.dim(), center, p.radii[0])?;
    let sol = harmonic_solve(&m, &w, &BoundaryData::constant(1.0), p.tol)?;
    ctx.push(Check::at_most(
        "harnack.constant_data",
        max_abs(sol.h.iter().map(|v| v - 1.0)),
        1e-9,
        format!("harmonicity {:.2e}, residual {:.2e}", sol.harmonicity, sol.residual),
    ));
    if let Some(c) = &p.counterexample {
        counterexample(c, "harnack.counterexample", ctx)?;
    }
    Ok(())
}

fn counterexample(p: &Counterexample, prefix: &str, ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for &idx in &p.scales {
        rows.push(counterexample_ratio(&p.b, &p.a, idx, p.delta, p.n_paths, mix(ctx.seed, idx as u64 + 1))?);
    }
    let table = rows
        .iter()
        .map(|r| vec![r.b.to_string(), s(r.radius), r.y.0[0].to_string(), r.hit.hits.to_string(), s(r.hit.p), s(r.ratio), s(r.ratio_ci.0), s(r.ratio_ci.1)])
        .collect();
    ctx.table("counterexample.csv", &["b", "radius", "y1", "hits", "p", "ratio", "ratio_lo", "ratio_hi"], table)?;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        ctx.push(Check::at_least(
            format!("{prefix}.b{}.growth", b.b),
            b.ratio / a.ratio,
            p.min_growth,
            format!("ratio {:.4} -> {:.4}", a.ratio, b.ratio),
        ));
        ctx.push(Check::flag(
            format!("{prefix}.b{}.separated", b.b),
            b.ratio_ci.0 > a.ratio_ci.1,
            format!("CI [{:.4}, {:.4}] vs [{:.4}, {:.4}]", a.ratio_ci.0, a.ratio_ci.1, b.ratio_ci.0, b.ratio_ci.1),
        ));
    }
    Ok(())
}

fn matrix(d: usize, v: &[f64], what: &str) -> Result<SmallMatrix> {
    if v.len() == 1 {
        return Ok(SmallMatrix::scaled_identity(d, v[0]));
    }
    SmallMatrix::from_rows(d, v).map_err(|_| Error::Config(format!("{what} needs 1 or {} entries", d * d)))
}

fn homogenize(p: &Homogenize, ctx: &mut Ctx) -> Result<()> {
    for c in &p.cases {
        let d = c.family.dim();
        let a_want = c.a.as_ref().map(|v| matrix(d, v, "a")).transpose()?;
        let b_want = c.b.as_ref().map(|v| matrix(d, v, "b")).transpose()?;
        let (mut ea, mut eb, mut ep) = (0.0f64, 0.0f64, 0.0f64);
        for &n in &c.n_grid {
            let m = c.family.member(n)?;
            let fa = MatrixField::compute(&m, n, c.radius, c.extent, FieldKind::A);
            let fb = MatrixField::compute(&m, n, c.radius, c.extent, FieldKind::B);
            fa.write_csv(ctx.file(&format!("field_{}_n{n}_a.csv", c.label))?)?;
            fb.write_csv(ctx.file(&format!("field_{}_n{n}_b.csv", c.label))?)?;
            if let Some(w) = &a_want {
                ea = ea.max(fa.values.iter().map(|v| v.dist(w)).fold(0.0, f64::max));
            }
            if let Some(w) = &b_want {
                eb = eb.max(fb.values.iter().map(|v| v.dist(w)).fold(0.0, f64::max));
            }
            if let Some([odd, even]) = c.b_by_parity {
                for (pt, v) in fb.points.iter().zip(&fb.values) {
                    let want = if pt.0[0].rem_euclid(2) == 1 { odd } else { even };
                    ep = ep.max((v.get(0, 0) - want).abs());
                }
            }
        }
        if a_want.is_some() {
            ctx.push(Check::at_most(format!("homogenize.{}.a", c.label), ea, c.tol, "max entry gap to the expected a^n"));
        }
        if b_want.is_some() {
            ctx.push(Check::at_most(format!("homogenize.{}.b", c.label), eb, c.tol, "max entry gap to the expected b^n"));
        }
        if c.b_by_parity.is_some() {
            ctx.push(Check::at_most(format!("homogenize.{}.b_parity", c.label), ep, c.tol, "b^n against its odd/even values"));
        }
        if !c.verdicts.is_empty() {
            let limit = c.limit.as_ref().map(|v| matrix(d, v, "limit")).transpose()?;
            let rep = convergence_diagnostics(&c.family, &c.n_grid, c.radius, c.extent, limit, None, 1e-9)?;
            ctx.json(&format!("diagnostics_{}.json", c.label), &rep)?;
            for (k, want) in &c.verdicts {
                let got = rep.verdict(k);
                ctx.push(Check::flag(format!("homogenize.{}.{k}", c.label), got == want, format!("expected {want}, got {got}")));
            }
        }
    }
    Ok(())
}

fn clt(p: &Clt, ctx: &mut Ctx) -> Result<()> {
    let mut table = Vec::new();
    for (ci, c) in p.cases.iter().enumerate() {
        let d = c.family.dim();
        let limit = matrix(d, &c.limit, "limit")?;
        let rows = clt_compare(&c.family, &c.n_grid, c.t, &limit, c.nu_bar, p.n_paths, mix(ctx.seed, ci as u64), p.tol)?;
        for r in &rows {
            for i in 0..d {
                table.push(vec![
                    c.label.clone(),
                    r.n.to_string(),
                    r.process.clone(),
                    (i + 1).to_string(),
                    s(r.mean[i]),
                    s(r.covariance[i][i]),
                    s(r.expected[i]),
                    s(r.variance_se[i]),
                    s(r.ks[i]),
                    s(r.span[i]),
                ]);
            }
            let z = (0..d).map(|i| (r.covariance[i][i] - r.expected[i]).abs() / r.variance_se[i]).fold(0.0, f64::max);
            let id = format!("clt.{}.n{}.{}", c.label, r.n, r.process);
            ctx.push(Check::at_most(
                format!("{id}.variance"),
                z,
                p.sigmas,
                format!("variance {:.5} vs {:.5} (se {:.2e}); digest {}", r.covariance[0][0], r.expected[0], r.variance_se[0], &r.digest[..12]),
            ));
            ctx.push(Check::at_most(format!("{id}.ks"), r.ks.iter().copied().fold(0.0, f64::max), p.ks_max, format!("spans {:?}", r.span)));
        }
    }
    ctx.table("clt.csv", &["label", "n", "process", "coord", "mean", "variance", "expected", "se", "ks", "span"], table)?;
    if let Some(q) = &p.doob {
        let r = doob_transfer_check(q.n, q.t0, q.eta, q.n_paths, mix(ctx.seed, 0xD00B));
        ctx.push(Check::at_most(
            "clt.doob",
            r.freq.p,
            r.bound + p.sigmas * r.freq.sigma,
            format!("P(sup|T_k - k| > n eta) = {:.3e}, bound {:.3e}", r.freq.p, r.bound),
        ));
    }
    if p.log_paths > 0 {
        if let Some(c) = p.cases.first() {
            let n = c.n_grid[0];
            let m = c.family.member(n)?;
            let opts = SimulateOptions { tol: p.tol, log_events: true, ..Default::default() };
            let ens = simulate(ProcessKind::Rescaled { n }, &m, Site::ORIGIN, c.t, p.log_paths, mix(ctx.seed, 0x1065), &opts)?;
            ens.write_log(ctx.file("paths.csv")?)?;
        }
    }
    Ok(())
}

fn models_of(exp: &Experiment) -> Vec<&ModelSpec> {
    match exp {
        Experiment::CheckAssumptions(p) => vec![&p.model],
        Experiment::HeatKernel(p) => vec![&p.model],
        Experiment::Identities(p) => p
            .duality
            .iter()
            .map(|c| &c.model)
            .chain(p.reversal.iter().map(|c| &c.model))
            .chain(p.resolvent.iter().map(|c| &c.model))
            .chain(p.form_field.iter().map(|c| &c.model))
            .collect(),
        Experiment::Oracles(p) => p.single_site.iter().map(|c| &c.model).collect(),
        Experiment::Reversal(p) => p.cases.iter().map(|c| &c.model).collect(),
        Experiment::Nash(p) => p.cases.iter().map(|c| &c.model).collect(),
        Experiment::LowerBound(p) => p.cases.iter().map(|c| &c.model).collect(),
        Experiment::ExitProb(p) => p.cases.iter().map(|c| &c.model).collect(),
        Experiment::Levy(p) => vec![&p.model],
        Experiment::Tightness(p) => vec![&p.model],
        Experiment::TruncatedKernel(p) => p.cases.iter().map(|c| &c.model).chain(p.perturbation.iter().map(|q| &q.model)).collect(),
        Experiment::Harnack(p) => vec![&p.model],
        Experiment::Poincare(_) | Experiment::Counterexample(_) | Experiment::Homogenize(_) | Experiment::Clt(_) => vec![],
    }
}

fn tolerances_of(exp: &Experiment) -> Vec<f64> {
    match exp {
        Experiment::HeatKernel(p) => vec![p.tol],
        Experiment::Identities(p) => vec![p.tol],
        Experiment::Reversal(p) => vec![p.tol],
        Experiment::ExitProb(p) => vec![p.tol],
        Experiment::Levy(p) => vec![p.tol],
        Experiment::Tightness(p) => vec![p.tol],
        Experiment::TruncatedKernel(p) => p.perturbation.iter().map(|q| q.tol).collect(),
        Experiment::Harnack(p) => vec![p.tol],
        Experiment::Homogenize(p) => p.cases.iter().map(|c| c.tol).collect(),
        Experiment::Clt(p) => vec![p.tol],
        _ => vec![],
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn policy_ok(p: &WindowPolicy) -> Result<()> {
    if !(p.safety > 0.0 && p.leakage_budget > 0.0 && p.tol > 0.0 && p.max_attempts > 0) {
        return Err(bad("window policy entries must be positive"));
    }
    Ok(())
}

/// Parameter validation without running anything expensive.
pub(crate) fn validate(exp: &Experiment) -> Result<()> {
    for m in models_of(exp) {
        m.build()?;
    }
    if tolerances_of(exp).iter().any(|t| !(*t > 0.0)) {
        return Err(bad("tolerances must be positive"));
    }
    match exp {
        Experiment::CheckAssumptions(p) => {
            p.region.build(p.model.dim())?;
        }
        Experiment::HeatKernel(p) => {
            positive(&p.times, "times")?;
            if !(p.floor >= 0.0) {
                return Err(bad("floor must be non-negative"));
            }
            p.window.build(p.model.dim())?;
            if p.sources.is_empty() {
                return Err(bad("at least one source is required"));
            }
            for v in &p.sources {
                site(p.model.dim(), v, "source")?;
            }
        }
        Experiment::Identities(p) => {
            for c in &p.duality {
                p_window(&c.window, &c.model, &c.start)?;
            }
            for c in &p.reversal {
                p_window(&c.window, &c.model, &c.x)?;
                p_window(&c.window, &c.model, &c.y)?;
            }
            for c in &p.resolvent {
                c.window.build(c.model.dim())?;
                positive(&c.lambdas, "lambdas")?;
                if c.scale < 1.0 {
                    return Err(bad("scale must be at least 1"));
                }
            }
            for c in &p.cell_gradient {
                if c.n == 0 || c.cells.is_empty() {
                    return Err(bad("cell_gradient needs n > 0 and cells"));
                }
            }
        }
        Experiment::Oracles(p) => {
            if !p.bessel_times.is_empty() {
                positive(&p.bessel_times, "bessel_times")?;
            }
            if p.ruin_lengths.iter().any(|m| *m < 2) {
                return Err(bad("ruin lengths must be at least 2"));
            }
        }
        Experiment::Reversal(p) => {
            for c in &p.cases {
                p_window(&c.window, &c.model, &c.x)?;
            }
        }
        Experiment::Nash(p) => {
            positive(&p.t_grid, "t_grid")?;
            policy_ok(&p.policy)?;
        }
        Experiment::LowerBound(p) => {
            positive(&p.t_grid, "t_grid")?;
            policy_ok(&p.policy)?;
            positive(&[p.r_factor], "r_factor")?;
        }
        Experiment::ExitProb(p) => {
            positive(&p.scales, "scales")?;
            positive(&[p.a], "a")?;
            if !(p.quantile > 0.0 && p.quantile <= 0.5) {
                return Err(bad("quantile must lie in (0, 0.5]"));
            }
            paths(p.n_paths)?;
        }
        Experiment::Levy(p) => {
            paths(p.n_paths)?;
            for f in &p.functions {
                if !["long_jumps", "capped_length"].contains(&f.weight.as_str()) {
                    return Err(bad(format!("unknown jump weight {}", f.weight)));
                }
            }
        }
        Experiment::Tightness(p) => {
            paths(p.n_paths)?;
            positive(&[p.eta, p.t0], "eta and t0")?;
            if p.n_grid.is_empty() || p.n_grid.contains(&0) {
                return Err(bad("n_grid must be non-empty and positive"));
            }
        }
        Experiment::Poincare(p) => {
            positive(&p.scales, "scales")?;
            if p.scales.iter().any(|d| *d < 1.0) {
                return Err(bad("scales must be at least 1"));
            }
            if p.dims.iter().any(|d| !(1..=3).contains(d)) {
                return Err(bad("dims must lie in 1..=3"));
            }
        }
        Experiment::TruncatedKernel(p) => {
            positive(&p.lambdas, "lambdas")?;
            positive(&p.t_grid, "t_grid")?;
            if p.t_grid.iter().any(|t| *t > 1.0) {
                return Err(bad("t_grid must lie in (0, 1]"));
            }
            policy_ok(&p.policy)?;
        }
        Experiment::Harnack(p) => {
            positive(&p.radii, "radii")?;
            positive(&[p.shell, p.theta], "shell and theta")?;
            if let Some(c) = &p.counterexample {
                counterexample_ok(c)?;
            }
        }
        Experiment::Counterexample(c) => counterexample_ok(c)?,
        Experiment::Homogenize(p) => {
            for c in &p.cases {
                c.family.member(c.n_grid.first().copied().unwrap_or(1))?;
                if c.n_grid.is_empty() || c.n_grid.contains(&0) {
                    return Err(bad("n_grid must be non-empty and positive"));
                }
            }
        }
        Experiment::Clt(p) => {
            paths(p.n_paths)?;
            for c in &p.cases {
                c.family.member(c.n_grid.first().copied().unwrap_or(1))?;
                matrix(c.family.dim(), &c.limit, "limit")?;
                positive(&[c.t], "t")?;
            }
        }
    }
    Ok(())
}

fn p_window(w: &crate::window::WindowSpec, m: &ModelSpec, x: &[i64]) -> Result<()> {
    let win = w.build(m.dim())?;
    if !win.contains(&site(m.dim(), x, "point")?) {
        return Err(bad(format!("{x:?} is not in the window")));
    }
    Ok(())
}

fn paths(n: usize) -> Result<()> {
    if n < 2 {
        return Err(bad("n_paths must be at least 2"));
    }
    Ok(())
}

fn counterexample_ok(c: &Counterexample) -> Result<()> {
    ModelSpec::HarnackCounterexample { dim: 3, b: c.b.clone(), a: c.a.clone() }.build()?;
    if c.scales.iter().any(|i| *i >= c.b.len()) || c.scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("counterexample scales must be increasing indices into b"));
    }
    paths(c.n_paths)
}
