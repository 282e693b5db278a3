//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};
use std::time::Instant;

use demonsim::output::write_csv;
use demonsim::{run_sweep, SweepConfig};
use demonsim_core::{
    enumerate_outcomes, equilibrium_distribution, error_from_pulse, estimate, ft_estimate,
    ion_composite_protocol, measure, sample_trajectories, state_flip_protocol, szilard_protocol,
    CoarseVariant, ErrorModel, FeedbackProtocol, IonCompositeModel, MeasurementOutcomeTable,
    PulsePrep, SigmaKind, ThermalContext, WorkReport,
};

const THETAS: [f64; 3] = [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2];
const SEED: u64 = 20_240_601;

fn eps_grid(from: usize, to: usize) -> Vec<f64> {
    (from..=to).map(|i| i as f64 * 0.05).collect()
}

struct Setup {
    theta_c: f64,
    ctx: ThermalContext,
    protocol: FeedbackProtocol,
    table: MeasurementOutcomeTable,
}

#[derive(Clone, Copy, Debug)]
enum Proto {
    Szilard,
    Flip,
    Ion,
}

const ALL_PROTOCOLS: [Proto; 3] = [Proto::Szilard, Proto::Flip, Proto::Ion];

fn setup(proto: Proto, theta_c: f64, eps: f64) -> Setup {
    let ctx = PulsePrep::new(theta_c).unwrap().context().unwrap();
    let space = ctx.two_level_space();
    let protocol = match proto {
        Proto::Szilard => szilard_protocol(&space).unwrap(),
        Proto::Flip => state_flip_protocol(&space).unwrap(),
        Proto::Ion => {
            ion_composite_protocol(&IonCompositeModel::new(0.11, 0.14, 30).unwrap(), &ctx).unwrap()
        }
    };
    let table = measure(&equilibrium_distribution(&ctx, &space), eps).unwrap();
    Setup {
        theta_c,
        ctx,
        protocol,
        table,
    }
}

impl Setup {
    fn report(&self) -> WorkReport {
        demonsim_core::ensemble_report(&self.protocol, &self.table, &self.ctx, 0.88).unwrap()
    }

    fn label(&self, proto: Proto) -> String {
        format!(
            "{proto:?} theta_c={:.4} eps={:.2}",
            self.theta_c,
            self.table.epsilon()
        )
    }
}

/// Every (protocol, θ_c, ε) on the full 0..1 grid.
fn full_grid(protocols: &[Proto]) -> Vec<(Proto, Setup)> {
    let mut out = Vec::new();
    for &p in protocols {
        for &t in &THETAS {
            for e in eps_grid(0, 20) {
                out.push((p, setup(p, t, e)));
            }
        }
    }
    out
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: &[String], summary: String) -> Self {
        let pass = failures.is_empty();
        let detail = if pass {
            summary
        } else {
            format!(
                "{summary}; {} failure(s), first: {}",
                failures.len(),
                failures
                    .iter()
                    .take(3)
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(" | ")
            )
        };
        Outcome { pass, detail }
    }
}

fn c1_fluctuation_theorems() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_exact: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut points = 0;
    for (i, &t) in THETAS.iter().enumerate() {
        for (j, e) in eps_grid(1, 19).into_iter().enumerate() {
            let s = setup(Proto::Ion, t, e);
            let r = s.report();
            let batch =
                sample_trajectories(&s.protocol, &s.table, 100_000, SEED + (i * 100 + j) as u64)
                    .unwrap();
            let mc = ft_estimate(&batch).unwrap();
            for (k, kind) in SigmaKind::ALL.into_iter().enumerate() {
                let exact = r.ft(kind).value;
                worst_exact = worst_exact.max((exact - 1.0).abs());
                if (exact - 1.0).abs() >= 1e-10 {
                    failures.push(format!(
                        "{} {}: exact {exact}",
                        s.label(Proto::Ion),
                        kind.name()
                    ));
                }
                let z = (mc[k].mean - exact).abs() / mc[k].stderr;
                worst_z = worst_z.max(z);
                if !mc[k].agrees_with(exact, 3.0) {
                    failures.push(format!(
                        "{} {}: mc {:.6} +- {:.2e}",
                        s.label(Proto::Ion),
                        kind.name(),
                        mc[k].mean,
                        mc[k].stderr
                    ));
                }
            }
            points += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 10.0 {
        failures.push(format!("runtime {elapsed:.2}s"));
    }
    Outcome::new(
        &failures,
        format!("ion, {points} points x 3 sigma; max |exact-1| = {worst_exact:.1e}; max MC |z| = {worst_z:.2}; {elapsed:.2}s"),
    )
}

fn c2_deficit_identity() -> Outcome {
    let mut failures = Vec::new();
    let grid = full_grid(&ALL_PROTOCOLS);
    for (p, s) in &grid {
        let r = s.report();
        for kind in SigmaKind::ALL {
            let ft = r.ft(kind);
            if (ft.value + ft.support_deficit - 1.0).abs() >= 1e-10 {
                failures.push(format!(
                    "{} {}: {} + {}",
                    s.label(*p),
                    kind.name(),
                    ft.value,
                    ft.support_deficit
                ));
            }
        }
    }
    let worked = setup(Proto::Szilard, FRAC_PI_3, 0.2).report().ft_cond.value;
    if (worked - 0.9125).abs() >= 1e-10 {
        failures.push(format!("worked point <e^-sigma_cond> = {worked}"));
    }
    Outcome::new(
        &failures,
        format!("{} points; Szilard worked point {worked:.12}", grid.len()),
    )
}

fn c3_nonnegativity() -> Outcome {
    let mut failures = Vec::new();
    let mut atoms = 0;
    let mut worst: f64 = 0.0;
    let grid = full_grid(&ALL_PROTOCOLS);
    for (p, s) in &grid {
        let r = s.report();
        for (name, v) in [
            ("cond", r.mean_sigma_cond),
            ("uncond", r.mean_sigma_uncond),
            ("info", r.mean_sigma_info),
        ] {
            if v < -1e-12 {
                failures.push(format!("{} <sigma_{name}> = {v}", s.label(*p)));
            }
        }
        if r.mean_sigma_cond < r.mean_sigma_info - 1e-12 {
            failures.push(format!("{} <sigma_cond> < <sigma_info>", s.label(*p)));
        }
        let en = enumerate_outcomes(&s.protocol, &s.table).unwrap();
        for atom in en.realized() {
            let l = atom.ledger.as_ref().unwrap();
            let d = (l.sigma_cond - (l.sigma_uncond + l.sigma_info)).abs();
            worst = worst.max(d);
            atoms += 1;
            if d >= 1e-12 {
                failures.push(format!(
                    "{} atom {:?}: delta sigma {d:e}",
                    s.label(*p),
                    (atom.x0, atom.y, atom.xc)
                ));
            }
        }
    }
    Outcome::new(
        &failures,
        format!(
            "{} points, {atoms} realized outcomes; max |delta sigma| = {worst:.1e}",
            grid.len()
        ),
    )
}

fn c4_work_and_bounds() -> Outcome {
    let mut failures = Vec::new();
    let grid = full_grid(&ALL_PROTOCOLS);
    for (p, s) in &grid {
        let r = s.report();
        if let Proto::Szilard = p {
            let p_up = s.table.prior().prob(1);
            let closed = (1.0 - r.epsilon) * p_up;
            if (r.w_out - closed).abs() >= 1e-12 {
                failures.push(format!("{} W_out {} vs {closed}", s.label(*p), r.w_out));
            }
        }
        if !r.bound_chain_holds(1e-12) {
            failures.push(format!(
                "{} bound chain: W {} bound {} dF {}",
                s.label(*p),
                r.w_out,
                r.info_bound,
                r.delta_f
            ));
        }
        if !r.identities_hold() {
            failures.push(format!(
                "{} residuals {:e} {:e}",
                s.label(*p),
                r.cond_identity_residual,
                r.heat_identity_residual
            ));
        }
    }
    let r = setup(Proto::Szilard, FRAC_PI_3, 0.2).report();
    let t_sigma_info = r.temperature * r.mean_sigma_info;
    if (r.w_out - 0.2).abs() >= 1e-12 {
        failures.push(format!("worked W_out {}", r.w_out));
    }
    // Quoted to four decimals; the enumeration gives 0.35141 and 0.02025.
    if (r.delta_f - 0.3515).abs() > 5e-4 || (t_sigma_info - 0.0202).abs() > 5e-4 {
        failures.push(format!("worked dF {} T<sigma_I> {t_sigma_info}", r.delta_f));
    }
    Outcome::new(
        &failures,
        format!(
            "{} points; worked W_out = {:.12}, dF = {:.5}, T<sigma_I> = {:.5}",
            grid.len(),
            r.w_out,
            r.delta_f,
            t_sigma_info
        ),
    )
}

fn c5_coarse_violation() -> Outcome {
    let mut failures = Vec::new();
    for (p, s) in full_grid(&ALL_PROTOCOLS) {
        let r = s.report();
        let marginal = r.coarse_check(CoarseVariant::Marginal);
        if marginal.violated || marginal.margin < -1e-12 {
            failures.push(format!(
                "{} marginal violated, margin {}",
                s.label(p),
                marginal.margin
            ));
        }
    }
    for (p, s) in full_grid(&[Proto::Szilard]) {
        let r = s.report();
        let cycle = r.coarse_check(CoarseVariant::CycleImproper);
        let expected = -r.beta * r.w_out;
        if r.epsilon < 1.0 && !cycle.violated {
            failures.push(format!("{} cycle-improper not violated", s.label(p)));
        }
        if (cycle.margin - expected).abs() > 1e-12 {
            failures.push(format!(
                "{} margin {} vs {expected}",
                s.label(p),
                cycle.margin
            ));
        }
    }
    let worked = setup(Proto::Szilard, FRAC_PI_3, 0.2).report();
    let m = worked.coarse_check(CoarseVariant::CycleImproper).margin;
    if (m + 0.2197).abs() > 5e-5 {
        failures.push(format!("worked margin {m}"));
    }
    Outcome::new(
        &failures,
        format!("cycle-improper on Szilard, marginal on all protocols; worked margin {m:.6}"),
    )
}

fn c6_efficacies() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (p, s) in full_grid(&[Proto::Szilard]) {
        let r = s.report();
        if r.delta_f > 0.0 && r.mean_delta_s_cond > 1e-12 {
            let (o, e, m) = (r.eta_out.unwrap(), r.eta_ext.unwrap(), r.eta_max.unwrap());
            checked += 1;
            if !(e <= o + 1e-12 && o <= m + 1e-12 && m <= 1.0 + 1e-12) {
                failures.push(format!("{} eta {e} {o} {m}", s.label(p)));
            }
        }
    }
    let mut limits = Vec::new();
    for &t in &THETAS {
        let near = setup(Proto::Szilard, t, 1.0 - 1e-6)
            .report()
            .eta_out
            .unwrap();
        let at = setup(Proto::Szilard, t, 1.0).report().eta_out.unwrap();
        limits.push(near.abs().max(at.abs()));
        if near.abs() > 1e-5 || at.abs() > 1e-12 {
            failures.push(format!(
                "theta_c={t:.4} eta_out near eps=1: {near}, at 1: {at}"
            ));
        }
    }
    Outcome::new(
        &failures,
        format!(
            "Szilard, kappa = 0.88, {checked} points with dF > 0; max |eta_out| at eps -> 1: {:.1e}",
            limits.iter().copied().fold(0.0, f64::max)
        ),
    )
}

/// Points where the ordering cannot hold because `W_out < 0` makes `κW_out > W_out`.
fn c6_note() -> String {
    let mut counts = BTreeMap::new();
    for (p, s) in full_grid(&[Proto::Flip, Proto::Ion]) {
        let r = s.report();
        if let (Some(o), Some(e), Some(m)) = (r.eta_out, r.eta_ext, r.eta_max) {
            if r.delta_f > 0.0 && !(e <= o + 1e-12 && o <= m + 1e-12 && m <= 1.0 + 1e-12) {
                let entry = counts.entry(format!("{p:?}")).or_insert((0, true));
                entry.0 += 1;
                entry.1 &= r.w_out < 0.0;
            }
        }
    }
    counts
        .iter()
        .map(|(k, (n, neg))| format!("{k}: {n} points out of order (all with W_out < 0: {neg})"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn c7_calibration() -> Outcome {
    let mut failures = Vec::new();
    let prep = PulsePrep::new(FRAC_PI_6).unwrap();
    let t = prep.context().unwrap().temperature();
    if (t - 0.380).abs() > 0.005 {
        failures.push(format!("T(pi/6) = {t}"));
    }
    let eps = |theta: f64| error_from_pulse(&ErrorModel::new(1.94, theta).unwrap());
    if eps(0.0) != 0.0 {
        failures.push(format!("eps(0) = {}", eps(0.0)));
    }
    let mut prev = -1.0;
    let mut worst_fit: f64 = 0.0;
    for i in 0..=400 {
        let theta = i as f64 * 0.01;
        let e = eps(theta);
        if e <= prev && theta > 0.0 {
            failures.push(format!("not monotone at theta = {theta}"));
        }
        prev = e;
        let fit = (-1.94 * theta).exp();
        worst_fit = worst_fit.max(((1.0 - e) - fit).abs());
    }
    if worst_fit > 1e-15 {
        failures.push(format!(
            "1 - eps deviates from exp(-1.94 theta) by {worst_fit:e}"
        ));
    }
    Outcome::new(
        &failures,
        format!("T(pi/6) = {t:.5}; max |1 - eps - exp(-1.94 theta)| = {worst_fit:.1e}"),
    )
}

fn sweep_config(protocol: &str, thetas: &str, samples: usize) -> SweepConfig {
    let pairs: BTreeMap<String, String> = [
        ("protocol.name", protocol.to_string()),
        ("sweep.theta_c", thetas.to_string()),
        ("sweep.epsilon", "0.05:0.95:0.05".to_string()),
        ("engine.mode", "both".to_string()),
        ("engine.samples", samples.to_string()),
        ("engine.seed", SEED.to_string()),
        ("sweep.timestamp", "false".to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    SweepConfig::from_pairs(&pairs).unwrap()
}

fn c8_reproducibility() -> Outcome {
    let mut failures = Vec::new();
    let config = sweep_config("ion", "pi/6,pi/3", 5_000);
    let render = || {
        let table = run_sweep(&config).unwrap();
        let mut buf = Vec::new();
        write_csv(&table, &mut buf, false).unwrap();
        buf
    };
    let (a, b) = (render(), render());
    if a != b {
        failures.push("CSV differs between identical runs".into());
    }
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    if single.install(render) != a {
        failures.push("CSV depends on thread count".into());
    }

    // Relative to the exact mean: the sampled mean is itself noisy at the
    // percent level, which would inflate the ratio.
    let mut worst: f64 = 0.0;
    let mut worst_naive: f64 = 0.0;
    for proto in ALL_PROTOCOLS {
        for &t in &[FRAC_PI_6, FRAC_PI_3] {
            for (j, e) in eps_grid(1, 19).into_iter().enumerate() {
                let s = setup(proto, t, e);
                let exact = s.report().mean_sigma_cond;
                let batch =
                    sample_trajectories(&s.protocol, &s.table, 100_000, SEED + j as u64).unwrap();
                let est = estimate(&batch, |r| r.sigma.cond).unwrap();
                let rel = est.stderr / exact.abs();
                worst = worst.max(rel);
                worst_naive = worst_naive.max(est.relative_stderr());
                if rel.is_nan() || rel >= 0.06 {
                    failures.push(format!("{} relative stderr {rel:.3}", s.label(proto)));
                }
            }
        }
    }
    Outcome::new(
        &failures,
        format!(
            "{} CSV bytes identical across reruns and pools; max stderr/|exact mean| {:.2}% (stderr/|sample mean| {:.2}%)",
            a.len(),
            worst * 100.0,
            worst_naive * 100.0
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        (
            "C1 fluctuation theorems (ion, exact + MC)",
            c1_fluctuation_theorems,
        ),
        (
            "C2 exponential average plus support deficit",
            c2_deficit_identity,
        ),
        (
            "C3 nonnegativity and pointwise decomposition",
            c3_nonnegativity,
        ),
        ("C4 work, bound chain and identities", c4_work_and_bounds),
        ("C5 coarse-grained violation", c5_coarse_violation),
        ("C6 efficacy ordering", c6_efficacies),
        ("C7 calibration formulas", c7_calibration),
        ("C8 reproducibility and MC precision", c8_reproducibility),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = run();
        println!(
            "[{}] {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
        if name.starts_with("C6") {
            println!("       note: {}", c6_note());
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
