//! One pipeline per subcommand. Each returns the checks it ran and a map of
//! headline values for `summary.json`.

use std::path::{Path, PathBuf};

use renewlab::model::{build_test_kernel, stationary_distribution, HeavyTailKernelFamily, HEAD};
use renewlab::mrp::{
    empirical_mass_function, equifi_check, green_function_check, interarrival_laplace_check, laplace_mass,
    laplace_mass_check, mp2_check, rescaled_contact_set, simulate_mrp, ScaledMassReport,
};
use renewlab::par::{self, stream};
use renewlab::regen::{clo_mc_oracle, clo_probability, dcg_pair, dt_law_cdf, fidi_convergence_check};
use renewlab::report::{Check, Report};
use renewlab::walk::{
    constrained_kernel, constrained_kernel_mc, doney_local_check, duality_check, ladder_tail_probs,
    ladder_tails_quadrature, renewal_function_estimate, thm_pr_check, ConstrainedKernelTensor, TensorParams,
};
use renewlab::wetting::{
    critical_spectrum, estz_check, free_energy_profile, main2_check, partition_table, sample_critical_contacts,
    tilted_kernel, contact_scaling, CriticalSampler,
};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::output::{num, RunDir};
use crate::Failure;

pub type Outcome = (Report, Map<String, Value>);

/// Check groups selected with `--check`; empty means all.
pub struct Enabled(pub Vec<String>);

impl Enabled {
    pub fn on(&self, group: &str) -> bool {
        self.0.is_empty() || self.0.iter().any(|g| g == group)
    }
}

fn kernel(cfg: &RunConfig) -> Result<HeavyTailKernelFamily, Failure> {
    Ok(build_test_kernel(&cfg.kernel)?)
}

fn cells(k: &HeavyTailKernelFamily, n: usize) -> Vec<(f64, f64)> {
    k.grid.equal_cells(n.max(1))
}

fn scaled_rows(r: &ScaledMassReport) -> Vec<Vec<String>> {
    r.cells
        .iter()
        .map(|c| vec![num(c.lo), num(c.hi), num(c.scaled), num(c.std_error), num(c.limit), num(c.rel_dev)])
        .collect()
}

pub fn kernel_check(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let k = kernel(cfg)?;
    let pi = stationary_distribution(&k)?;
    let g = k.g();
    let mut rep = Report::default();
    let mut vals = Map::new();
    if on.on("invariants") {
        let row_dev = (0..g).map(|i| (k.row_mass(i) - 1.0).abs()).fold(0.0, f64::max);
        rep.push(Check::below("kernel.row-mass deviation", row_dev, 1e-10));
        let mut law_dev: f64 = 0.0;
        for i in (0..g).step_by((g / 8).max(1)) {
            for j in (0..g).step_by((g / 8).max(1)) {
                let head: f64 = (1..=HEAD as u64).map(|n| k.pmf_pair(i, j, n)).sum();
                law_dev = law_dev.max((head + k.law.survival(HEAD as u64) - 1.0).abs());
            }
        }
        rep.push(Check::below("kernel.interarrival mass deviation", law_dev, 1e-10));
        let min_k = (0..g).flat_map(|i| (0..g).map(move |j| (i, j))).map(|(i, j)| k.k(i, j)).fold(f64::MAX, f64::min);
        let min_phi = (0..g).flat_map(|i| (0..g).map(move |j| (i, j))).map(|(i, j)| k.phi(i, j)).fold(f64::MAX, f64::min);
        rep.push(Check::holds("kernel.k and Phi positive", min_k > 0.0 && min_phi > 0.0));
    }
    if on.on("stationary") {
        let dev = pi.density.iter().map(|d| (d - 1.0 / k.grid.b).abs()).fold(0.0, f64::max);
        rep.push(Check::below("kernel.stationary density uniform", dev, 1e-9));
    }
    if on.on("lem2") {
        let rows = interarrival_laplace_check(&k, &[cfg.mrp.lem2_lambda], cfg.mrp.lem2_stride)?;
        rep.push(Check::below("lem2.sup relative deviation", rows[0].sup_rel_dev, cfg.mrp.lem2_tolerance));
        vals.insert("lem2_scalar".into(), json!(rows[0].scalar));
    }
    dir.csv(
        "kernel_rows.csv",
        &["i", "x", "row_mass", "stationary_density"],
        (0..g).map(|i| vec![i.to_string(), num(k.grid.nodes[i]), num(k.row_mass(i)), num(pi.density[i])]),
    )?;
    Ok((rep, vals))
}

pub fn mrp(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let m = &cfg.mrp;
    let k = kernel(cfg)?;
    if m.start >= k.g() {
        return Err(Failure::Config(format!("mrp.start = {} is not a grid node (G = {})", m.start, k.g())));
    }
    let pi = stationary_distribution(&k)?;
    let cs = cells(&k, m.cells);
    let mut rep = Report::default();
    let mut vals = Map::new();
    let header = ["lo", "hi", "scaled", "std_error", "limit", "rel_dev"];
    if on.on("mp2") {
        let est = empirical_mass_function(&k, m.start, m.n, &cs, m.replicas, cfg.seed)?;
        let r = mp2_check(&est, &k, &pi)?;
        rep.extend(r.to_report("mp2", m.tolerance));
        vals.insert("mp2_total_scaled".into(), json!(r.total_scaled));
        vals.insert("mp2_limit".into(), json!(r.total_limit));
        dir.csv("mass_cells.csv", &header, scaled_rows(&r))?;
    }
    if on.on("laplace") {
        let est = laplace_mass(&k, m.start, m.lambda, &cs, m.replicas, cfg.seed)?;
        let r = laplace_mass_check(&k, &pi, &est)?;
        rep.extend(r.to_report("laplace", m.tolerance));
        vals.insert("laplace_total_scaled".into(), json!(r.total_scaled));
        dir.csv("laplace_cells.csv", &header, scaled_rows(&r))?;
    }
    if on.on("equifi") {
        let r = equifi_check(&k, m.start, m.n, m.replicas, cfg.seed)?;
        rep.push(Check::rel("equifi.Laplace vs mass", r.laplace_scaled, r.mass_scaled, m.tolerance));
    }
    if on.on("domm") {
        let r = green_function_check(&k, m.window.0, m.window.1, m.replicas, cfg.seed)?;
        rep.push(Check::rel("domm.window renewal mass", r.estimate, r.analytic, m.tolerance));
        vals.insert("domm_estimate".into(), json!(r.estimate));
        vals.insert("domm_analytic".into(), json!(r.analytic));
    }
    Ok((rep, vals))
}

pub fn regen(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let r = &cfg.regen;
    let k = kernel(cfg)?;
    let alpha = k.alpha();
    let mut rep = Report::default();
    let mut vals = Map::new();
    if on.on("fidi") {
        if r.t_list.is_empty() {
            return Err(Failure::Config("regen.t_list must not be empty".into()));
        }
        let seed = par::derive_seed(cfg.seed, stream::REGEN, 1);
        let sets = par::map_replicas(r.trajectories, seed, stream::MRP, |_, rng| {
            rescaled_contact_set(&simulate_mrp(&k, 0, r.n, rng), r.n)
        });
        let f = fidi_convergence_check(&sets, alpha, &r.t_list, r.level, cfg.seed)?;
        let first = &f.per_t[0];
        rep.push(Check::below(format!("fidi.KS distance d_{}", first.t), first.ks.statistic, r.ks_tolerance));
        for row in &f.per_t {
            rep.push(Check::below(format!("fidi.KS d_{} at level {}", row.t, r.level), row.ks.statistic, row.ks.threshold));
        }
        for j in &f.joint {
            rep.push(Check::below(format!("fidi.joint (d_{}, d_{})", j.t1, j.t2), j.statistic, j.threshold));
        }
        vals.insert("ks_first".into(), json!(first.ks.statistic));
        let mut rows = Vec::new();
        for &t in &r.t_list {
            let mut d: Vec<f64> = sets.iter().map(|s| s.matheron(t).0).collect();
            renewlab::stats::sort_samples(&mut d);
            for q in 1..=20 {
                let y = t + (1.0 - t) * q as f64 / 20.0;
                let emp = d.partition_point(|&v| v <= y) as f64 / d.len() as f64;
                rows.push(vec![num(t), num(y), num(emp), num(dt_law_cdf(alpha, t, y)?)]);
            }
        }
        dir.csv("dt_cdf.csv", &["t", "y", "empirical", "limit"], rows)?;
    }
    if on.on("closed-form") {
        let p = 1.0 - dt_law_cdf(alpha, 1.0, 2.0)?;
        // d_1 = 1/R with R ~ Beta(α, 1−α)
        let want = renewlab::special::beta_reg(alpha, 1.0 - alpha, 0.5);
        rep.push(Check::abs("closed-form.P(d_1 > 2)", p, want, 1e-10));
    }
    if on.on("dcg") {
        let d = dcg_pair(r.dcg_s, r.dcg_t, r.dcg_n)?;
        rep.push(Check::rel("dcg.finite sum vs limit", d.finite_sum, d.limit, r.dcg_tolerance));
        vals.insert("dcg_finite".into(), json!(d.finite_sum));
        vals.insert("dcg_limit".into(), json!(d.limit));
    }
    Ok((rep, vals))
}

fn tensor_summary(t: &ConstrainedKernelTensor) -> Vec<Vec<String>> {
    (0..t.g())
        .map(|i| {
            let strip: f64 = (1..=t.n_max).map(|n| t.strip_mass(n, i)).sum();
            vec![
                num(t.grid.nodes[i]),
                num(strip),
                num(t.tail_mass(i)),
                num(t.defect[i]),
                num(t.survival_at(t.n_max, i)),
            ]
        })
        .collect()
}

pub fn walk(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let w = &cfg.walk;
    let model = w.model;
    model.validate()?;
    let t = constrained_kernel(&model, &w.tensor)?;
    t.save(&dir.file("tensor.bin"))?;
    dir.csv("defect.csv", &["x", "strip_mass", "tail_mass", "defect", "survival_n_max"], tensor_summary(&t))?;
    let mut rep = Report::default();
    let mut vals = Map::new();
    vals.insert("balance_residual".into(), json!(t.balance_residual));
    vals.insert("halfline_nodes".into(), json!(t.halfline.len));
    if on.on("balance") {
        rep.push(Check::below("walk.mass balance residual", t.balance_residual, 1e-3));
        let asym = (0..t.g())
            .flat_map(|i| (0..t.g()).map(move |j| (i, j)))
            .map(|(i, j)| (t.phi(i, j) - t.phi(j, i)).abs() / t.phi(i, j))
            .fold(0.0, f64::max);
        rep.push(Check::below("walk.Phi_a(x,y) = Phi_a(y,x)", asym, 1e-9));
    }
    if on.on("thm-pr") {
        let r = thm_pr_check(&t, &w.n_list)?;
        if let Some(&(n, e)) = r.rows.last() {
            rep.push(Check::below(format!("thm-pr.e({n})"), e, w.thm_pr_tolerance));
        }
        rep.push(Check::holds("thm-pr.e decreasing", r.decreasing));
        dir.csv("thm_pr.csv", &["n", "e"], r.rows.iter().map(|(n, e)| vec![n.to_string(), num(*e)]))?;
    }
    if on.on("kernel-mc") {
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for n in 1..=w.mc_max_n {
            let mc = constrained_kernel_mc(&model, t.grid.nodes[0], n, w.mc_bins, w.mc_replicas, cfg.seed)?;
            for (b, &(lo, hi)) in mc.bins.iter().enumerate() {
                let q = t.bin_mass(n, 0, lo, hi)?;
                let z = (mc.probs[b] - q).abs() / mc.probs_se[b].max(f64::MIN_POSITIVE);
                worst = worst.max(z);
                rows.push(vec![n.to_string(), num(lo), num(hi), num(mc.probs[b]), num(mc.probs_se[b]), num(q)]);
            }
        }
        rep.push(Check::below("kernel-mc.max |MC - quadrature|/SE", worst, 3.0));
        dir.csv("kernel_mc.csv", &["n", "lo", "hi", "mc", "se", "quadrature"], rows)?;
    }
    if on.on("ladder") {
        let pts = [0.0, 0.25 * model.a, 0.5 * model.a, model.a];
        let mc = ladder_tail_probs(&model, &pts, w.ladder_replicas, 1_000_000, cfg.seed)?;
        let (q, _) = ladder_tails_quadrature(&model, &pts, 4096, 0.2 * model.sigma)?;
        rep.push(Check::abs("ladder.P[H >= 0]", mc.asc[0], 1.0, 0.0));
        let mut zq: f64 = 0.0;
        let mut zs: f64 = 0.0;
        for i in 1..pts.len() {
            zq = zq.max((mc.asc[i] - q[i]).abs() / mc.asc_se[i]);
            zs = zs.max((mc.asc[i] - mc.desc[i]).abs() / (mc.asc_se[i].hypot(mc.desc_se[i])));
        }
        rep.push(Check::below("ladder.max |MC - quadrature|/SE", zq, 3.0));
        rep.push(Check::below("ladder.max |asc - desc|/SE", zs, 3.0));
        rep.push(Check::below("ladder.cap rate", mc.cap_rate, 1e-3));
        dir.csv(
            "ladder.csv",
            &["r", "asc", "asc_se", "desc", "desc_se", "quadrature"],
            (0..pts.len()).map(|i| vec![num(pts[i]), num(mc.asc[i]), num(mc.asc_se[i]), num(mc.desc[i]), num(mc.desc_se[i]), num(q[i])]),
        )?;
    }
    if on.on("duality") {
        let rows = duality_check(&model, w.duality_m, &[(0.0, 0.5), (0.5, 1.0)], w.duality_replicas, cfg.seed);
        let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        rep.push(Check::below("duality.max |z|", worst, 3.0));
        dir.csv(
            "duality.csv",
            &["m", "lo", "hi", "stay_below", "ladder_mass", "z"],
            rows.iter().map(|r| vec![r.m.to_string(), num(r.lo), num(r.hi), num(r.stay_below), num(r.ladder_mass), num(r.z)]),
        )?;
    }
    if on.on("doney") {
        let top = (w.doney_x.max(w.doney_y + 2.0 * w.doney_delta) * 100.0).ceil() as usize;
        let grid: Vec<f64> = (0..=top).map(|k| k as f64 / 100.0).collect();
        let ren = renewal_function_estimate(&model, &grid, w.renewal_replicas, 1_000_000, cfg.seed)?;
        let d1 = doney_local_check(&model, w.doney_x, w.doney_y, w.doney_delta, w.doney_n, w.doney_replicas, &ren, cfg.seed)?;
        let d2 = doney_local_check(&model, w.doney_x, w.doney_y, 2.0 * w.doney_delta, w.doney_n, w.doney_replicas, &ren, cfg.seed)?;
        rep.push(
            Check::rel("doney.ratio", d1.ratio, 1.0, w.doney_tolerance).with_note(format!("SE {:.3}", d1.ratio_se)),
        );
        rep.push(Check::rel("doney.doubling delta", d2.probability / d1.probability, 2.0, 0.25));
        rep.push(Check::abs("doney.U(0)", ren.u[0], 1.0, 0.0));
        vals.insert("doney_ratio".into(), json!(d1.ratio));
        dir.csv(
            "renewal_function.csv",
            &["x", "u", "u_se", "v", "v_se"],
            (0..grid.len()).map(|i| vec![num(grid[i]), num(ren.u[i]), num(ren.u_se[i]), num(ren.v[i]), num(ren.v_se[i])]),
        )?;
    }
    Ok((rep, vals))
}

/// Where the wetting commands look for the tensor.
pub fn tensor_path(cfg: &RunConfig, out: &Path) -> PathBuf {
    cfg.wetting.tensor.clone().unwrap_or_else(|| {
        out.parent().map(|p| p.join("walk")).unwrap_or_else(|| PathBuf::from("walk")).join("tensor.bin")
    })
}

fn load_tensor(cfg: &RunConfig, out: &Path) -> Result<ConstrainedKernelTensor, Failure> {
    let path = tensor_path(cfg, out);
    if !path.exists() {
        return Err(Failure::Missing { path, producer: "walk" });
    }
    Ok(ConstrainedKernelTensor::load(&path)?)
}

pub fn wetting_betac(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let we = &cfg.wetting;
    let t = load_tensor(cfg, &dir.path)?;
    let (bc, spec) = critical_spectrum(&t)?;
    spec.save(&dir.file("spectral.bin"), bc)?;
    let mut rep = Report::default();
    let mut vals = Map::new();
    vals.insert("beta_c".into(), json!(bc));
    vals.insert("g".into(), json!(t.g()));
    if on.on("betac") {
        rep.push(Check::holds("betac.beta_c > 0", bc > 0.0));
        rep.push(Check::below("betac.eigen residual", spec.residual_right.max(spec.residual_left), 1e-9));
    }
    if on.on("refinement") {
        if let Some(g2) = we.refine_g {
            let mut p = TensorParams::new(g2, t.n_max);
            p.m = Some(t.halfline.upper());
            p.halfline_g = Some(t.halfline.len);
            p.phi = t.phi_source;
            let t2 = constrained_kernel(&t.model, &p)?;
            let (bc2, _) = critical_spectrum(&t2)?;
            vals.insert("beta_c_refined".into(), json!(bc2));
            vals.insert("g_refined".into(), json!(g2));
            vals.insert("beta_c_difference".into(), json!(bc2 - bc));
            rep.push(Check::abs(format!("refinement.beta_c G={} vs G={g2}", t.g()), bc2, bc, we.refine_tolerance));
        }
    }
    if on.on("invmp") {
        let mut rows = Vec::new();
        for &off in &we.tilt_offsets {
            match tilted_kernel(&t, bc + off) {
                Ok(k) => {
                    rep.push(Check::below(format!("invmp.row masses at beta_c{off:+}"), k.max_row_deviation(), we.tilt_tolerance));
                    rows.push(vec![num(off), num(k.beta), num(k.free_energy), num(k.expected_mass), num(k.max_row_deviation())]);
                }
                Err(renewlab::Error::RowMass { deviation, .. }) => {
                    rep.push(Check::below(format!("invmp.row masses at beta_c{off:+}"), deviation, we.tilt_tolerance));
                }
                Err(e) => return Err(e.into()),
            }
        }
        dir.csv("tilt.csv", &["offset", "beta", "free_energy", "expected_mass", "max_deviation"], rows)?;
    }
    dir.csv(
        "eigenfunctions.csv",
        &["x", "v", "w"],
        (0..t.g()).map(|i| vec![num(t.grid.nodes[i]), num(spec.v[i]), num(spec.w[i])]),
    )?;
    Ok((rep, vals))
}

pub fn wetting_free_energy(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let t = load_tensor(cfg, &dir.path)?;
    let (bc, _) = critical_spectrum(&t)?;
    let mut offs = cfg.wetting.beta_offsets.clone();
    offs.sort_by(|a, b| a.total_cmp(b));
    let betas: Vec<f64> = offs.iter().map(|o| bc + o).collect();
    let prof = free_energy_profile(&t, &betas)?;
    let mut rep = Report::default();
    if on.on("shape") {
        let flat = prof.iter().filter(|p| p.0 <= bc).all(|p| p.1 == 0.0);
        let above: Vec<&(f64, f64)> = prof.iter().filter(|p| p.0 > bc).collect();
        let rising = above.windows(2).all(|w| w[1].1 > w[0].1) && above.iter().all(|p| p.1 > 0.0);
        let bounded = prof.iter().all(|p| p.1 <= p.0.max(0.0));
        rep.push(Check::holds("free-energy.zero up to beta_c", flat));
        rep.push(Check::holds("free-energy.strictly increasing above beta_c", rising));
        rep.push(Check::holds("free-energy.F <= max(beta, 0)", bounded));
    }
    dir.csv("free_energy.csv", &["beta", "free_energy"], prof.iter().map(|p| vec![num(p.0), num(p.1)]))?;
    let mut vals = Map::new();
    vals.insert("beta_c".into(), json!(bc));
    Ok((rep, vals))
}

pub fn wetting_critical(cfg: &RunConfig, dir: &RunDir, on: &Enabled) -> Result<Outcome, Failure> {
    let we = &cfg.wetting;
    let t = load_tensor(cfg, &dir.path)?;
    let (bc, spec) = critical_spectrum(&t)?;
    let z = partition_table(&t, bc, we.n, we.mode)?;
    z.save(&dir.file("partition.bin"))?;
    spec.save(&dir.file("spectral.bin"), bc)?;
    let mut rep = Report::default();
    let mut vals = Map::new();
    vals.insert("beta_c".into(), json!(bc));
    if on.on("estz") {
        let r = estz_check(&z, &spec, &t, &we.estz_ns)?;
        rep.push(Check::below("estz.R(N,x) variation over N", r.variation, we.estz_variation));
        rep.push(Check::below("estz.|R/C - 1|", r.constant_deviation, we.estz_constant_tolerance));
        rep.push(Check::below("estz.cross-x ratio deviation", r.cross_ratio_deviation, we.estz_cross_tolerance));
        vals.insert("estz_constant".into(), json!(r.constant));
        let g = t.g();
        let mut rows = Vec::new();
        for (k, &n) in r.ns.iter().enumerate() {
            for i in 0..g {
                rows.push(vec![n.to_string(), num(t.grid.nodes[i]), num(r.ratios[k * g + i]), num(r.constant)]);
            }
        }
        dir.csv("estz.csv", &["n", "x", "ratio", "constant"], rows)?;
    }
    let sampler = CriticalSampler::new(&t, &z)?;
    if on.on("main2") {
        let paths = sample_critical_contacts(&sampler, we.n, we.paths, cfg.seed)?;
        let r = main2_check(&paths, we.s, we.t)?;
        rep.extend(r.to_report("main2", we.main2_tolerance));
        vals.insert("p_beyond".into(), json!(r.p_beyond));
        vals.insert("p_after_t".into(), json!(r.p_after_t));
        vals.insert("clo".into(), json!(r.clo));
    }
    if on.on("clo-oracle") {
        let (m, se) = clo_mc_oracle(we.s, we.t, we.oracle_samples, we.oracle_step, cfg.seed)?;
        let c = clo_probability(we.s, we.t)?;
        rep.push(Check::abs("clo-oracle.reweighted MC", m, c, 3.0 * se));
    }
    if on.on("scaling") {
        let (rows, s) = contact_scaling(&sampler, &we.scaling_ns, we.scaling_paths, cfg.seed)?;
        rep.push(Check::abs("scaling.log-log slope of contacts", s, 0.5, we.scaling_tolerance));
        dir.csv("contacts.csv", &["n", "mean", "se"], rows.iter().map(|r| vec![r.0.to_string(), num(r.1), num(r.2)]))?;
    }
    Ok((rep, vals))
}
