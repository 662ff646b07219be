//! Acceptance run: one PASS/FAIL/SKIP line per criterion.
//!
//! `RAPTT_COLON_DIR` points criterion 7 at a directory with `I2000` and
//! `tissues`; `RAPTT_FULL=1` runs it at m = 5000, K = 10000. Failures are
//! reported but only change the exit status under `RAPTT_ACCEPTANCE_STRICT=1`.
//! Positional arguments select criteria by number.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use nalgebra::DVector;
use rand::Rng;
use raptt::competitors::{bs_test, cq_test, sd_test};
use raptt::covariance::make_sigma;
use raptt::gof::{binomial_se, ks_two_sample, ks_uniform};
use raptt::hotelling::*;
use raptt::linstat::{project_stats, summarize};
use raptt::procedure::*;
use raptt::projections::{haar_projection, projection, ProjectionKind, ProjectionMatrix};
use raptt::randsrc::StreamKey;
use raptt::simharness::*;
use raptt::specfun::{f_cdf, f_quantile, noncentral_f_cdf, reg_inc_beta};
use rayon::prelude::*;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rate(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

fn c1() -> Outcome {
    let a = choose_k(50, 50, 0.05).unwrap();
    let b = choose_k(70, 70, 0.05).unwrap();
    verdict(a == 43 && b == 62, format!("choose_k(50,50)={a}, choose_k(70,70)={b}"))
}

fn c2() -> Outcome {
    let (n1, n2, k, p, reps) = (20, 20, 10, 50, 20_000u64);
    let tol = 3.0 * (0.05f64 * 0.95 / reps as f64).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for id in [1u8, 4] {
        let sigma = make_sigma(id, p).unwrap();
        let zero = DVector::zeros(p);
        for kind in ProjectionKind::ALL {
            let root = StreamKey::new(2).child("sigma", id as u64).child("kind", kind as u64);
            let pv: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let key = root.child("rep", r);
                    let x = sample_dataset(n1, &zero, &sigma, &key.child("x", 0)).unwrap();
                    let y = sample_dataset(n2, &zero, &sigma, &key.child("y", 0)).unwrap();
                    let proj = projection(kind, p, k, &key.child("r", 0)).unwrap();
                    t2_projected(&project_stats(&summarize(&x, &y).unwrap(), &proj).unwrap()).unwrap().pvalue
                })
                .collect();
            let size = rate(pv.iter().filter(|&&v| v < 0.05).count(), pv.len());
            let ks = ks_uniform(&pv).unwrap().pvalue;
            ok &= (size - 0.05).abs() <= tol && ks > 0.001;
            parts.push(format!("Σ{id}/{kind}: size {size:.4}, KS p {ks:.3}"));
        }
    }
    verdict(ok, format!("{} (tolerance ±{tol:.4})", parts.join("; ")))
}

fn c3() -> Outcome {
    let (n1, n2, p, big_k) = (25, 25, 100, 2000);
    let cfg = RapttConfig {
        m: 200,
        k: KChoice::Auto,
        kind: ProjectionKind::Haar,
        alpha: 0.05,
        seed: 3,
    };
    let a = null_draws_under(n1, n2, &make_sigma(1, p).unwrap(), None, &cfg, big_k, &StreamKey::new(31)).unwrap();
    let b = null_draws_under(n1, n2, &make_sigma(4, p).unwrap(), None, &cfg, big_k, &StreamKey::new(34)).unwrap();
    let ks = ks_two_sample(&a, &b).unwrap();
    let mut sa = a.clone();
    sa.sort_by(f64::total_cmp);
    let u = sa[(0.05 * big_k as f64).ceil() as usize - 1];
    let size4 = rate(b.iter().filter(|&&v| v < u).count(), b.len());
    verdict(
        ks.pvalue > 0.01,
        format!(
            "Σ1 vs Σ4, p={p}, n1=n2=25, m=200, K={big_k}: KS D {:.4}, p {:.3}; Σ4 size at Σ1 cutoff {size4:.3}",
            ks.statistic, ks.pvalue
        ),
    )
}

fn c4() -> Outcome {
    // Grid: 10 values of k times 10 values of Δ_R.
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let inputs = PowerInputs {
                delta_r: 0.1 * j as f64 + 0.02 * i as f64,
                k: 1 + 4 * i,
                n1: 30,
                n2: 25,
                alpha: 0.05,
            };
            let n = inputs.n1 + inputs.n2 - 2;
            let c = critical_value(inputs.k, n, 0.05).unwrap();
            let direct = 1.0
                - noncentral_f_cdf(c, inputs.k as f64, (n - inputs.k + 1) as f64, inputs.f_noncentrality()).unwrap();
            let a = power_given_delta(&inputs).unwrap();
            let b = power_given_delta_via(&inputs, PowerRoute::PoissonBeta).unwrap();
            worst = worst.max((a - direct).abs()).max((a - b).abs());
        }
    }

    // Monte Carlo with one fixed projection.
    let (n1, n2, k, p) = (20, 20, 5, 30);
    let sigma = make_sigma(3, p).unwrap();
    let r = haar_projection(p, k, &StreamKey::new(4)).unwrap();
    let dir = DVector::from_fn(p, |i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
    let unit = noncentrality(&dir, &sigma, &r).unwrap();
    let target = |scale: f64| {
        power_given_delta(&PowerInputs { delta_r: unit * scale * scale, k, n1, n2, alpha: 0.05 }).unwrap()
    };
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if target(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = &dir * lo;
    let power = target(lo);
    let c = critical_value(k, n1 + n2 - 2, 0.05).unwrap();
    let zero = DVector::zeros(p);
    let reps = 100_000u64;
    let root = StreamKey::new(44);
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|i| {
            let key = root.child("rep", i);
            let x = sample_dataset(n1, &mu, &sigma, &key.child("x", 0)).unwrap();
            let y = sample_dataset(n2, &zero, &sigma, &key.child("y", 0)).unwrap();
            let res = t2_projected(&project_stats(&summarize(&x, &y).unwrap(), &r).unwrap()).unwrap();
            usize::from(res.rejects(c))
        })
        .sum();
    let mc = rate(hits, reps as usize);
    let se = binomial_se(power, reps as usize);
    verdict(
        worst <= 1e-10 && (mc - power).abs() <= 4.0 * se,
        format!("grid max |Δpower| {worst:.2e}; MC {mc:.4} vs exact {power:.4} ({:.2} SE)", (mc - power) / se),
    )
}

fn c5() -> Outcome {
    let (n1, n2, p, runs) = (50, 50, 200, 500u64);
    let cfg = RapttConfig {
        m: 200,
        k: KChoice::Fixed(43),
        kind: ProjectionKind::Haar,
        alpha: 0.05,
        seed: 5,
    };
    let cal = calibrate_null(n1, n2, p, &cfg, 2000).unwrap();
    let u = cal.cutoff(0.05).unwrap();
    let sigma = make_sigma(1, p).unwrap();
    let zero = DVector::zeros(p);
    let root = StreamKey::new(55);
    let rejections: usize = (0..runs)
        .into_par_iter()
        .map(|r| {
            let key = root.child("run", r);
            let x = sample_dataset(n1, &zero, &sigma, &key.child("x", 0)).unwrap();
            let y = sample_dataset(n2, &zero, &sigma, &key.child("y", 0)).unwrap();
            let st = summarize(&x, &y).unwrap();
            let theta = average_pvalue_keyed(&st, 43, cfg.m, cfg.kind, &key.child("raptt", 0), false).unwrap();
            usize::from(theta < u)
        })
        .sum();
    let size = rate(rejections, runs as usize);
    verdict((size - 0.05).abs() <= 0.03, format!("size {size:.3} over {runs} runs (u = {u:.4})"))
}

fn c6() -> Outcome {
    let cfg = ExperimentConfig::parse(
        "sigma_id = 2\np = 200\nn1 = 50\nn2 = 50\nruns = 300\nm = 500\nK = 2000\nalternatives = 1\n\
         sparsities = 0.5\nmethods = raptt-haar, cq, bs\nnull = true\nseed = 6\n",
    )
    .unwrap();
    let t = run_power_experiment(&cfg).unwrap();
    let row = t.find_row(1, 0.5).unwrap();
    let get = |m: Method| t.rate(row, t.column(m).unwrap());
    let (r, cq, bs) = (get(Method::Raptt(ProjectionKind::Haar)), get(Method::Cq), get(Method::Bs));
    let null = t.null_row().unwrap();
    let sizes: Vec<String> = t
        .methods
        .iter()
        .enumerate()
        .map(|(j, m)| format!("{m} {:.3}", t.rate(null, j)))
        .collect();
    verdict(
        r - cq >= 0.10 && r - bs >= 0.10 && (0.52..=0.66).contains(&r),
        format!("RAPTT-haar {r:.3}, CQ {cq:.3}, BS {bs:.3}; null row {}", sizes.join(", ")),
    )
}

fn c7() -> Outcome {
    let Some(dir) = std::env::var_os("RAPTT_COLON_DIR") else {
        return Outcome::Skip("RAPTT_COLON_DIR not set; colon data not available".into());
    };
    let dir = std::path::PathBuf::from(dir);
    let (x, y) = match raptt::cli::ingest::load_colon(&dir) {
        Ok(v) => v,
        Err(e) => return Outcome::Skip(format!("cannot load colon data from {}: {e}", dir.display())),
    };
    let full = std::env::var("RAPTT_FULL").is_ok_and(|v| v == "1");
    let (m, big_k, u_tol) = if full { (5000, 10_000, 0.02) } else { (500, 2000, 0.04) };
    let st = summarize(&x, &y).unwrap();
    let bs = bs_test(&st).unwrap();
    let sd = sd_test(&st).unwrap();
    let cq = cq_test(&x, &y).unwrap();
    let mut ok = (bs.statistic - 2.8189).abs() <= 1e-3
        && (bs.pvalue - 0.0024).abs() <= 5e-4
        && (sd.statistic - 0.6696).abs() <= 1e-2
        && (cq.statistic - 1.3299).abs() <= 0.05;
    let mut parts = vec![format!(
        "BS {:.4} (p {:.4}), SD {:.4}, CQ {:.4}",
        bs.statistic, bs.pvalue, sd.statistic, cq.statistic
    )];
    for kind in ProjectionKind::ALL {
        let cfg = RapttConfig { m, k: KChoice::Auto, kind, alpha: 0.05, seed: 7 };
        let cal = calibrate_null(st.n1(), st.n2(), st.p(), &cfg, big_k).unwrap();
        let rep = raptt_test_stats(&st, &cfg, &cal).unwrap();
        let u = rep.threshold.unwrap();
        ok &= rep.statistic <= 0.01 && rep.pvalue == 0.0;
        if kind == ProjectionKind::Haar {
            ok &= (u - 0.4259).abs() <= u_tol;
        }
        parts.push(format!("{kind}: θ̄* {:.4}, p {}, u {:.4}", rep.statistic, rep.pvalue, u));
    }
    verdict(ok, format!("{} (m={m}, K={big_k})", parts.join("; ")))
}

fn c8() -> Outcome {
    let mut fails = Vec::new();

    let mut orth: f64 = 0.0;
    for i in 0..1000u64 {
        let key = StreamKey::new(8).child("r", i);
        let (p, k) = (20 + (i as usize * 7) % 200, 1 + (i as usize * 3) % 19);
        for kind in ProjectionKind::ALL {
            orth = orth.max(projection(kind, p, k, &key).unwrap().orthonormality_error());
        }
    }
    if orth > 1e-10 {
        fails.push(format!("R'R error {orth:e}"));
    }

    let mut rng = StreamKey::new(8).child("beta", 0).stream();
    let mut beta_bad = 0;
    for _ in 0..10_000 {
        let u: f64 = rng.random();
        let a = rng.random_range(0.05..100.0);
        let b = rng.random_range(0.05..100.0);
        if reg_inc_beta(u, a + 1.0, b).unwrap() > reg_inc_beta(u, a, b).unwrap() + 1e-14 {
            beta_bad += 1;
        }
    }
    if beta_bad > 0 {
        fails.push(format!("{beta_bad} incomplete beta monotonicity violations"));
    }

    let round: f64 = (1..=200)
        .into_par_iter()
        .map(|r| {
            let mut w: f64 = 0.0;
            for s in 1..=200 {
                for &pr in &[0.05, 0.5, 0.95] {
                    let x = f_quantile(pr, r as f64, s as f64).unwrap();
                    w = w.max((f_cdf(x, r as f64, s as f64).unwrap() - pr).abs());
                }
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    if round > 1e-8 {
        fails.push(format!("round-trip error {round:e}"));
    }

    let mut rot: f64 = 0.0;
    let mut ident: f64 = 0.0;
    for i in 0..200u64 {
        let key = StreamKey::new(8).child("inv", i);
        let p = 3 + (i as usize % 30);
        let k = 1 + (i as usize % 6).min(p - 1);
        let x = gaussian_data(10, p, 0.2, &key.child("x", 0));
        let y = gaussian_data(9, p, 0.0, &key.child("y", 0));
        let st = summarize(&x, &y).unwrap();
        let kind = ProjectionKind::ALL[i as usize % 2];
        let r = projection(kind, p, k, &key.child("r", 0)).unwrap();
        let q = random_rotation(k, &key.child("q", 0));
        let rq = ProjectionMatrix::from_matrix(r.values() * q, kind, key.clone()).unwrap();
        let a = t2_projected(&project_stats(&st, &r).unwrap()).unwrap().t2;
        let b = t2_projected(&project_stats(&st, &rq).unwrap()).unwrap().t2;
        rot = rot.max((a - b).abs() / a.max(1.0));
        if p < 17 {
            let c = t2_classical(&st).unwrap();
            let d = t2_projected(&project_stats(&st, &ProjectionMatrix::identity(p)).unwrap()).unwrap().t2;
            ident = ident.max((c - d).abs() / c.max(1.0));
        }
    }
    if rot > 1e-9 {
        fails.push(format!("rotation invariance error {rot:e}"));
    }
    if ident > 1e-9 {
        fails.push(format!("identity projection error {ident:e}"));
    }

    let cfg = RapttConfig { m: 50, k: KChoice::Auto, kind: ProjectionKind::Haar, alpha: 0.05, seed: 8 };
    let x = gaussian_data(12, 60, 0.2, &StreamKey::new(8).child("dx", 0));
    let y = gaussian_data(11, 60, 0.0, &StreamKey::new(8).child("dy", 0));
    let reports: Vec<_> = [1usize, 4, 8]
        .iter()
        .map(|&t| {
            rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| {
                let cal = calibrate_null(12, 11, 60, &cfg, 300).unwrap();
                raptt_test(&x, &y, &cfg, &cal).unwrap()
            })
        })
        .collect();
    let same = reports.iter().all(|r| r == &reports[0] && r.statistic.to_bits() == reports[0].statistic.to_bits());
    if !same {
        fails.push("reports differ across thread counts".into());
    }

    let detail = format!(
        "R'R {orth:.1e}, beta violations {beta_bad}, round-trip {round:.1e}, rotation {rot:.1e}, identity {ident:.1e}, threads 1/4/8 {}",
        if same { "identical" } else { "differ" }
    );
    if fails.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}: {}", fails.join("; ")))
    }
}

fn c9() -> Outcome {
    let cfg = ExperimentConfig::parse(
        "experiment = k-ratio\nsigma_id = 1\np = 200\nn1 = 50\nn2 = 50\nruns = 500\nalternatives = 1\n\
         sparsities = 0.25\nk_grid = 10, 20, 30, 43, 60, 80\nseed = 9\n",
    )
    .unwrap();
    let t = k_ratio_experiment(&cfg).unwrap();
    let row = &t.rows[0];
    let curve: Vec<String> = row.powers.iter().map(|(k, v)| format!("{k}:{v:.3}")).collect();
    let ratio = row.ratio();
    verdict(ratio >= 0.8, format!("ratio {ratio:.4} at k*={}; powers {}", row.k_star, curve.join(" ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("k-selection", c1),
        ("single-projection exactness", c2),
        ("null law across Σ1/Σ4", c3),
        ("power formula", c4),
        ("desk-scale size", c5),
        ("power ordering on Σ2", c6),
        ("colon data", c7),
        ("property suite", c8),
        ("k-ratio", c9),
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n} [{name}]: {tag} ({secs:.1}s) {detail}");
    }
    println!("acceptance: {failed} failed");
    let strict = std::env::var("RAPTT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
