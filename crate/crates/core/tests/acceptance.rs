//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dirichlet_zeros::contraction::{
    construct_hinfty_vanishing, construct_vanishing, estimate_contraction, interpolate_on_sequence, ModeG,
    RunConfig, Space, TOperator,
};
use dirichlet_zeros::dbar::{dbar_residual, AreaQuadrature, CauchySolver, CellField, CutoffTheta, Rect};
use dirichlet_zeros::dirichlet::{divisor_power_sum, DirichletPolynomial, SpaceWeight};
use dirichlet_zeros::embedding::{embedding_exponent, hp_norm_even, verify_contractive_embedding};
use dirichlet_zeros::geometry::{BlaschkeProduct, PointSequence, SeqPoint};
use dirichlet_zeros::laplace::{build_h2_coefficients, DefectFunction, GridFunction};
use dirichlet_zeros::verifier::{count_zeros, count_zeros_in_box, vertical_repetition_scan, Contour};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_phi(rng: &mut ChaCha8Rng, start: f64) -> GridFunction {
    // span at most 6 keeps the coefficient count below e^6 N
    let cells = rng.gen_range(1..=40);
    let span = rng.gen_range(0.05..6.0);
    let mut cuts: Vec<f64> = (1..cells).map(|_| rng.gen_range(0.0..span)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut bps = vec![start];
    bps.extend(cuts.iter().map(|x| start + x).filter(|&x| x > start));
    bps.push(start + span);
    let cells = bps.len() - 1;
    let values = (0..cells)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    GridFunction::new(bps, values).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut norm_viol, mut bound_viol, mut worst) = (0, 0, 0.0f64);
    for n in [4usize, 16, 64] {
        for _ in 0..100 {
            let phi = random_phi(&mut rng, (n as f64).ln());
            let f = build_h2_coefficients(&phi, n).unwrap();
            let norm = phi.norm_l2();
            if f.norm_h2() > norm {
                norm_viol += 1;
            }
            let defect = DefectFunction::new(&phi, &f);
            for _ in 0..50 {
                let s = c(rng.gen_range(0.5..3.0), rng.gen_range(-30.0..30.0));
                let bound = 2.0 * (s - 0.5).norm() * (n as f64).powf(-s.re - 0.5) * norm;
                let v = defect.eval(s).norm();
                worst = worst.max(v / bound);
                if v > bound {
                    bound_viol += 1;
                }
            }
        }
    }
    outcome(
        norm_viol == 0 && bound_viol == 0,
        format!("norm violations {norm_viol}, bound violations {bound_viol}, worst ratio {worst:.3}"),
    )
}

/// Mass of `(1 - |w|^2/r^2)^3` inside radius `rho`.
fn bump_mass(rho: f64, r: f64) -> f64 {
    let x = (rho / r).min(1.0);
    PI * r * r / 4.0 * (1.0 - (1.0 - x * x).powi(4))
}

fn criterion_2() -> Outcome {
    let w0 = c(1.5, 0.2);
    let r = 0.25;
    let bbox = Rect::new(w0.re - r, w0.re + r, w0.im - r, w0.im + r).unwrap();

    // disk indicator
    let quad = AreaQuadrature::new(bbox, r / 200.0).unwrap();
    let field = CellField::indicator(quad, |w| (w - w0).norm() < r, 12);
    let solver = CauchySolver::new(&field);
    let mut disk_err: f64 = 0.0;
    for k in 0..24 {
        let dir = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.3) / 24.0);
        for rho in [0.3 * r, 0.6 * r, 1.5 * r, 3.0 * r] {
            let s = w0 + dir * rho;
            let exact = if rho < r { (s - w0).conj() } else { r * r / (s - w0) };
            disk_err = disk_err.max((solver.eval(s) - exact).norm());
        }
    }

    // smooth radial bump: u = mass(|s - w0|) / (pi (s - w0))
    let g = move |w: Complex64| {
        let x = ((w - w0).norm() / r).min(1.0);
        c((1.0 - x * x).powi(3), 0.0)
    };
    let exact = move |s: Complex64| bump_mass((s - w0).norm(), r) / (PI * (s - w0));
    let probes: Vec<Complex64> = (0..16)
        .flat_map(|k| {
            let dir = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.1) / 16.0);
            [0.35 * r, 0.7 * r, 1.3 * r, 2.0 * r].map(|rho| w0 + dir * rho)
        })
        .collect();
    // per-halving ratios oscillate with the probe's position inside its
    // cell, so the order is the least-squares slope of log rms error
    let divs = [50.0, 100.0, 200.0, 400.0];
    let mut errors = Vec::new();
    for div in divs {
        let solver = CauchySolver::new(&CellField::sampled(AreaQuadrature::new(bbox, r / div).unwrap(), g));
        let ss: f64 = probes.iter().map(|&s| (solver.eval(s) - exact(s)).norm_sqr()).sum();
        errors.push((ss / probes.len() as f64).sqrt());
    }
    let xs: Vec<f64> = divs.iter().map(|d| d.log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let order = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    let fine = CauchySolver::new(&CellField::sampled(AreaQuadrature::new(bbox, r / 200.0).unwrap(), g));
    let inner: Vec<Complex64> = probes.iter().cloned().filter(|s| (s - w0).norm() < r).collect();
    let residual = dbar_residual(|s| fine.eval(s), g, &inner, 1e-3);

    outcome(
        disk_err <= 1e-5 && residual <= 1e-3 && order >= 1.8,
        format!("disk error {disk_err:.2e}, dbar residual {residual:.2e}, order {order:.2} (errors {})", sci(&errors)),
    )
}

fn criterion_3() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for r in [5.0, 10.0] {
        let theta = CutoffTheta::new(r).unwrap();
        let (inner, support) = (theta.inner(), theta.support());
        let (mut bad_inner, mut bad_outer, mut grad) = (0, 0, 0.0f64);
        let steps_s = 300;
        let steps_t = ((2.0 * (r + 1.0)) / 0.01).round() as i64;
        for i in 0..=steps_s {
            for j in 0..=steps_t {
                let s = c(0.5 + 0.01 * i as f64, -(r + 1.0) + 0.01 * j as f64);
                let v = theta.eval(s);
                grad = grad.max(v.gradient[0].hypot(v.gradient[1]));
                if inner.contains(s) && v.value != 1.0 {
                    bad_inner += 1;
                }
                if !support.contains(s) && v.value != 0.0 {
                    bad_outer += 1;
                }
            }
        }
        pass &= bad_inner == 0 && bad_outer == 0 && grad <= 2.0;
        detail.push(format!("R={r}: inner {bad_inner}, outer {bad_outer}, max grad {grad:.4}"));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_4() -> Outcome {
    let config = RunConfig::default();
    let cases = vec![
        vec![SeqPoint::simple(1.0, 0.0)],
        vec![SeqPoint::new(1.0, 0.0, 2)],
        vec![
            SeqPoint::simple(1.0, 0.0),
            SeqPoint::new(0.9, 1.5, 2),
            SeqPoint::simple(0.8, -2.0),
        ],
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for pts in cases {
        let seq = PointSequence::new(pts).unwrap();
        let run = match construct_vanishing(&seq, &config) {
            Ok(r) => r,
            Err(e) => {
                pass = false;
                detail.push(format!("error {e}"));
                continue;
            }
        };
        let cert = &run.cert;
        let norm = run.series.norm_h2();
        let value_res = seq
            .points()
            .iter()
            .map(|p| run.series.evaluate(p.z()).norm() / norm)
            .fold(0.0, f64::max);
        let head = run.parts[0].evaluate(c(1.5, 0.0)).norm();
        let tail: f64 = run.parts[1..].iter().map(|p| p.evaluate(c(1.5, 0.0)).norm()).sum();
        let mut decay = true;
        for j in 1..cert.records.len().saturating_sub(1) {
            let (a, b) = (cert.records[j].series_norm, cert.records[j + 1].series_norm);
            decay &= b <= cert.rho_hat * a * 1.1;
        }
        let mut winding_ok = true;
        for p in seq.points() {
            let k = Contour::circle(p.z(), 1e-2).unwrap();
            let count = count_zeros(|s| run.series.evaluate(s), k, 1e-12 * norm).map(|z| z.count);
            winding_ok &= count.as_ref().is_ok_and(|&n| n >= p.multiplicity as i64);
        }
        let ok = cert.certified && cert.rho_hat < 0.5 && decay && value_res <= 1e-3 && head > tail && winding_ok;
        pass &= ok;
        detail.push(format!(
            "K={} N={} rho {:.3} residual {:.1e} head/tail {:.1e}/{:.1e} winding {}",
            seq.total_multiplicity(),
            cert.n,
            cert.rho_hat,
            value_res,
            head,
            tail,
            if winding_ok { "ok" } else { "FAIL" }
        ));
    }
    outcome(pass, detail.join("; "))
}

fn sweep(space: Space, ns: &[usize], trials: usize) -> Vec<f64> {
    let config = RunConfig {
        alpha: space,
        ..RunConfig::default()
    };
    let seq = PointSequence::new(vec![SeqPoint::simple(1.0, 0.0)]).unwrap();
    ns.iter()
        .map(|&n| {
            let op = TOperator::new(n, ModeG::Blaschke(BlaschkeProduct::new(seq.clone())), &config).unwrap();
            estimate_contraction(&op, trials, config.seed).unwrap().rho
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let ns = [16usize, 32, 64, 128];
    let h2 = sweep(Space::H2, &ns, 4);
    let scaled: Vec<f64> = h2.iter().zip(ns).map(|(r, n)| r * n as f64).collect();
    let band = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let d1 = sweep(Space::Dalpha(SpaceWeight::Finite(1.0)), &[16, 64, 256], 8);
    let monotone = d1.windows(2).all(|w| w[1] < w[0]);
    outcome(
        band <= 4.0 && monotone,
        format!("rho*N {scaled:.3?} (band {band:.2}); D_1 rho {}", sci(&d1)),
    )
}

fn criterion_6() -> Outcome {
    let bps: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
    let target = GridFunction::from_midpoints(bps, |x| c((-x).exp(), 0.0)).unwrap();
    let seq = PointSequence::new(vec![SeqPoint::simple(1.0, 0.0)]).unwrap();
    match interpolate_on_sequence(&seq, &target, &RunConfig::default()) {
        Ok(run) => {
            let v = run.series.evaluate(c(1.0, 0.0));
            let err = (v - 2.0 / 3.0).norm();
            outcome(err <= 1e-3, format!("F(1) = {:.8}, error {err:.1e}", v.re))
        }
        Err(e) => outcome(false, format!("error {e}")),
    }
}

/// Coefficients of `f^2`, by direct double loop.
fn square_coeffs(a: &[(usize, Complex64)]) -> Vec<(usize, Complex64)> {
    let mut out: std::collections::BTreeMap<usize, Complex64> = Default::default();
    for &(m, x) in a {
        for &(n, y) in a {
            *out.entry(m * n).or_default() += x * y;
        }
    }
    out.into_iter().collect()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut violations, mut identity_err) = (0, 0.0f64);
    for _ in 0..500 {
        let len = rng.gen_range(1..=8);
        let coeffs: Vec<Complex64> = (0..len)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = DirichletPolynomial::new(1, coeffs.clone());
        for alpha in [1, 2] {
            if !verify_contractive_embedding(&f, alpha).unwrap().ok {
                violations += 1;
            }
        }
        let terms: Vec<(usize, Complex64)> = coeffs.iter().enumerate().map(|(k, &a)| (k + 1, a)).collect();
        let sq: f64 = square_coeffs(&terms).iter().map(|(_, b)| b.norm_sqr()).sum();
        let lhs = hp_norm_even(&f, 4).unwrap().powi(4);
        identity_err = identity_err.max((lhs - sq).abs() / sq);
    }
    let f = DirichletPolynomial::from_real_sparse(&[(1, 1.0), (2, 1.0)]).unwrap();
    let check = verify_contractive_embedding(&f, 1).unwrap();
    let worked = (check.lhs - 6f64.powf(0.25)).abs() < 1e-14 && (check.rhs - 3f64.sqrt()).abs() < 1e-14 && check.ok;
    outcome(
        violations == 0 && identity_err < 1e-13 && worked,
        format!("violations {violations}, squaring identity rel error {identity_err:.1e}, 6^(1/4) <= sqrt 3: {worked}"),
    )
}

fn criterion_8() -> Outcome {
    let got = [1.0, 2.0, 0.5].map(|a| embedding_exponent(a).unwrap());
    let pass = got[0] == 4.0 && got[1] == 8.0 && got[2] == 8.0 / 3.0;
    outcome(pass, format!("{got:?}"))
}

fn criterion_9() -> Outcome {
    let w = SpaceWeight::Finite(1.0);
    let a = divisor_power_sum(w, 1_000_000).normalized_ratio;
    let b = divisor_power_sum(w, 2_000_000).normalized_ratio;
    let change = (b - a).abs() / a;
    outcome(change < 0.05, format!("ratios {a:.6} -> {b:.6}, change {:.2}%", 100.0 * change))
}

fn criterion_10() -> Outcome {
    let seq = PointSequence::new(vec![SeqPoint::simple(1.0, 0.0), SeqPoint::simple(2.0, 3.0)]).unwrap();
    let h = construct_hinfty_vanishing(&seq).unwrap();
    let at_zeros = seq.points().iter().map(|p| h.eval(p.z()).norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut sup: f64 = 0.0;
    for _ in 0..1000 {
        let s = c(rng.gen_range(1e-6..5.0), rng.gen_range(-50.0..50.0));
        sup = sup.max(h.eval(s).norm());
    }
    outcome(at_zeros <= 1e-12 && sup <= 1.0, format!("max |B| at zeros {at_zeros:.1e}, sup sample {sup:.6}"))
}

fn criterion_11() -> Outcome {
    let rect = Rect::new(0.6, 2.5, -1.0, 1.0).unwrap();
    let count = count_zeros_in_box(|s| (s - 1.0) * (s - 2.0), rect, 1e-8).map(|z| z.count);
    let f = DirichletPolynomial::from_real_sparse(&[(1, 1.0), (2, -2.0)]).unwrap();
    let hits = vertical_repetition_scan(&f, c(1.0, 0.0), (0.0, 50.0), 1e-8).unwrap();
    let period = 2.0 * PI / 2f64.ln();
    let worst = (1..=5)
        .map(|k| {
            hits.iter()
                .map(|h| (h.offset - k as f64 * period).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    outcome(
        count.as_ref().is_ok_and(|&n| n == 2) && worst <= 1e-6,
        format!("count {:?}, worst offset error {worst:.1e}", count.ok()),
    )
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("1 coefficient map and defect bound", Duration::from_secs(60), criterion_1),
        ("2 Cauchy transform oracle", Duration::from_secs(120), criterion_2),
        ("3 cutoff certificate", Duration::from_secs(30), criterion_3),
        ("4 vanishing construction end to end", Duration::from_secs(600), criterion_4),
        ("5 contraction scaling", Duration::from_secs(900), criterion_5),
        ("6 interpolation end to end", Duration::from_secs(600), criterion_6),
        ("7 embedding suite", Duration::from_secs(60), criterion_7),
        ("8 exponent formula", Duration::from_secs(1), criterion_8),
        ("9 divisor sum trend", Duration::from_secs(60), criterion_9),
        ("10 bounded vanishing function", Duration::from_secs(5), criterion_10),
        ("11 verifier self-test", Duration::from_secs(60), criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let elapsed = t.elapsed();
        let pass = o.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
