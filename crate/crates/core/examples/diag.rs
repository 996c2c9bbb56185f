use kldsel::bandwidth::{self, BandwidthObjective};
use kldsel::density::{DensityKind, Sample};
use kldsel::divergence;
use kldsel::models::{self, ModelFamily, ParametricModel};
use kldsel::rng::{stream_rng, PURPOSE_SAMPLE};
use kldsel::simulate::{self, ExperimentConfig};

fn main() {
    let n = 150;
    for &pi in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut rng = stream_rng(42, (pi * 100.0) as u64, PURPOSE_SAMPLE);
        let counts = simulate::sample_mixture(pi, n, &mut rng).unwrap();
        let sample = Sample::from_counts(&counts).unwrap();
        let (lo, hi) = bandwidth::default_search_range(&sample).unwrap();
        let cv = bandwidth::select_bandwidth(&sample, BandwidthObjective::Cv, lo, hi).unwrap();
        let mcv = bandwidth::select_bandwidth(&sample, BandwidthObjective::Mcv, lo, hi).unwrap();
        println!("pi={pi}: range=[{lo:.3}, {hi:.3}] h_cv={:.3} h_mcv={:.3}", cv.h_star, mcv.h_star);
    }

    println!("--- continuous MKLD (n=150, 20 reps) ---");
    for &pi in &[0.25, 0.5, 0.75] {
        let mut d1s = Vec::new();
        let mut d2s = Vec::new();
        let mut ratios = Vec::new();
        for rep in 0..20u64 {
            let mut rng = stream_rng(909, rep + (pi * 1000.0) as u64, PURPOSE_SAMPLE);
            let counts = simulate::sample_mixture(pi, n, &mut rng).unwrap();
            if counts.iter().any(|&c| c < 1) {
                continue;
            }
            let sample = Sample::from_counts(&counts).unwrap();
            let (lo, hi) = bandwidth::default_search_range(&sample).unwrap();
            let h_cv = bandwidth::select_bandwidth(&sample, BandwidthObjective::Cv, lo, hi).unwrap().h_star;
            let h_mcv = bandwidth::select_bandwidth(&sample, BandwidthObjective::Mcv, lo, hi).unwrap().h_star;
            let geo = models::fit_mle(ModelFamily::Geometric, &counts).unwrap();
            let theta = match geo.model {
                ParametricModel::Geometric { theta } => theta,
                _ => unreachable!(),
            };
            let pdf = move |x: f64| theta * (1.0 - theta).powf(x - 1.0);
            let scale = 1.0 / (sample.std_dev() * (2.0 * std::f64::consts::PI).sqrt());
            let eps = divergence::threshold_epsilon(n) * scale;
            let d1 = divergence::kld_continuous_kind(&sample, h_cv, DensityKind::Classical, pdf, eps)
                .unwrap()
                .value;
            let d2 = divergence::kld_continuous_kind(&sample, h_mcv, DensityKind::BiasReduced, pdf, eps)
                .unwrap()
                .value;
            d1s.push(d1);
            d2s.push(d2);
            if d1 > 0.0 {
                ratios.push(d2 / d1);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "pi={pi}: D1_cont mean={:.4} D2_cont mean={:.4} MKLD mean={:.4} (k={})",
            mean(&d1s),
            mean(&d2s),
            mean(&ratios),
            ratios.len()
        );
    }

    println!("--- mini MKLD sweep (n=150, 40 reps, B=150) ---");
    for &pi in &[0.25, 0.5, 0.75] {
        let mut config = ExperimentConfig::new(pi, 150, 40, 0.05, 4242).unwrap();
        config.bootstrap_resamples = 150;
        let t = std::time::Instant::now();
        let report = simulate::run_experiment(&config).unwrap();
        println!(
            "pi={pi}: MKLD mean={:.4} (sd {:.4}, k={}) D_cl_geo={:.4} D_br_geo={:.4} kl_n={:.3} [{:?}]",
            report.mkld.mean,
            report.mkld.sd,
            report.mkld.count,
            report.divergence_classical_vs_geometric.mean,
            report.divergence_vs_geometric.mean,
            report.kl_n.mean,
            t.elapsed()
        );
    }

    println!("--- mini selection (n=250, 40 reps, B=150) ---");
    for &pi in &[1.0, 0.0] {
        let mut config = ExperimentConfig::new(pi, 250, 40, 0.05, 777).unwrap();
        config.bootstrap_resamples = 150;
        let t = std::time::Instant::now();
        let report = simulate::run_experiment(&config).unwrap();
        println!(
            "pi={pi}: poisson={:.1}% geometric={:.1}% indecisive={:.1}% kl_n mean={:.2} lambda={:.3} theta={:.4} degen={} [{:?}]",
            report.percent_poisson,
            report.percent_geometric,
            report.percent_indecisive,
            report.kl_n.mean,
            report.lambda_hat.mean,
            report.theta_hat.mean,
            report.degenerate_records,
            t.elapsed()
        );
    }

    println!("--- kl_n growth (pi=1, n=60 vs 250) ---");
    for &nn in &[60usize, 250] {
        let mut config = ExperimentConfig::new(1.0, nn, 40, 0.05, 31).unwrap();
        config.bootstrap_resamples = 150;
        let report = simulate::run_experiment(&config).unwrap();
        println!("n={nn}: kl_n mean={:.3}", report.kl_n.mean);
    }

    println!("--- bias sup-norm ratio (Laplace truth) ---");
    let laplace = |y: f64| 0.5 * (-y.abs()).exp();
    let mean_bkde = |x: f64, h: f64| {
        // E f_b(x) = ∫ phi_h(x - y) f(y) dy by fine trapezoid.
        let (a, b) = (-25.0f64, 25.0f64);
        let m = ((b - a) / (h / 50.0)) as usize;
        let step = (b - a) / m as f64;
        let mut s = 0.0;
        for i in 0..=m {
            let y = a + i as f64 * step;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            let u = (x - y) / h;
            s += w * (3.0 - u * u) * (-0.5 * u * u).exp() * 0.19947114020071635 * laplace(y);
        }
        s * step / h
    };
    let sup_dev = |h: f64| {
        let mut worst: f64 = 0.0;
        for i in 0..=100 {
            let x = -3.0 + 6.0 * i as f64 / 100.0;
            worst = worst.max((mean_bkde(x, h) - laplace(x)).abs());
        }
        worst
    };
    let (s4, s2, s1) = (sup_dev(0.4), sup_dev(0.2), sup_dev(0.1));
    println!("sup|E f_b - f|: h=0.4: {s4:.5}  h=0.2: {s2:.5}  h=0.1: {s1:.5}");
    println!("ratios: {:.3}, {:.3}", s2 / s4, s1 / s2);

    println!("--- MSE rate (criterion 7) ---");
    let sizes = [200, 400, 800, 1600, 3200];
    let t = std::time::Instant::now();
    let br = simulate::mse_rate_experiment(DensityKind::BiasReduced, &sizes, 400, 0.0, 99).unwrap();
    let cl = simulate::mse_rate_experiment(DensityKind::Classical, &sizes, 400, 0.0, 99).unwrap();
    println!("bias-reduced slope={:.4} (theory -8/9={:.4})", br.slope, -8.0 / 9.0);
    println!("classical    slope={:.4} (theory -4/5={:.4}) [{:?}]", cl.slope, -0.8, t.elapsed());
    for e in &br.entries {
        println!("  n={} h={:.3} mse={:.3e}", e.n, e.h, e.mse);
    }
}
