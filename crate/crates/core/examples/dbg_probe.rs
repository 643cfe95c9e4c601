use despca::pipeline::default_config;
use despca::sim::{run_ci_length, run_coverage, ExperimentConfig, ModelSpec, VarianceMode};

fn main() {
    // criterion 3 probe: M2 lengths, estimated variance, 40 reps
    let (p, n) = (200, 200);
    let config = ExperimentConfig {
        model: ModelSpec::Model2,
        p, n,
        replications: 40,
        base_seed: 11,
        variance_mode: VarianceMode::Estimated,
        run_debiased: true,
        run_classical: true,
        coordinates: ExperimentConfig::default_coordinates(p),
        threads: 2,
        pipeline: default_config(p, n).unwrap(),
    };
    let rep = run_ci_length(&config).unwrap();
    let d = rep.debiased.as_ref().unwrap();
    let c = rep.classical.as_ref().unwrap();
    println!("M2 lengths: debiased S0={:.4} S0c={:.4} (target 0.178/0.181 +-30%) | classical S0={:.4} S0c={:.4} | efficient {:.4}/{:.4} | {:.0}s",
        d.length_s0, d.length_s0c, c.length_s0, c.length_s0c,
        rep.efficient_length_s0, rep.efficient_length_s0c, rep.runtime_secs);

    // criterion 7 probe: p=50 n=2000 N=200, z-stats of pivots
    let (p, n) = (50, 2000);
    let config = ExperimentConfig {
        model: ModelSpec::Model2,
        p, n,
        replications: 200,
        base_seed: 21,
        variance_mode: VarianceMode::Known,
        run_debiased: true,
        run_classical: false,
        coordinates: ExperimentConfig::default_coordinates(p),
        threads: 2,
        pipeline: default_config(p, n).unwrap(),
    };
    let rep = run_coverage(&config).unwrap();
    let d = rep.debiased.as_ref().unwrap();
    let mut zs = Vec::new();
    for row in &d.normalized {
        for (k, v) in row.iter().enumerate() {
            if rep.support.contains(&rep.config_echo.coordinates[k]) { zs.push(*v); }
        }
    }
    let stat = |v: &[f64]| {
        let m: f64 = v.iter().sum::<f64>() / v.len() as f64;
        let var: f64 = v.iter().map(|z| (z - m) * (z - m)).sum::<f64>() / v.len() as f64;
        (m, var)
    };
    let (ms, vs) = stat(&zs);
    let (ml, vl) = stat(&d.normalized_eigenvalue);
    println!("c7 probe p50 n2000 N200: z_sup mean={ms:+.3} var={vs:.3} | z_lam mean={ml:+.3} var={vl:.3} | {:.0}s", rep.runtime_secs);
}
