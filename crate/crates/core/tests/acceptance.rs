//! End-to-end acceptance checks for the full pipeline.
//!
//! Runs as a plain binary (no test harness) so that every criterion prints
//! exactly one PASS/FAIL line regardless of outcome; the process exits
//! nonzero if any criterion fails.

use std::f64::consts::TAU;
use std::time::Instant;

use inhand::config::{BeamModelParams, Config, SensorNoiseParams};
use inhand::controller::{select_action, softmin_weights, ActionSequence, ControllerState};
use inhand::filter::{
    beam_likelihood, estimate, init_particles, measurement_update, resample_if_needed,
};
use inhand::geom::Vec2;
use inhand::hand::{sensor_frames, HandParams, JointVector, SensorFrame};
use inhand::harness::{run_experiment, ModeSummary, TrialMode};
use inhand::sensor::{
    expected_measurements, raycast_cylinder, simulate_measurements, tactile_truncate,
    MeasurementVector, SensingMode,
};
use inhand::stats::mann_whitney_u;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict}  {name}: {detail}");
        if !ok {
            self.failures += 1;
        }
    }
}

fn mode_summary(sums: &[ModeSummary], mode: TrialMode) -> &ModeSummary {
    sums.iter().find(|m| m.mode == mode).expect("mode present")
}

/// Dense marching oracle for the beam model: walk the ray in 0.01 mm steps.
fn march_oracle(f: &SensorFrame, center: Vec2, radius: f64, range_min: f64, z_max: f64) -> f64 {
    let step = 0.01;
    let n = (z_max / step).ceil() as usize;
    for i in 0..=n {
        let t = i as f64 * step;
        if (f.origin + t * f.direction).distance(center) <= radius {
            return t.clamp(range_min, z_max);
        }
    }
    z_max
}

/// Rank-test oracle straight from the definition: U counts pairs a_i > b_j
/// (ties half), p enumerates every assignment of pooled values to the
/// first sample.
fn brute_force_utest(a: &[f64], b: &[f64]) -> (f64, f64) {
    fn u_stat(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for &x in a {
            for &y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }
    let n1 = a.len();
    let n = n1 + b.len();
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mu = (a.len() * b.len()) as f64 / 2.0;
    let observed = u_stat(a, b);
    let dev = (observed - mu).abs();
    let (mut total, mut extreme) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        let (mut pa, mut pb) = (Vec::new(), Vec::new());
        for (i, &v) in pooled.iter().enumerate() {
            if mask & (1 << i) != 0 {
                pa.push(v);
            } else {
                pb.push(v);
            }
        }
        if (u_stat(&pa, &pb) - mu).abs() >= dev - 1e-12 {
            extreme += 1;
        }
    }
    (observed, extreme as f64 / total as f64)
}

fn main() {
    let mut report = Report { failures: 0 };
    let cfg = Config::default();

    // Shared experiment run: 10 trials per mode, paired seeds, defaults.
    let dir_a = tempfile::tempdir().expect("tempdir");
    let dir_b = tempfile::tempdir().expect("tempdir");
    let started = Instant::now();
    let summary = run_experiment(&cfg, &TrialMode::all(), 10, 0, dir_a.path())
        .expect("experiment runs");
    let elapsed = started.elapsed().as_secs_f64();
    let summary_b = run_experiment(&cfg, &TrialMode::all(), 10, 0, dir_b.path())
        .expect("experiment reruns");

    let fid = mode_summary(&summary.modes, TrialMode::Fiducial);
    let prox = mode_summary(&summary.modes, TrialMode::Proximity);
    let tact = mode_summary(&summary.modes, TrialMode::Tactile);

    // 1. Mean pose error: full-range sensing beats contact-range sensing by
    //    at least 30%, significant under the rank test, within the runtime
    //    budget.
    {
        let p = summary.pose_error_test.as_ref().expect("test computed").p;
        let ok = prox.pose_error_mean < tact.pose_error_mean
            && prox.pose_error_mean <= 0.7 * tact.pose_error_mean
            && p < 0.05
            && elapsed <= 600.0;
        report.check(
            "pose-error-comparison",
            ok,
            format!(
                "proximity {:.2} mm vs tactile {:.2} mm (ratio {:.2}), p = {:.4}, {:.0} s",
                prox.pose_error_mean,
                tact.pose_error_mean,
                prox.pose_error_mean / tact.pose_error_mean,
                p,
                elapsed
            ),
        );
    }

    // 2. Success counts: full-range sensing nearly always succeeds,
    //    contact-range sensing strictly less often.
    {
        let ok = prox.success_count >= 9 && tact.success_count < prox.success_count;
        report.check(
            "success-rate-comparison",
            ok,
            format!(
                "proximity {}/10, tactile {}/10",
                prox.success_count, tact.success_count
            ),
        );
    }

    // 3. Final goal distance: full-range mean over all trials below the
    //    contact-range mean over its successful trials.
    {
        let ratio = prox.goal_dist_all_mean / tact.goal_dist_success_mean;
        let ok = prox.goal_dist_all_mean < tact.goal_dist_success_mean;
        report.check(
            "final-distance-comparison",
            ok,
            format!(
                "proximity {:.1} mm (all trials) vs tactile {:.1} mm (successes), ratio {:.2}",
                prox.goal_dist_all_mean, tact.goal_dist_success_mean, ratio
            ),
        );
    }

    // 4. Filter invariants: weights normalized after every update, the
    //    batched 8-beam update factorizes into sequential single-beam
    //    updates, and the estimate locks onto a static object.
    {
        let hand = HandParams::default();
        let joints = JointVector([0.0, 1.094, 1.561, 1.444, 0.046, 0.046]);
        let truth = Vec2::new(-20.0, 90.0);
        let beam = BeamModelParams::default();

        // normalization over repeated noisy updates
        let mut rng = StdRng::seed_from_u64(11);
        let mut ps = init_particles(truth, 5.0, 500, &mut rng);
        let mut worst_norm: f64 = 0.0;
        for _ in 0..50 {
            let z = simulate_measurements(
                &joints,
                truth,
                &hand,
                cfg.object.radius,
                &cfg.sensor.noise,
                SensingMode::Proximity,
                &mut rng,
            );
            measurement_update(
                &mut ps,
                &z,
                &joints,
                SensingMode::Proximity,
                &hand,
                cfg.object.radius,
                &beam,
            )
            .expect("update succeeds");
            worst_norm = worst_norm.max((ps.weight_sum() - 1.0).abs());
            resample_if_needed(&mut ps, cfg.filter.ess_threshold_fraction, &mut rng);
        }
        let norm_ok = worst_norm < 1e-9;

        // batch equals sequential per-beam reweighting
        let z = expected_measurements(&joints, truth, &hand, cfg.object.radius);
        let mut rng = StdRng::seed_from_u64(12);
        let base = init_particles(truth, 5.0, 200, &mut rng);
        let mut batch = base.clone();
        measurement_update(
            &mut batch,
            &z,
            &joints,
            SensingMode::Proximity,
            &hand,
            cfg.object.radius,
            &beam,
        )
        .expect("update succeeds");
        let frames = sensor_frames(&joints, &hand);
        let mut seq = base.clone();
        for (j, frame) in frames.iter().enumerate() {
            let mut sum = 0.0;
            for p in seq.particles.iter_mut() {
                let zs = raycast_cylinder(
                    frame,
                    p.position,
                    cfg.object.radius,
                    hand.sensor_range_min,
                    hand.sensor_range_max,
                );
                p.weight *= beam_likelihood(z.0[j], zs, &beam);
                sum += p.weight;
            }
            for p in seq.particles.iter_mut() {
                p.weight /= sum;
            }
        }
        let factor_ok = batch
            .particles
            .iter()
            .zip(seq.particles.iter())
            .all(|(a, b)| (a.weight - b.weight).abs() <= 1e-9 * b.weight.max(1e-300));

        // static convergence on every seed
        let noise = SensorNoiseParams {
            sigma: 5.0,
            outlier_rate: 0.0,
        };
        let mut converged = 0;
        let mut worst_err: f64 = 0.0;
        for seed in 0..30 {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut ps = init_particles(truth + Vec2::new(2.0, -3.0), 5.0, 1000, &mut rng);
            for _ in 0..20 {
                let z = simulate_measurements(
                    &joints,
                    truth,
                    &hand,
                    cfg.object.radius,
                    &noise,
                    SensingMode::Proximity,
                    &mut rng,
                );
                measurement_update(
                    &mut ps,
                    &z,
                    &joints,
                    SensingMode::Proximity,
                    &hand,
                    cfg.object.radius,
                    &beam,
                )
                .expect("update succeeds");
                resample_if_needed(&mut ps, 0.5, &mut rng);
            }
            let err = estimate(&ps).0.distance(truth);
            worst_err = worst_err.max(err);
            if err < 3.0 {
                converged += 1;
            }
        }
        let conv_ok = converged == 30;

        report.check(
            "filter-invariants",
            norm_ok && factor_ok && conv_ok,
            format!(
                "norm dev {worst_norm:.1e}, factorization {}, static convergence {converged}/30 (worst {worst_err:.2} mm)",
                if factor_ok { "exact" } else { "broken" }
            ),
        );
    }

    // 5. Sensor model: the closed-form raycast matches a dense marching
    //    oracle, and the contact-range truncation is idempotent and
    //    information-destroying.
    {
        let mut rng = StdRng::seed_from_u64(3);
        let mut checked = 0;
        let mut worst_dev: f64 = 0.0;
        while checked < 1000 {
            let origin = Vec2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let direction = Vec2::from_angle(rng.gen_range(0.0..TAU));
            let center = Vec2::new(rng.gen_range(-150.0..150.0), rng.gen_range(-150.0..150.0));
            let radius = rng.gen_range(10.0..60.0);
            let f = SensorFrame { origin, direction };
            // skip near-tangency: both methods may legitimately disagree there
            let oc = center - origin;
            let perp = (oc.norm_squared() - oc.dot(direction).powi(2)).max(0.0).sqrt();
            if (perp - radius).abs() < 0.1 {
                continue;
            }
            let fast = raycast_cylinder(&f, center, radius, 10.0, 255.0);
            let slow = march_oracle(&f, center, radius, 10.0, 255.0);
            worst_dev = worst_dev.max((fast - slow).abs());
            checked += 1;
        }
        let ray_ok = worst_dev < 0.05;

        let d_max = cfg.sensor.d_tact_max;
        let mut rng = StdRng::seed_from_u64(4);
        let idem_ok = (0..100).all(|_| {
            let z = MeasurementVector((0..8).map(|_| rng.gen_range(10.0..255.0)).collect());
            let once = tactile_truncate(&z, d_max);
            once.0.iter().all(|&v| v <= d_max) && tactile_truncate(&once, d_max) == once
        });

        // two standoff poses with distinct informative readings, all beyond
        // the contact-range threshold
        let hand = HandParams::default();
        let joints = JointVector([0.0, 1.094, 1.561, 1.444, 0.046, 0.046]);
        let za = expected_measurements(&joints, Vec2::new(-20.0, 100.0), &hand, cfg.object.radius);
        let zb = expected_measurements(&joints, Vec2::new(-14.0, 106.0), &hand, cfg.object.radius);
        let destroy_ok = za != zb
            && za.0.iter().all(|&v| v > d_max)
            && zb.0.iter().all(|&v| v > d_max)
            && tactile_truncate(&za, d_max) == tactile_truncate(&zb, d_max);

        report.check(
            "sensor-model",
            ray_ok && idem_ok && destroy_ok,
            format!(
                "raycast vs oracle worst dev {worst_dev:.4} mm over 1000 configs, truncation idempotent {idem_ok}, distant poses indistinguishable {destroy_ok}"
            ),
        );
    }

    // 6. Controller invariants: softmin weights are a distribution, small
    //    lambda selects the argmin, hysteresis holds the active brake
    //    configuration inside its band, and the ground-truth reference mode
    //    completes every trial.
    {
        let mut rng = StdRng::seed_from_u64(5);
        let mut worst_sum_dev: f64 = 0.0;
        let mut argmin_ok = true;
        for _ in 0..100 {
            let costs: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..50.0)).collect();
            let w = softmin_weights(&costs, cfg.controller.lambda);
            worst_sum_dev = worst_sum_dev.max((w.iter().sum::<f64>() - 1.0).abs());
            let w_sharp = softmin_weights(&costs, 1e-3);
            let best = costs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty")
                .0;
            if w_sharp[best] < 1.0 - 1e-9 {
                argmin_ok = false;
            }
        }
        let softmin_ok = worst_sum_dev < 1e-12;

        // frozen in-band cost landscape: the active configuration must hold
        let mut ctrl = ControllerState {
            nominal: Vec::new(),
            active: Some(4),
            active_cost: 100.0,
        };
        let band_lo = (1.0 - cfg.controller.phi) * 100.0;
        let scored: Vec<(ActionSequence, f64)> = inhand::world::BrakeConfig::all()
            .iter()
            .enumerate()
            .map(|(i, &brake)| {
                let cost = if i == 4 {
                    100.0
                } else {
                    band_lo + (i as f64 + 0.5) / 10.0 * (100.0 - band_lo)
                };
                (
                    ActionSequence {
                        brake,
                        motors: vec![[0.5, 0.5]; 2],
                    },
                    cost,
                )
            })
            .collect();
        let mut hysteresis_ok = true;
        for _ in 0..100 {
            select_action(&mut ctrl, &scored, &cfg.controller);
            if ctrl.active != Some(4) {
                hysteresis_ok = false;
                break;
            }
        }

        let fid_ok = fid.success_count == 10;
        report.check(
            "controller-invariants",
            softmin_ok && argmin_ok && hysteresis_ok && fid_ok,
            format!(
                "softmin sum dev {worst_sum_dev:.1e}, sharp-lambda argmin {argmin_ok}, hysteresis hold {hysteresis_ok}, fiducial {}/10",
                fid.success_count
            ),
        );
    }

    // 7. Reproducibility: the same base seed yields byte-identical artifacts.
    {
        let read = |dir: &std::path::Path, name: &str| std::fs::read(dir.join(name)).expect("artifact");
        let trials_same = read(dir_a.path(), "trials.csv") == read(dir_b.path(), "trials.csv");
        let summary_same = read(dir_a.path(), "summary.csv") == read(dir_b.path(), "summary.csv");
        // independent in-process check on the aggregated numbers
        let pose_same = summary
            .modes
            .iter()
            .zip(summary_b.modes.iter())
            .all(|(a, b)| a.pose_error_mean.to_bits() == b.pose_error_mean.to_bits());
        report.check(
            "reproducibility",
            trials_same && summary_same && pose_same,
            format!("trials.csv identical {trials_same}, summary.csv identical {summary_same}"),
        );
    }

    // 8. Exact rank test: matches the brute-force enumeration oracle for
    //    every sample-size split up to 10 pooled values, ties included.
    {
        let mut rng = StdRng::seed_from_u64(6);
        let mut cases = 0;
        let mut exact_ok = true;
        for n1 in 1..=9usize {
            for n2 in 1..=(10 - n1) {
                for _ in 0..5 {
                    // small integer grid so ties occur regularly
                    let a: Vec<f64> = (0..n1).map(|_| rng.gen_range(0..6) as f64).collect();
                    let b: Vec<f64> = (0..n2).map(|_| rng.gen_range(0..6) as f64).collect();
                    let r = mann_whitney_u(&a, &b).expect("valid samples");
                    let (u_oracle, p_oracle) = brute_force_utest(&a, &b);
                    if (r.u - u_oracle).abs() > 1e-12 || (r.p - p_oracle).abs() > 1e-12 {
                        exact_ok = false;
                    }
                    cases += 1;
                }
            }
        }
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).expect("valid samples");
        let pair_ok = r.u == 0.0 && (r.p - 2.0 / 6.0).abs() < 1e-12;
        report.check(
            "rank-test-exact",
            exact_ok && pair_ok,
            format!(
                "{cases} enumerated cases match, separated pairs give p = {:.4}",
                r.p
            ),
        );
    }

    if report.failures == 0 {
        println!("acceptance: all criteria passed");
        std::process::exit(0);
    } else {
        println!("acceptance: {} criterion(s) failed", report.failures);
        std::process::exit(1);
    }
}
