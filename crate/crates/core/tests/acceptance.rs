//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use radblock::detect::{cfar_2d, dbscan, CfarConfig};
use radblock::dsp::{range_angle_map, range_velocity_map, Axis, FftConfig, MapProcessor, Window};
use radblock::experiment::{label_samples, run_experiment, ExperimentConfig};
use radblock::metrics::{evaluate, ConfusionMatrix, MetricsReport};
use radblock::predict::{future_label, split_sequences, LabelConfig, SplitConfig};
use radblock::sim::{
    generate_dataset, synth_frame, ObjectState, RadarConfig, RadarFrameCube, ScenarioConfig,
    SynthOptions,
};
use radblock::tracking::{
    measure, predict, sigma_points, unscented_update, LinearMeasurement, TrackState, UkfConfig,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- FFT

/// Direct DFT along one axis of `data`, optionally fftshifted, with the
/// input zero-padded (or truncated) to `n` points.
fn dft_axis(
    data: &Array3<Complex64>,
    axis: usize,
    n: usize,
    window: &[f64],
    shift: bool,
) -> Array3<Complex64> {
    let mut dim = [data.dim().0, data.dim().1, data.dim().2];
    let len = dim[axis];
    dim[axis] = n;
    let twiddle: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
        .collect();
    let mut out = Array3::<Complex64>::zeros((dim[0], dim[1], dim[2]));
    for ((i0, i1, i2), dst) in out.indexed_iter_mut() {
        let k = [i0, i1, i2][axis];
        let k = if shift { (k + n - n / 2) % n } else { k };
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..len.min(n) {
            let mut idx = [i0, i1, i2];
            idx[axis] = t;
            acc += data[idx] * window[t] * twiddle[(k * t) % n];
        }
        *dst = acc;
    }
    out
}

fn fft_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for f in 0..50 {
        // Mostly small frames keep the O(N^2) oracle fast; every tenth frame
        // uses the full default sizes.
        let (radar, fft) = if f % 10 == 0 {
            (
                RadarConfig::default(),
                FftConfig {
                    range_window: Window::Hann,
                    ..FftConfig::default()
                },
            )
        } else {
            let radar = RadarConfig {
                samples: [16, 24, 32][f % 3],
                chirps: [8, 16][f % 2],
                rx_antennas: [4, 3][f % 2],
                ..RadarConfig::default()
            };
            let fft = FftConfig {
                range_fft: 32,
                doppler_fft: 16,
                angle_fft: if f % 2 == 0 { 64 } else { 8 },
                range_window: if f % 4 < 2 {
                    Window::Rectangular
                } else {
                    Window::Hann
                },
                doppler_window: if f % 5 == 0 {
                    Window::Rectangular
                } else {
                    Window::Hann
                },
                angle_window: Window::Rectangular,
            };
            (radar, fft)
        };
        let mut frame = RadarFrameCube::zeros(&radar, f as u64);
        frame.samples.mapv_inplace(|_| {
            Complex64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        });
        let proc = MapProcessor::new(&radar, &fft).map_err(|e| e.to_string())?;
        let cube = proc.radar_cube(&frame).map_err(|e| e.to_string())?;

        // antenna x sample x chirp -> antenna x range x doppler -> angle
        let r = dft_axis(
            &frame.samples,
            1,
            fft.range_fft,
            &fft.range_window.coefficients(radar.samples),
            false,
        );
        let d = dft_axis(
            &r,
            2,
            fft.doppler_fft,
            &fft.doppler_window.coefficients(radar.chirps),
            true,
        );
        let a = dft_axis(
            &d,
            0,
            fft.angle_fft,
            &fft.angle_window.coefficients(radar.rx_antennas),
            true,
        );

        let view = cube.view();
        let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = a
            .iter()
            .zip(view.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-6 && secs < 10.0,
        format!("max relative error {worst:.2e}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- point targets

fn point_targets() -> Outcome {
    let radar = RadarConfig::default();
    let fft = FftConfig::default();
    let proc = MapProcessor::new(&radar, &fft).map_err(|e| e.to_string())?;
    let axes = *proc.axes();
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let amplitude = 1.0;
    // 20 dB per-sample SNR on the complex IF samples.
    let opts = SynthOptions {
        noise_sigma: amplitude / 10.0,
        path_loss: false,
    };
    let (r_max, v_max) = (radar.max_range(), radar.max_velocity());
    let mut hits = 0;
    for i in 0..100 {
        let range = rng.random_range(1.0..r_max - 1.0);
        let v_r = rng.random_range(-0.95 * v_max..0.95 * v_max);
        let theta = rng.random_range(-60f64.to_radians()..60f64.to_radians());
        let (s, c) = theta.sin_cos();
        let obj = ObjectState {
            id: i,
            position: [range * c, range * s],
            velocity: [v_r * c, v_r * s],
            rcs_gain: amplitude,
            extent: 0.1,
        };
        let frame = synth_frame(&[obj], &radar, &opts, 0, &mut rng).map_err(|e| e.to_string())?;
        let cube = proc.radar_cube(&frame).map_err(|e| e.to_string())?;
        let argmax = |m: &Array2<f64>| {
            m.indexed_iter()
                .fold(
                    ((0, 0), f64::MIN),
                    |best, (ix, &v)| if v > best.1 { (ix, v) } else { best },
                )
                .0
        };
        let (rv_r, rv_v) = argmax(&range_velocity_map(&cube).data);
        let (ra_r, ra_a) = argmax(&range_angle_map(&cube).data);
        let near = |bin: usize, truth: f64| (bin as f64 - truth).abs() <= 1.0;
        let tr = axes.physical_to_bin(Axis::Range, range);
        let tv = axes.physical_to_bin(Axis::Velocity, v_r);
        let ta = axes.physical_to_bin(Axis::Angle, theta);
        if near(rv_r, tr) && near(rv_v, tv) && near(ra_r, tr) && near(ra_a, ta) {
            hits += 1;
        }
    }
    check(hits >= 95, format!("{hits}/100 targets within one bin"))
}

// ---------------------------------------------------------------- CFAR

fn brute_cfar(map: &Array2<f64>, cfg: &CfarConfig) -> Array2<bool> {
    let (rows, cols) = map.dim();
    let h = [cfg.train[0] + cfg.guard[0], cfg.train[1] + cfg.guard[1]];
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (mut sum, mut n) = (0.0, 0usize);
        for di in -(h[0] as i64)..=h[0] as i64 {
            for dj in -(h[1] as i64)..=h[1] as i64 {
                let (r, c) = (i as i64 + di, j as i64 + dj);
                if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 {
                    continue;
                }
                if di.unsigned_abs() as usize <= cfg.guard[0]
                    && dj.unsigned_abs() as usize <= cfg.guard[1]
                {
                    continue;
                }
                sum += map[[r as usize, c as usize]];
                n += 1;
            }
        }
        map[[i, j]] > cfg.alpha * sum / n as f64
    })
}

fn cfar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let cfg = CfarConfig::default();
    let h = [cfg.train[0] + cfg.guard[0], cfg.train[1] + cfg.guard[1]];
    let (mut alarms, mut cells) = (0usize, 0usize);
    while cells < 150_000 {
        let map = Array2::from_shape_fn((256, 128), |_| Exp1.sample(&mut rng));
        let out = cfar_2d(&map, &cfg).map_err(|e| e.to_string())?;
        for i in h[0]..256 - h[0] {
            for j in h[1]..128 - h[1] {
                cells += 1;
                alarms += usize::from(out.mask[[i, j]]);
            }
        }
    }
    let pfa = alarms as f64 / cells as f64;

    let mut mismatches = 0;
    for _ in 0..200 {
        let guard = [rng.random_range(0..3), rng.random_range(0..3)];
        let train = [
            guard[0] + rng.random_range(1..6),
            guard[1] + rng.random_range(1..6),
        ];
        let c = CfarConfig {
            train,
            guard,
            alpha: rng.random_range(1.0..8.0),
        };
        let rows = rng.random_range(2 * (train[0] + guard[0]) + 1..=64);
        let cols = rng.random_range(2 * (train[1] + guard[1]) + 1..=64);
        let map = Array2::from_shape_fn((rows, cols), |_| Exp1.sample(&mut rng));
        let fast = cfar_2d(&map, &c).map_err(|e| e.to_string())?;
        if fast.mask != brute_cfar(&map, &c) {
            mismatches += 1;
        }
    }
    check(
        (0.5e-3..=2e-3).contains(&pfa) && mismatches == 0,
        format!("P_fa {pfa:.2e} over {cells} cells; {mismatches}/200 oracle mismatches"),
    )
}

// ---------------------------------------------------------------- DBSCAN

/// Union-find reference: clusters are components of core points, numbered
/// by their first core point in lexicographic order; borders join the
/// lowest-numbered adjacent cluster.
fn reference_dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |a: usize, b: usize| {
        let (dx, dy) = (points[a][0] - points[b][0], points[a][1] - points[b][1]);
        dx * dx + dy * dy <= eps * eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(a.cmp(&b))
    });
    let mut number = std::collections::HashMap::new();
    for &i in &order {
        if core[i] {
            let root = find(&mut parent, i);
            let next = number.len();
            number.entry(root).or_insert(next);
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                Some(number[&find(&mut parent, i)])
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| number[&find(&mut parent, j)])
                    .min()
            }
        })
        .collect()
}

fn dbscan_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut mismatches = 0;
    for t in 0..100 {
        let n = rng.random_range(1..=200);
        let side = rng.random_range(10.0..60.0);
        let points: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let p = [rng.random_range(0.0..side), rng.random_range(0.0..side)];
                // Half the instances sit on an integer grid like CFAR bins.
                if t % 2 == 0 {
                    p.map(f64::floor)
                } else {
                    p
                }
            })
            .collect();
        let eps = rng.random_range(1.0..4.0);
        let min_pts = rng.random_range(1..6);
        if dbscan(&points, eps, min_pts) != reference_dbscan(&points, eps, min_pts) {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches}/100 instances differ"),
    )
}

// ---------------------------------------------------------------- UKF

fn random_spd(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() + Matrix4::identity() * 0.1
}

fn ukf() -> Outcome {
    let cfg = UkfConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);

    let mut sigma_err: f64 = 0.0;
    for _ in 0..100 {
        let mean = Vector4::from_fn(|_, _| rng.random_range(-20.0..20.0));
        let cov = random_spd(&mut rng);
        let sp = sigma_points(&mean, &cov, &cfg);
        let (m, c) = (sp.mean(), sp.covariance());
        sigma_err = sigma_err.max(
            m.iter()
                .zip(mean.iter())
                .map(|(a, b)| rel(*a, *b))
                .fold(0.0, f64::max),
        );
        sigma_err = sigma_err.max(
            c.iter()
                .zip(cov.iter())
                .map(|(a, b)| rel(*a, *b))
                .fold(0.0, f64::max),
        );
    }

    let mut kf_err: f64 = 0.0;
    for _ in 0..100 {
        let mean = Vector4::from_fn(|_, _| rng.random_range(-20.0..20.0));
        let cov = random_spd(&mut rng);
        let h = Matrix3x4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let r = Matrix3::from_diagonal(&Vector3::from_fn(|_, _| rng.random_range(0.05..1.0)));
        let z = Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let (m, p) = unscented_update(&mean, &cov, &z, &r, &LinearMeasurement(h), &cfg)
            .map_err(|e| e.to_string())?;
        let s = h * cov * h.transpose() + r;
        let k = cov * h.transpose() * s.try_inverse().ok_or("singular S")?;
        let m_ref = mean + k * (z - h * mean);
        let p_ref = (Matrix4::identity() - k * h) * cov;
        kf_err = kf_err.max((m - m_ref).amax() / m_ref.amax().max(1.0));
        kf_err = kf_err.max((p - p_ref).amax() / p_ref.amax().max(1.0));
    }

    // Constant-velocity truth, noisy polar measurements.
    let sd = cfg.measurement_noise.map(f64::sqrt);
    let (mut se_track, mut se_raw, mut count) = (0.0, 0.0, 0usize);
    for id in 0..20u64 {
        let truth0 = Vector4::new(
            rng.random_range(8.0..30.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
        );
        let f = cfg.transition();
        let noisy = |x: &Vector4<f64>, rng: &mut ChaCha8Rng| -> Result<Vector3<f64>, String> {
            let z = measure(x).map_err(|e| e.to_string())?;
            Ok(Vector3::new(
                z[0] + sd[0] * rng.sample::<f64, _>(StandardNormal),
                z[1] + sd[1] * rng.sample::<f64, _>(StandardNormal),
                z[2] + sd[2] * rng.sample::<f64, _>(StandardNormal),
            ))
        };
        let mut truth = truth0;
        let z0 = noisy(&truth, &mut rng)?;
        let (s, c) = z0[2].sin_cos();
        let mut track = TrackState::new(
            id,
            Vector4::new(z0[0] * c, z0[0] * s, z0[1] * c, z0[1] * s),
            Matrix4::from_diagonal(&Vector4::new(0.09, 0.09, 4.0, 4.0)),
        );
        for step in 1..40 {
            truth = f * truth;
            let z = noisy(&truth, &mut rng)?;
            track = radblock::tracking::update(&predict(&track, &cfg), &z, &cfg)
                .map_err(|e| e.to_string())?;
            if step >= 5 {
                let (s, c) = z[2].sin_cos();
                let raw = [z[0] * c, z[0] * s];
                let est = track.position();
                se_raw += (raw[0] - truth[0]).powi(2) + (raw[1] - truth[1]).powi(2);
                se_track += (est[0] - truth[0]).powi(2) + (est[1] - truth[1]).powi(2);
                count += 1;
            }
        }
    }
    let (rmse_track, rmse_raw) = (
        (se_track / count as f64).sqrt(),
        (se_raw / count as f64).sqrt(),
    );
    check(
        sigma_err <= 1e-12 && kf_err <= 1e-9 && rmse_track < rmse_raw,
        format!(
            "sigma rel err {sigma_err:.1e}; linear update err {kf_err:.1e}; position RMSE track {rmse_track:.3} m vs raw {rmse_raw:.3} m"
        ),
    )
}

// ---------------------------------------------------------------- labels

fn labeling() -> Outcome {
    let mut mismatches = 0;
    for bits in 0u32..1 << 10 {
        let blocked: Vec<bool> = std::iter::once(false)
            .chain((0..10).map(|i| bits >> i & 1 == 1))
            .collect();
        for t_p in 1..=10 {
            let mut expected = false;
            for &b in &blocked[1..=t_p] {
                if b {
                    expected = true;
                }
            }
            if future_label(&blocked, 0, t_p) != Some(expected) {
                mismatches += 1;
            }
        }
    }

    let scenario = ScenarioConfig::default();
    let sequences = generate_dataset(&scenario).map_err(|e| e.to_string())?;
    let splits =
        split_sequences(sequences.len(), &SplitConfig::default()).map_err(|e| e.to_string())?;
    let blocked: Vec<(usize, &[bool])> = sequences
        .iter()
        .map(|s| (s.id, s.blocked.as_slice()))
        .collect();
    let samples = label_samples(&blocked, &splits, &LabelConfig::default());
    let fractions: Vec<f64> = (1..=10)
        .map(|t_p| {
            samples
                .iter()
                .filter(|s| s.label(t_p) == Some(true))
                .count() as f64
                / samples.len() as f64
        })
        .collect();
    let monotone = fractions.windows(2).all(|w| w[0] <= w[1]);
    check(
        mismatches == 0 && monotone && sequences.len() == 100,
        format!(
            "{mismatches} OR mismatches over 2^10 patterns; blocked fraction T_p=1..10: {}",
            fractions
                .iter()
                .map(|f| format!("{f:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

// ---------------------------------------------------------------- end to end

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig::default();
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let row = report.row(9).ok_or("no T_p = 9 row")?;
    let (f1, acc) = (
        row.metrics.f1.unwrap_or(0.0),
        row.metrics.accuracy.unwrap_or(0.0),
    );
    check(
        f1 >= 0.75 && acc >= 0.85 && secs < 300.0,
        format!(
            "T_p=9 ({:.2} s): F1 {f1:.3}, accuracy {acc:.3} on {} test samples; {secs:.0} s",
            row.seconds,
            row.metrics.confusion.total()
        ),
    )
}

// ---------------------------------------------------------------- metrics

fn metrics() -> Outcome {
    // (tp, fp, tn, fn) with precision, recall and F1 worked out by hand as
    // fractions (numerator, denominator).
    type Frac = Option<(u64, u64)>;
    type Table = ((u64, u64, u64, u64), Frac, Frac, Frac);
    let tables: [Table; 10] = [
        ((9, 1, 89, 1), Some((9, 10)), Some((9, 10)), Some((9, 10))),
        ((1, 0, 0, 0), Some((1, 1)), Some((1, 1)), Some((1, 1))),
        ((0, 0, 10, 0), None, None, None),
        ((0, 5, 5, 0), Some((0, 5)), None, None),
        ((0, 0, 5, 5), None, Some((0, 5)), None),
        ((3, 2, 4, 1), Some((3, 5)), Some((3, 4)), Some((2, 3))),
        (
            (50, 25, 20, 5),
            Some((2, 3)),
            Some((10, 11)),
            Some((10, 13)),
        ),
        ((7, 3, 0, 7), Some((7, 10)), Some((1, 2)), Some((7, 12))),
        ((1, 2, 3, 4), Some((1, 3)), Some((1, 5)), Some((1, 4))),
        ((12, 0, 30, 36), Some((1, 1)), Some((1, 4)), Some((2, 5))),
    ];
    let frac = |f: Frac| f.map(|(n, d)| n as f64 / d as f64);
    let mut bad = Vec::new();
    for (i, ((tp, fp, tn, fn_), p, r, f)) in tables.into_iter().enumerate() {
        // Realize the table as prediction/label vectors.
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for (pred, label, n) in [
            (true, true, tp),
            (true, false, fp),
            (false, false, tn),
            (false, true, fn_),
        ] {
            preds.extend(std::iter::repeat_n(pred, n as usize));
            labels.extend(std::iter::repeat_n(label, n as usize));
        }
        let report = evaluate(&preds, &labels).map_err(|e| e.to_string())?;
        let expected = MetricsReport::from_confusion(ConfusionMatrix { tp, fp, tn, fn_ });
        let acc = Some((tp + tn) as f64 / (tp + fp + tn + fn_) as f64);
        if report.precision != frac(p)
            || report.recall != frac(r)
            || report.f1 != frac(f)
            || report.accuracy != acc
            || report != expected
        {
            bad.push(i);
        }
    }
    check(
        bad.is_empty(),
        format!("{} of 10 tables exact; failing {bad:?}", 10 - bad.len()),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("fft-oracle", fft_oracle),
        ("point-target-recovery", point_targets),
        ("cfar", cfar),
        ("dbscan", dbscan_oracle),
        ("ukf", ukf),
        ("labeling", labeling),
        ("end-to-end", end_to_end),
        ("metrics", metrics),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
