//! Statistical behaviour of the estimators on seeded noisy data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use transduce::extraction::{g0_from_damping, lorentzian, lorentzian_fit, DampingPoint, RealSeries};
use transduce::io::config::Config;
use transduce::optomech::optomechanical_damping;
use transduce::pulsed::{conversion_spectrum, MonteCarlo};

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn lorentzian_fit_is_unbiased_and_sigmas_are_calibrated() {
    let (f0, w, a, o, noise) = (2.799e9, 67e3, 1.0, 0.05, 0.02);
    let x: Vec<f64> = (0..201).map(|i| f0 - 300e3 + 3e3 * i as f64).collect();
    let normal = Normal::new(0.0, noise).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut centers, mut widths, mut reported) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..200 {
        let y: Vec<f64> = x.iter().map(|&f| lorentzian(f, f0, w, a, o) + normal.sample(&mut rng)).collect();
        let mut s = RealSeries::new(x.clone(), y);
        s.sigma = Some(vec![noise; x.len()]);
        let r = lorentzian_fit(&s).unwrap();
        centers.push(r.get("center"));
        widths.push(r.get("fwhm"));
        reported.push(r.sigma("fwhm"));
    }
    let (mc, sc) = mean_sd(&centers);
    let (mw, sw) = mean_sd(&widths);
    let n = (centers.len() as f64).sqrt();
    assert!((mc - f0).abs() < 4.0 * sc / n, "center bias {:.1} Hz, se {:.1}", mc - f0, sc / n);
    assert!((mw - w).abs() < 4.0 * sw / n, "width bias {:.1} Hz, se {:.1}", mw - w, sw / n);
    let (ms, _) = mean_sd(&reported);
    assert!((ms / sw - 1.0).abs() < 0.25, "reported {ms:.1} vs empirical {sw:.1}");
}

#[test]
fn damping_fit_pulls_are_unit_normal() {
    let cfg = Config::reference();
    let c = cfg.device.optical;
    let m = cfg.device.mode("2.799GHz").unwrap();
    let ns = [0.0, 100.0, 250.0, 500.0, 800.0, 1200.0, 1665.0];
    let sigma_hz = 3e3;
    let normal = Normal::new(0.0, sigma_hz).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pulls = Vec::new();
    for _ in 0..300 {
        let pts: Vec<DampingPoint> = ns
            .iter()
            .map(|&n| DampingPoint {
                n_c: n,
                linewidth_hz: optomechanical_damping(&c, m, n, -m.f_m_hz).unwrap() + normal.sample(&mut rng),
                sigma_hz: Some(sigma_hz),
            })
            .collect();
        let r = g0_from_damping(&pts, &c, m.f_m_hz, -m.f_m_hz).unwrap();
        pulls.push((r.get("g0_hz") - m.g0_hz) / r.sigma("g0_hz"));
    }
    let (mp, sp) = mean_sd(&pulls);
    assert!(mp.abs() < 0.2, "pull mean {mp}");
    assert!((sp - 1.0).abs() < 0.15, "pull sd {sp}");
}

#[test]
fn monte_carlo_error_scales_as_inverse_sqrt_n() {
    let cfg = Config::reference();
    let p = cfg.protocol().unwrap();
    let j = p.jitter_model(&cfg.device, "2.799GHz").unwrap();
    let f = [j.center_hz + 20e3];
    let se = |n: usize| {
        conversion_spectrum(&p.schedule, &j, &f, &MonteCarlo { samples: n, seed: 99 }).unwrap()[0].std_err
    };
    let ratio = se(1_000) / se(16_000);
    assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn monte_carlo_seeds_agree_within_error() {
    let cfg = Config::reference();
    let p = cfg.protocol().unwrap();
    let j = p.jitter_model(&cfg.device, "2.799GHz").unwrap();
    let f = [j.center_hz + 30e3];
    let run = |seed| conversion_spectrum(&p.schedule, &j, &f, &MonteCarlo { samples: 20_000, seed }).unwrap()[0];
    let (a, b) = (run(1), run(2));
    let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    assert!((a.phonons - b.phonons).abs() < 5.0 * se, "{a:?} vs {b:?}");
    assert_eq!(run(1), a);
}
