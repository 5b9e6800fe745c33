use fpp_core::exec::Sequential;
use fpp_core::field::{BondWeights, WeightField};
use fpp_core::scaling::mean_passage_series;
use fpp_core::{PassageLaw, Sign, Step};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn weights_of_distinct_bonds_are_uncorrelated() {
    let pairs = [
        ((0, [0]), Step::new(0, Sign::Plus), (0, [0]), Step::new(0, Sign::Minus)),
        ((0, [0]), Step::new(0, Sign::Plus), (1, [1]), Step::new(0, Sign::Minus)),
        ((5, [3]), Step::new(0, Sign::Minus), (5, [5]), Step::new(0, Sign::Minus)),
    ];
    for (a, sa, b, sb) in pairs {
        let n = 10_000;
        let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for seed in 0..n as u64 {
            let w = WeightField::new(seed, PassageLaw::exponential(1.0), 1).unwrap();
            xs.push(w.step_weight(a.0, &a.1, sa));
            ys.push(w.step_weight(b.0, &b.1, sb));
        }
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() < 0.05, "rho = {rho}");
    }
}

#[test]
fn two_step_mean_matches_direct_simulation() {
    // T((0,0),(2,0)) in d = 1 is the smaller of two independent sums of two
    // Exp(1) weights.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let k = 10_000_000;
    let mut sum = 0.0;
    for _ in 0..k {
        let e: [f64; 4] = core::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
        sum += (e[0] + e[1]).min(e[2] + e[3]);
    }
    let oracle = sum / k as f64;
    let s = mean_passage_series(&Sequential, &PassageLaw::exponential(1.0), 1, &[2], &[0], 200_000, 0).unwrap();
    let e = &s.entries[0];
    assert!((e.mean - oracle).abs() < 4.0 * e.stderr, "{} vs {oracle} (se {})", e.mean, e.stderr);
}

#[test]
fn quadrupling_samples_halves_the_standard_error() {
    let law = PassageLaw::exponential(1.0);
    let a = mean_passage_series(&Sequential, &law, 1, &[16], &[0], 4_000, 0).unwrap();
    let b = mean_passage_series(&Sequential, &law, 1, &[16], &[0], 16_000, 0).unwrap();
    let ratio = a.entries[0].stderr / b.entries[0].stderr;
    assert!((ratio - 2.0).abs() < 0.15, "ratio {ratio}");
}
