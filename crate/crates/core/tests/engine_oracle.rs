use fpp_core::engine::{brute_force_front, geodesic, layer_passage_times, min_passage_time, path_weight};
use fpp_core::field::{BondWeights, WeightField};
use fpp_core::{PassageLaw, Sign, Site, Step};
use proptest::prelude::*;

#[test]
fn dp_matches_enumeration_on_every_cell() {
    for d in 1..=2usize {
        for m in (2..=8).step_by(2) {
            for seed in 0..100u64 {
                let w = WeightField::new(seed, PassageLaw::exponential(1.0), d).unwrap();
                let origin = Site::origin(d);
                let front = layer_passage_times(&w, &origin, m).unwrap();
                let oracle = brute_force_front(&w, &origin, m).unwrap();
                assert_eq!(front.finite_cells().count(), oracle.len());
                for (x, t) in &oracle {
                    assert_eq!(front.get(x).to_bits(), t.to_bits(), "d={d} m={m} seed={seed} x={x:?}");
                }
            }
        }
    }
}

/// Adds a fixed nonnegative amount to every bond leaving layer `layer`.
struct Raised<'a> {
    base: &'a WeightField,
    layer: i32,
    extra: f64,
}

impl BondWeights for Raised<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn step_weight(&self, layer: i32, from: &[i32], step: Step) -> f64 {
        let w = self.base.step_weight(layer, from, step);
        if layer == self.layer {
            w + self.extra
        } else {
            w
        }
    }
}

/// The field seen through the reflection `x -> -x`.
struct Reflected<'a>(&'a WeightField);

impl BondWeights for Reflected<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn step_weight(&self, layer: i32, from: &[i32], step: Step) -> f64 {
        let x: Vec<i32> = from.iter().map(|v| -v).collect();
        self.0.step_weight(layer, &x, Step::new(step.axis as usize, step.sign.flip()))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality(seed in any::<u64>(), a in 1i32..8, b in 1i32..8, x in -4i32..=4, y in -4i32..=4) {
        let w = WeightField::new(seed, PassageLaw::exponential(1.0), 1).unwrap();
        let o = Site::origin(1);
        let (x, y) = (if (a + x) % 2 == 0 { x } else { x + 1 }, if (a + b + y) % 2 == 0 { y } else { y + 1 });
        let u = Site::new(a, [x]);
        let v = Site::new(a + b, [y]);
        prop_assume!(o.reaches(&u) && u.reaches(&v));
        let direct = min_passage_time(&w, &o, &v).unwrap();
        let via = min_passage_time(&w, &o, &u).unwrap() + min_passage_time(&w, &u, &v).unwrap();
        prop_assert!(direct <= via);
    }

    #[test]
    fn raising_weights_never_lowers_passage_times(seed in any::<u64>(), layer in 0i32..10, extra in 0.0f64..3.0) {
        let w = WeightField::new(seed, PassageLaw::exponential(1.0), 2).unwrap();
        let raised = Raised { base: &w, layer, extra };
        let target = Site::new(10, [2, 0]);
        let t0 = min_passage_time(&w, &Site::origin(2), &target).unwrap();
        let t1 = min_passage_time(&raised, &Site::origin(2), &target).unwrap();
        prop_assert!(t1 >= t0);
        prop_assert!(t1 <= t0 + extra + 1e-12);
    }

    #[test]
    fn reflection_equivariance(seed in any::<u64>(), x in -6i32..=6, y in -6i32..=6) {
        let w = WeightField::new(seed, PassageLaw::exponential(1.0), 2).unwrap();
        let y = if (x + y) % 2 == 0 { y } else { y + 1 };
        let t = min_passage_time(&w, &Site::origin(2), &Site::new(12, [x, y])).unwrap();
        let r = min_passage_time(&Reflected(&w), &Site::origin(2), &Site::new(12, [-x, -y])).unwrap();
        prop_assert_eq!(t.to_bits(), r.to_bits());
    }

    #[test]
    fn geodesics_realize_passage_times(seed in any::<u64>(), d in 1usize..=3, m in 1i32..20) {
        let w = WeightField::new(seed, PassageLaw::exponential(1.0), d).unwrap();
        let mut x = vec![0; d];
        x[0] = m % 2;
        let target = Site::new(m, x);
        let g = geodesic(&w, &Site::origin(d), &target).unwrap();
        let path = g.geodesic.unwrap();
        prop_assert_eq!(path.end().unwrap(), target);
        prop_assert_eq!(path_weight(&w, &path).unwrap(), g.value);
        prop_assert!(path.steps.iter().all(|s| s.sign == Sign::Plus || s.sign == Sign::Minus));
    }
}
