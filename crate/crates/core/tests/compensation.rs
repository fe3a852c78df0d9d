use proptest::prelude::*;
use speckle_core::compensation::{
    aux_conv, branch_filter, dilated_laplacian, gaussian_conv, mix_channels, project_channels, run_pipeline_traced,
    upsample_nearest, Activation, FeatureMap, Matrix, Sigmas, Weights, DILATIONS, STAGES,
};
use speckle_core::smoothing::GaussianKernel;

type LinearOp<'a> = Box<dyn Fn(&FeatureMap) -> FeatureMap + 'a>;

fn wave(c: usize, h: usize, w: usize, k: f64) -> FeatureMap {
    FeatureMap::new(c, h, w, (0..c * h * w).map(|i| (i as f64 * k).sin() + 0.3 * (i as f64 * 0.7 * k).cos()).collect()).unwrap()
}

fn grating(n: usize, cycles_per_px: f64) -> FeatureMap {
    let data = (0..n * n).map(|i| (2.0 * std::f64::consts::PI * cycles_per_px * (i % n) as f64).cos()).collect();
    FeatureMap::new(1, n, n, data).unwrap()
}

fn rel_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    (num / b.norm_sqr().max(f64::MIN_POSITIVE)).sqrt()
}

#[test]
fn zero_input_stays_zero_in_every_stage() {
    // sigmoid(0) = 0.5, so only the ReLU activation fixes zero
    let w = Weights::random(4, 3, 4, 11).unwrap();
    assert_eq!(w.branch.activation, Activation::Relu);
    let (_, stages) = run_pipeline_traced(&FeatureMap::zeros(4, 12, 10), &FeatureMap::zeros(3, 6, 5), &w).unwrap();
    assert_eq!(stages.len(), STAGES.len());
    for (name, map) in &stages {
        assert!(map.data().iter().all(|&v| v == 0.0), "{name}");
    }
}

#[test]
fn relu_gates_are_non_negative() {
    let w = Weights::random(4, 3, 4, 5).unwrap();
    let s = wave(4, 12, 12, 0.31).map(f64::abs);
    let high = wave(3, 6, 6, 0.17);
    let (_, stages) = run_pipeline_traced(&s, &high, &w).unwrap();
    for name in ["01_gated_smoothed", "07_spatial_attention", "10_attention_mass"] {
        let map = &stages.iter().find(|(n, _)| *n == name).unwrap().1;
        assert!(map.data().iter().all(|&v| v >= 0.0), "{name}");
    }
}

#[test]
fn kernels_have_unit_mass() {
    let s = Sigmas::default();
    let mut sigmas = vec![s.fuse, s.channel, s.edge, s.edge_proj, s.spatial, s.mea, s.saliency, s.final_];
    sigmas.extend(s.branch);
    sigmas.extend(s.mfeb);
    sigmas.extend([0.1, 0.7, 2.3, 5.0]);
    for sigma in sigmas {
        let k = GaussianKernel::three_sigma(sigma).unwrap();
        assert!((k.mass() - 1.0).abs() <= 1e-12, "sigma {sigma}");
    }
    for radius in [0, 1, 3, 7] {
        assert!((GaussianKernel::new(1.5, radius).unwrap().mass() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn each_branch_prefers_its_band() {
    let mut w = Weights::random(1, 1, 1, 0).unwrap();
    w.branch.theta = [(); 3].map(|_| Matrix::identity(1));
    // integer cycle counts on a 64-wide grid, Nyquist-normalized band centres
    let inside = [(1, 0.375), (3, 0.1875), (5, 0.0625)];
    for (d, f) in inside {
        let e_in = branch_filter(&grating(64, f), d, &w).unwrap().norm_sqr();
        for (_, other) in inside.iter().filter(|(o, _)| *o != d) {
            let e_out = branch_filter(&grating(64, *other), d, &w).unwrap().norm_sqr();
            assert!(e_in / e_out > 1.0, "dilation {d}: {e_in} vs {e_out} at {other}");
        }
    }
    assert_eq!(DILATIONS, [1, 3, 5]);
}

#[test]
fn pipeline_is_bit_deterministic() {
    let run = || {
        let w = Weights::random(4, 3, 4, 21).unwrap();
        run_pipeline_traced(&wave(4, 16, 16, 0.23), &wave(3, 8, 8, 0.41), &w).unwrap().1
    };
    let (a, b) = (run(), run());
    for ((na, ma), (nb, mb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        let bits = |m: &FeatureMap| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(ma), bits(mb), "{na}");
    }
}

fn map_strategy(c: usize, h: usize, w: usize) -> impl Strategy<Value = FeatureMap> {
    prop::collection::vec(-2.0f64..2.0, c * h * w).prop_map(move |d| FeatureMap::new(c, h, w, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_stages_are_additive(a in map_strategy(3, 9, 8), b in map_strategy(3, 9, 8), seed in 0u64..1000) {
        let w = Weights::random(3, 3, 2, seed).unwrap();
        let sum = a.add(&b).unwrap();
        let ops: Vec<(&str, LinearOp)> = vec![
            ("laplacian", Box::new(|f| dilated_laplacian(f, 3))),
            ("gaussian", Box::new(|f| gaussian_conv(f, 1.3).unwrap())),
            ("mix", Box::new(|f| mix_channels(&w.branch.fusion[1], f).unwrap())),
            ("project", Box::new(|f| project_channels(f, &w.branch.phi_sa).unwrap())),
            ("aux", Box::new(|f| aux_conv(f, &w.branch.aux[0]).unwrap())),
            ("upsample", Box::new(|f| upsample_nearest(f, 18, 16).unwrap())),
        ];
        for (name, op) in ops {
            let lhs = op(&sum);
            let rhs = op(&a).add(&op(&b)).unwrap();
            prop_assert!(rel_diff(&lhs, &rhs) <= 1e-10, "{}", name);
        }
    }
}
