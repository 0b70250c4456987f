use dyadlab_core::grid::make_grid;
use dyadlab_core::lorentz::{lp_norm, weak_norm, MeasureSpec};
use dyadlab_core::weights::{
    ainf_probe, bilinear_maximal, factorization_check, multilinear_ap_constant, reverse_holder_search, Weight,
};
use dyadlab_core::MeshFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn factorization_agrees_on_random_power_pairs() {
    let g = make_grid(1, 4, 12, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut finite = 0;
    for _ in 0..20 {
        let a1: f64 = rng.gen_range(-1.0..1.0);
        let a2: f64 = rng.gen_range(-1.0..1.0);
        let ws = [Weight::power(&g, a1), Weight::power(&g, a2)];
        let rep = factorization_check(&ws, &[2.0, 2.0]).unwrap();
        assert!(rep.agreement, "alpha=({a1}, {a2}): {rep:?}");
        finite += rep.multilinear.is_finite() as usize;
    }
    // both classes must be represented for the agreement to mean anything
    assert!(finite > 0 && finite < 20, "finite count {finite}");
}

#[test]
fn inverse_power_pair_is_in_a11_but_not_ainf_inf() {
    let g = make_grid(1, 4, 8, None).unwrap();
    let ws = [Weight::power(&g, -1.0), Weight::one(&g)];
    let at_one = factorization_check(&ws, &[1.0, 1.0]).unwrap();
    assert!(at_one.multilinear.is_finite(), "{at_one:?}");
    assert!(at_one.agreement);
    let at_inf = factorization_check(&ws, &[f64::INFINITY, f64::INFINITY]).unwrap();
    assert!(!at_inf.multilinear.is_finite(), "{at_inf:?}");
    assert!(at_inf.agreement);
}

#[test]
fn maximal_operator_boundedness_direction() {
    let ratio = |g: &dyadlab_core::GridSpec, ws: &[Weight; 2], seed: u64| -> f64 {
        let w = Weight::product(ws).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        for k in 0..50 {
            // indicators near the origin and random positive data
            let f: Vec<MeshFunction> = (0..2)
                .map(|i| {
                    if k % 2 == 0 {
                        let r = 2f64.powi(rng.gen_range(-3..2));
                        MeshFunction::box_indicator(g, [-r, 0.0], [r, 0.0]).map(|v| v / ws[i].values()[0].max(1.0))
                    } else {
                        MeshFunction::from_values(g, (0..g.num_cells()).map(|_| rng.gen_range(0.0..1.0)).collect())
                            .unwrap()
                    }
                })
                .collect();
            let m = bilinear_maximal(&f[0], &f[1]).unwrap();
            let num = lp_norm(&m.mul(w.mesh()).unwrap(), 2.0, &MeasureSpec::Lebesgue).unwrap();
            let den: f64 = (0..2)
                .map(|i| lp_norm(&f[i].mul(ws[i].mesh()).unwrap(), 4.0, &MeasureSpec::Lebesgue).unwrap())
                .product();
            best = best.max(num / den);
        }
        best
    };
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for m in [3, 5] {
        let g = make_grid(1, 3, m, None).unwrap();
        let ok = [Weight::power(&g, -0.2), Weight::power(&g, 0.1)];
        assert!(multilinear_ap_constant(&ok, &[4.0, 4.0]).unwrap().is_finite());
        good.push(ratio(&g, &ok, 7));
        // w_1^{-4/3} fails to be locally integrable on the mesh scale
        let div = [Weight::power(&g, 1.2), Weight::one(&g)];
        assert!(!multilinear_ap_constant(&div, &[4.0, 4.0]).unwrap().is_finite());
        bad.push(ratio(&g, &div, 7));
    }
    // observed 1.05 on both windows
    assert!(good.iter().all(|&r| r < 1.5), "{good:?}");
    assert!(bad[1] > bad[0], "{bad:?}");
}

#[test]
fn maximal_weak_type_sanity() {
    let g = make_grid(1, 3, 3, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let f: Vec<MeshFunction> = (0..2)
            .map(|_| {
                let c: f64 = rng.gen_range(-6.0..6.0);
                let r: f64 = rng.gen_range(0.1..2.0);
                MeshFunction::box_indicator(&g, [c - r, 0.0], [c + r, 0.0]).map(|v| v * 3.0)
            })
            .collect();
        let m = bilinear_maximal(&f[0], &f[1]).unwrap();
        let lhs = weak_norm(&m, 0.5);
        let rhs = f[0].abs().integral() * f[1].abs().integral();
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    // frozen from a sweep over this seed family (observed maximum 1.76)
    assert!(worst <= 2.0, "{worst}");
}

#[test]
fn ainf_and_reverse_holder_probes() {
    let g = make_grid(1, 4, 8, None).unwrap();
    let one = Weight::one(&g);
    let probe = ainf_probe(&one).unwrap();
    assert_eq!(probe.min_p, Some(1.0));
    assert!(probe.heuristic);
    let w = Weight::power(&g, 1.5);
    let probe = ainf_probe(&w).unwrap();
    // |x|^{1.5} sits in A_p exactly for p > 2.5
    assert_eq!(probe.min_p, Some(3.0));
    let rh = reverse_holder_search(&one).unwrap();
    assert_eq!(rh.best_r, Some(4.0));
    let singular = reverse_holder_search(&Weight::power(&g, -0.8)).unwrap();
    // the true constant diverges for r >= 1.25, at rate 2^{0.8 - 1/r} per doubling;
    // the growth surrogate only sees rates above 1.25, i.e. r > 2.08
    assert_eq!(singular.best_r, Some(2.0));
}
