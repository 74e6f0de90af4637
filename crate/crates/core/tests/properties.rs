use mcbo::benchmarks::{Objective, ObjectiveFn};
use mcbo::gp::{Dataset, GpPosterior, DEFAULT_DEGENERACY_EPS};
use mcbo::kernel::{Kernel, KernelFamily};
use mcbo::mcmc::{grad_log_p, run_transitions, BoundaryPolicy, ChainBatch, LdParams, MhParams, Routine};
use mcbo::sobol::SobolGenerator;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(i: u8) -> KernelFamily {
    if i.is_multiple_of(2) {
        KernelFamily::Matern52
    } else {
        KernelFamily::SquaredExponential
    }
}

fn posterior(seed: u64, n: usize, d: usize, fam: u8, ls: f64, scale: f64, noise: f64) -> GpPosterior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.iter().map(|v| (5.0 * v).sin()).sum::<f64>() + 0.1 * rng.random::<f64>()).collect();
    let kernel = Kernel::ard(family(fam), d, ls, scale).unwrap();
    GpPosterior::fit(Dataset::new(pts, y, noise).unwrap(), kernel).unwrap()
}

fn point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_within_prior_and_shrinks_with_data(
        seed in any::<u64>(), n in 1usize..40, d in 1usize..5, fam in 0u8..2,
        ls in 0.05f64..1.5, scale in 0.1f64..5.0, noise in 1e-6f64..1e-1,
    ) {
        let post = posterior(seed, n, d, fam, ls, scale, noise);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let queries: Vec<Vec<f64>> = (0..8).map(|_| point(&mut rng, d)).collect();
        let extra = point(&mut rng, d);
        let mut grown = post.dataset().clone();
        grown.push(extra, rng.random::<f64>()).unwrap();
        let bigger = GpPosterior::fit(grown, post.kernel().clone()).unwrap();
        for q in &queries {
            let (_, v) = post.posterior_mean_var(q).unwrap();
            let (_, v2) = bigger.posterior_mean_var(q).unwrap();
            prop_assert!((0.0..=scale + 1e-8).contains(&v));
            prop_assert!(v2 <= v + 1e-8, "{v2} > {v}");
        }
    }

    #[test]
    fn win_probabilities_are_complementary(
        seed in any::<u64>(), n in 1usize..30, d in 1usize..4, fam in 0u8..2, ls in 0.05f64..1.0,
    ) {
        let post = posterior(seed, n, d, fam, ls, 1.0, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let (a, b) = (point(&mut rng, d), point(&mut rng, d));
        let ab = post.pair_diff_stats(&a, &b).unwrap();
        let ba = post.pair_diff_stats(&b, &a).unwrap();
        prop_assert!((ab.mean_diff + ba.mean_diff).abs() <= 1e-12);
        prop_assert!((ab.var_diff - ba.var_diff).abs() <= 1e-12);
        if ab.var_diff >= DEFAULT_DEGENERACY_EPS {
            let sum = ab.win_prob(DEFAULT_DEGENERACY_EPS) + ba.win_prob(DEFAULT_DEGENERACY_EPS);
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn extended_posterior_agrees_with_full_fit(seed in any::<u64>(), n in 2usize..40, extra in 1usize..15, d in 1usize..4) {
        let full = posterior(seed, n + extra, d, 0, 0.4, 1.0, 1e-3);
        let ds = full.dataset();
        let head = Dataset::new(ds.points()[..n].to_vec(), ds.observations()[..n].to_vec(), 1e-3).unwrap();
        let ext = GpPosterior::fit(head, full.kernel().clone()).unwrap().extend(ds.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let q = point(&mut rng, d);
            let (m, v) = full.posterior_mean_var(&q).unwrap();
            let (me, ve) = ext.posterior_mean_var(&q).unwrap();
            prop_assert!((m - me).abs() <= 1e-7 * (1.0 + m.abs()));
            prop_assert!((v - ve).abs() <= 1e-8);
        }
    }

    #[test]
    fn transitions_stay_in_unit_cube(
        seed in any::<u64>(), d in 1usize..4, ld in any::<bool>(), clip in any::<bool>(), sigma in 0.01f64..0.8,
    ) {
        let post = posterior(seed, 15, d, 0, 0.3, 1.0, 1e-3);
        let boundary_policy = if clip { BoundaryPolicy::Clip } else { BoundaryPolicy::Reflect };
        let routine = if ld {
            Routine::Ld(LdParams { step_eps: sigma * sigma, fd_step: 1e-4, n_transitions: 10, boundary_policy })
        } else {
            Routine::Mh(MhParams { proposal_sigma: sigma, n_transitions: 10, boundary_policy })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start: Vec<Vec<f64>> = (0..4).map(|_| point(&mut rng, d)).collect();
        let mut rngs: Vec<ChaCha8Rng> = (0..4).map(|k| ChaCha8Rng::seed_from_u64(seed.wrapping_add(k))).collect();
        let out = run_transitions(&post, ChainBatch::new(start), &routine, &mut rngs).unwrap();
        for p in &out.points {
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{p:?}");
        }
    }

    #[test]
    fn sobol_windows_are_reproducible(d in 1usize..40, seed in any::<u64>(), skip in 0u64..5000, scrambled in any::<bool>()) {
        let make = || SobolGenerator::new(d, scrambled.then_some(seed)).unwrap();
        let mut a = make();
        a.skip(skip);
        let pa = a.next_points(16);
        let b = make();
        let pb: Vec<Vec<f64>> = (0..16).map(|i| b.point(a.next_index() - 16 + i)).collect();
        prop_assert_eq!(&pa, &pb);
        prop_assert!(pa.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn objectives_are_finite_on_their_box(kind in 0usize..4, d in 1usize..20, seed in any::<u64>()) {
        let kinds = [Objective::Ackley, Objective::Rastrigin, Objective::Branin, Objective::Levy1d];
        let dim = match kinds[kind] {
            Objective::Branin => 2,
            Objective::Levy1d => 1,
            _ => d,
        };
        let f = ObjectiveFn::new(kinds[kind], dim).unwrap();
        let b = f.bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x = b.from_unit(&point(&mut rng, dim));
            prop_assert!(f.eval(&x).unwrap().is_finite());
        }
    }
}

#[test]
fn mh_under_the_prior_never_rejects() {
    let kernel = Kernel::ard(KernelFamily::Matern52, 3, 0.3, 1.0).unwrap();
    let prior = GpPosterior::prior(kernel, 3).unwrap();
    let routine = Routine::Mh(MhParams { proposal_sigma: 0.2, n_transitions: 200, boundary_policy: BoundaryPolicy::Reflect });
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start: Vec<Vec<f64>> = (0..5).map(|_| point(&mut rng, 3)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..5).map(ChaCha8Rng::seed_from_u64).collect();
    let out = run_transitions(&prior, ChainBatch::new(start), &routine, &mut rngs).unwrap();
    assert_eq!(out.acceptance_rate(), Some(1.0));
}

#[test]
fn langevin_gradient_vanishes_under_the_prior() {
    let kernel = Kernel::ard(KernelFamily::SquaredExponential, 2, 0.5, 1.0).unwrap();
    let prior = GpPosterior::prior(kernel, 2).unwrap();
    for x in [[0.2, 0.7], [0.5, 0.5], [0.99995, 0.1]] {
        assert!(grad_log_p(&prior, &x, 1e-4).unwrap().iter().all(|g| g.abs() < 1e-9));
    }
}
