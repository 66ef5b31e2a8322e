use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqdecode::channel::{random_density, random_unitary};
use seqdecode::linalg::{
    expand, max_abs, product_inner, shannon_entropy, spectral_decompose, von_neumann_entropy,
    CMatrix, CVector, HermitianMatrix, ProductVector, C64,
};
use seqdecode::typicality::{build_rho_tilde, build_typical_model, TypicalityParams};
use seqdecode::{holevo_chi, Budget, CqChannel};

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    HermitianMatrix::new((&g + g.adjoint()).scale(0.5)).unwrap()
}

fn random_product(rng: &mut ChaCha8Rng, d: usize, n: usize) -> ProductVector {
    let factors = (0..n)
        .map(|_| {
            let v = CVector::from_fn(d, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let norm = v.norm();
            v / C64::new(norm, 0.0)
        })
        .collect();
    ProductVector::new(factors).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_reconstructs(seed in any::<u64>(), dim in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(&mut rng, dim);
        let sd = spectral_decompose(&a);
        prop_assert!(max_abs(&(sd.reconstruct() - a.matrix())) <= 1e-10);
        prop_assert!(sd.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let gram = sd.eigenvectors.adjoint() * &sd.eigenvectors;
        prop_assert!(max_abs(&(gram - CMatrix::identity(dim, dim))) <= 1e-10);
    }

    #[test]
    fn entropy_is_unitarily_invariant(seed in any::<u64>(), dim in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, dim).unwrap();
        let u = random_unitary(&mut rng, dim);
        let s = von_neumann_entropy(&rho).unwrap();
        let t = von_neumann_entropy(&rho.conjugate_by(&u)).unwrap();
        prop_assert!((s - t).abs() <= 1e-9);
        prop_assert!(s >= -1e-12 && s <= (dim as f64).log2() + 1e-12);
    }

    #[test]
    fn entropy_is_additive(seed in any::<u64>(), d1 in 1usize..=8, d2 in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_density(&mut rng, d1).unwrap();
        let b = random_density(&mut rng, d2).unwrap();
        let joint = von_neumann_entropy(&a.kron(&b)).unwrap();
        let sum = von_neumann_entropy(&a).unwrap() + von_neumann_entropy(&b).unwrap();
        prop_assert!((joint - sum).abs() <= 1e-9);
    }

    #[test]
    fn product_vector_has_unit_self_overlap(seed in any::<u64>(), d in 2usize..=3, n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_product(&mut rng, d, n);
        let dense = expand(&x, &Budget::default()).unwrap();
        let z = product_inner(&x, &dense).unwrap();
        prop_assert!((z - C64::new(1.0, 0.0)).norm() <= 1e-12);
        let y = random_product(&mut rng, d, n);
        let naive = dense.dotc(&expand(&y, &Budget::default()).unwrap());
        let fast = product_inner(&x, &expand(&y, &Budget::default()).unwrap()).unwrap();
        prop_assert!((naive - fast).norm() <= 1e-12);
    }

    #[test]
    fn holevo_is_bounded_and_unitarily_invariant(seed in any::<u64>(), alphabet in 1usize..=4, d in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = CqChannel::random(&mut rng, alphabet, d).unwrap();
        let chi = holevo_chi(&ch);
        prop_assert!(chi >= -1e-12);
        prop_assert!(chi <= (d as f64).log2() + 1e-12);
        prop_assert!(chi <= shannon_entropy(ch.priors()).unwrap() + 1e-9);
        let u = random_unitary(&mut rng, d);
        let rotated = CqChannel::new(
            ch.priors().to_vec(),
            ch.outputs().iter().map(|r| r.conjugate_by(&u)).collect(),
        ).unwrap();
        prop_assert!((holevo_chi(&rotated) - chi).abs() <= 1e-9);
    }

    #[test]
    fn typical_objects_ignore_degenerate_basis_choice(seed in any::<u64>(), n in 2usize..=5) {
        // rho = diag(1/2, 1/4, 1/4) has a degenerate pair; rotating the
        // letters inside it changes the eigenvectors the solver returns.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = Budget::default();
        let priors = vec![0.5, 0.25, 0.25];
        let basis: Vec<HermitianMatrix> = (0..3)
            .map(|j| {
                let mut diag = [0.0; 3];
                diag[j] = 1.0;
                HermitianMatrix::from_diagonal(&diag).unwrap()
            })
            .collect();
        let mut u = CMatrix::identity(3, 3);
        let block = random_unitary(&mut rng, 2);
        u.view_mut((1, 1), (2, 2)).copy_from(&block);
        let plain = CqChannel::new(priors.clone(), basis.clone()).unwrap();
        let mixed_outputs: Vec<HermitianMatrix> = basis
            .iter()
            .map(|b| {
                let noisy = b.matrix().scale(0.8) + CMatrix::identity(3, 3).scale(0.2 / 3.0);
                HermitianMatrix::new(noisy).unwrap().conjugate_by(&u)
            })
            .collect();
        let rotated = CqChannel::new(priors, mixed_outputs).unwrap();
        let reference = CqChannel::new(
            plain.priors().to_vec(),
            basis.iter().map(|b| HermitianMatrix::new(b.matrix().scale(0.8) + CMatrix::identity(3, 3).scale(0.2 / 3.0)).unwrap()).collect(),
        ).unwrap();
        let params = TypicalityParams::new(n, 0.2);
        let a = build_typical_model(&rotated, &params, &budget).unwrap();
        let b = build_typical_model(&reference, &params, &budget).unwrap();
        prop_assert_eq!(a.dim_h, b.dim_h);
        prop_assert!((a.trace_bar - b.trace_bar).abs() <= 1e-12);
        let ta = build_rho_tilde(&rotated, &params, &a, &budget).unwrap();
        let tb = build_rho_tilde(&reference, &params, &b, &budget).unwrap();
        for j in 1..=3 {
            prop_assert!((ta.trace_power(j) - tb.trace_power(j)).abs() <= 1e-10);
        }
    }
}
