use proptest::prelude::*;

use lpns::besov::{self, BesovSpec, CriterionTriple, TripleMode};
use lpns::lp::{Dyadic, DyadicCutoffs};
use lpns::paraproduct;
use lpns::random;
use lpns::snapshot;
use lpns::solver::leray_project;
use lpns::{Field, Grid};

fn gap(a: &Field, b: &Field) -> f64 {
    (&a.to_spectral() - &b.to_spectral()).to_physical().max_abs()
}

fn grid(dim: usize) -> Grid {
    Grid::new(dim, if dim == 2 { 32 } else { 16 }).unwrap()
}

fn sample(dim: usize, seed: u64, components: usize) -> Field {
    let g = grid(dim);
    random::band_limited(g, &mut random::rng(seed), g.n() as f64 / 3.0, components).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_of_unity(r in 0.0f64..400.0) {
        let c = DyadicCutoffs::default();
        prop_assert!((c.partition_sum(r, 12) - 1.0).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&c.chi(r)));
        prop_assert!(c.phi(r) >= 0.0);
    }

    #[test]
    fn blocks_reconstruct_the_field(dim in 2usize..=3, seed in any::<u64>()) {
        let f = sample(dim, seed, 1);
        let dy = Dyadic::with_default_cutoffs(f.grid());
        prop_assert!(gap(&dy.reconstruct(&f).unwrap(), &f) < 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn low_pass_telescopes_exactly(seed in any::<u64>(), j in 0i32..3) {
        let f = sample(2, seed, 1);
        let dy = Dyadic::with_default_cutoffs(f.grid());
        let step = &dy.low(&f, j + 1).unwrap() - &dy.low(&f, j).unwrap();
        let d = dy.delta(&f, j).unwrap();
        let a = step.spectral_components();
        let b = d.spectral_components();
        // the block multiplier is stored as the difference of low-pass tables
        for (x, y) in a[0].iter().zip(&b[0]) {
            prop_assert!((x - y).norm() <= 1e-15 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn blocks_are_linear(seed in any::<u64>(), a in -3.0f64..3.0, j in -1i32..=3) {
        let f = sample(2, seed, 2);
        let g = sample(2, seed.wrapping_add(1), 2);
        let dy = Dyadic::with_default_cutoffs(f.grid());
        let combo = &f.scale(a) + &g;
        let lhs = dy.delta(&combo, j).unwrap();
        let rhs = &dy.delta(&f, j).unwrap().scale(a) + &dy.delta(&g, j).unwrap();
        prop_assert!(gap(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn blocks_of_real_fields_stay_real(dim in 2usize..=3, seed in any::<u64>()) {
        let f = sample(dim, seed, 1);
        let dy = Dyadic::with_default_cutoffs(f.grid());
        for b in dy.blocks(&f).unwrap() {
            prop_assert!(b.is_hermitian(1e-14));
        }
    }

    #[test]
    fn bony_decomposition_matches_padded_product(seed in any::<u64>()) {
        let u = sample(2, seed, 1);
        let v = sample(2, seed ^ 0x5555, 1);
        let dy = Dyadic::with_default_cutoffs(u.grid());
        let parts = paraproduct::bony(&dy, &u, &v).unwrap();
        let uv = dy.product(&u, &v).unwrap();
        prop_assert!(gap(&parts.sum(), &uv) < 1e-12 * uv.max_abs().max(1.0));
    }

    #[test]
    fn leray_projection_is_idempotent(dim in 2usize..=3, seed in any::<u64>()) {
        let u = sample(dim, seed, dim);
        let p = leray_project(&u);
        prop_assert!(besov::divergence_defect(&p) < 1e-13);
        prop_assert!(gap(&leray_project(&p), &p) < 1e-13);
        prop_assert!(p.l2_norm() <= u.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn besov_norm_is_homogeneous(seed in any::<u64>(), lambda in -4.0f64..4.0, s in -1.0f64..2.0) {
        let f = sample(2, seed, 1);
        let dy = Dyadic::with_default_cutoffs(f.grid());
        let spec = BesovSpec::new(s, 4.0, 2.0).unwrap();
        let a = besov::besov_norm(&dy, &f.scale(lambda), spec).unwrap();
        let b = besov::besov_norm(&dy, &f, spec).unwrap();
        prop_assert!((a - lambda.abs() * b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(dim in 2usize..=3, seed in any::<u64>(), physical in any::<bool>(), t in 0.0f64..10.0) {
        let f = sample(dim, seed, dim);
        let f = if physical { f.to_physical() } else { f };
        let bytes = snapshot::encode(&f, t, 0.01);
        let (g, header) = snapshot::decode(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(header.time.to_bits(), t.to_bits());
        prop_assert_eq!(g.representation(), f.representation());
        prop_assert_eq!(snapshot::encode(&g, t, 0.01), bytes);
    }

    #[test]
    fn triples_from_r_and_p_satisfy_the_relation(r in 0.05f64..0.95, p in 3.5f64..40.0) {
        let t = CriterionTriple::from_r_p(r, p, TripleMode::Strict).unwrap();
        prop_assert!((2.0 / t.q + 3.0 / t.p - 1.0 - t.r).abs() < 1e-12);
        prop_assert!(CriterionTriple::new(r, p, t.q * 1.01, TripleMode::Strict).is_err());
    }
}

#[test]
fn truncated_snapshots_are_rejected() {
    let f = sample(2, 3, 2);
    let bytes = snapshot::encode(&f, 0.0, 0.0);
    for cut in [0, 7, 12, bytes.len() - 1] {
        assert!(snapshot::decode(&bytes[..cut], std::path::Path::new("mem")).is_err());
    }
}

#[test]
fn blocks_above_the_grid_are_range_errors() {
    let f = sample(2, 1, 1);
    let dy = Dyadic::with_default_cutoffs(f.grid());
    assert!(dy.delta(&f, dy.j_max() + 1).is_err());
    assert_eq!(dy.delta(&f, -2).unwrap().max_abs(), 0.0);
    assert_eq!(dy.low(&f, -1).unwrap().max_abs(), 0.0);
}
