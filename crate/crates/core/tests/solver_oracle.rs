mod common;

use common::{balance, instance, kkt_violation, random_problem, DualQp};
use puforge::cwsvm::{train, CwsvmParams};
use puforge::data::{Observed, SparseVector};
use puforge::kernel::Kernel;

fn kernels() -> [Kernel; 2] {
    [Kernel::Linear, Kernel::rbf(0.7).unwrap()]
}

#[test]
fn oracles_agree_with_each_other() {
    for seed in 0..16 {
        let prob = random_problem(seed);
        for kernel in kernels() {
            let qp = DualQp::new(kernel, &prob.p, &prob.u, prob.c_pos, prob.c_unl);
            let pg = qp.solve_projected_gradient(50_000);
            if let Some(exact) = qp.solve_enumerate() {
                assert!(pg >= exact - 1e-9, "seed {seed}: pg {pg} below optimum {exact}");
                assert!(pg - exact < 1e-6, "seed {seed}: pg {pg} vs enumeration {exact}");
            }
        }
    }
}

#[test]
fn objective_matches_qp_oracle() {
    for seed in 100..200 {
        let prob = random_problem(seed);
        for kernel in kernels() {
            let params = CwsvmParams::new(prob.c_pos, prob.c_unl, kernel).unwrap();
            let m = train(&prob.p, &prob.u, &params).unwrap();
            assert!(m.converged(), "seed {seed}");
            assert!(kkt_violation(&m, &prob.p, &prob.u) <= 1e-3, "seed {seed}");
            assert!(balance(&m) <= 1e-9);

            let tight = train(&prob.p, &prob.u, &params.with_tolerance(1e-7)).unwrap();
            let optimum = -DualQp::new(kernel, &prob.p, &prob.u, prob.c_pos, prob.c_unl).optimum();
            let got = tight.dual_objective(&prob.p, &prob.u);
            assert!(
                (got - optimum).abs() <= 1e-4,
                "seed {seed} {kernel}: {got} vs {optimum}"
            );
        }
    }
}

#[test]
fn duplicated_points_equal_doubled_penalties() {
    for seed in 300..340 {
        let prob = random_problem(seed);
        let dup = |set: &[puforge::data::Instance]| set.iter().flat_map(|x| [x.clone(), x.clone()]).collect::<Vec<_>>();
        let (p2, u2) = (dup(&prob.p), dup(&prob.u));
        for kernel in kernels() {
            let base = CwsvmParams::new(prob.c_pos, prob.c_unl, kernel)
                .unwrap()
                .with_tolerance(1e-8);
            let doubled = CwsvmParams::new(2.0 * prob.c_pos, 2.0 * prob.c_unl, kernel)
                .unwrap()
                .with_tolerance(1e-8);
            let a = train(&p2, &u2, &base).unwrap();
            let b = train(&prob.p, &prob.u, &doubled).unwrap();
            // Objectives coincide exactly in exact arithmetic.
            let fa = a.dual_objective(&p2, &u2);
            let fb = b.dual_objective(&prob.p, &prob.u);
            assert!((fa - fb).abs() <= 1e-5 * (1.0 + fb.abs()), "seed {seed}: {fa} vs {fb}");
            // The decision function is unique whenever the objective is strictly
            // convex in w; compare on a grid of probe points.
            if kernel != Kernel::Linear {
                for k in -8..=8 {
                    let x = SparseVector::from_dense(&[k as f64 / 4.0, 0.5, -0.25]);
                    let (va, vb) = (a.decision_value(&x), b.decision_value(&x));
                    assert!((va - vb).abs() <= 1e-3, "seed {seed} probe {k}: {va} vs {vb}");
                }
            }
        }
    }
}

#[test]
fn scaling_penalties_preserves_hard_margin_labels() {
    let p: Vec<_> = [[1.0, 1.0], [2.0, 0.5], [1.5, 2.0]]
        .iter()
        .enumerate()
        .map(|(i, v)| instance(i as u64, v, Observed::Positive))
        .collect();
    let u: Vec<_> = [[-1.0, -1.0], [-2.0, 0.0], [0.0, -2.0], [-1.5, -0.5]]
        .iter()
        .enumerate()
        .map(|(i, v)| instance(10 + i as u64, v, Observed::Unlabeled))
        .collect();
    for kernel in kernels() {
        let small = train(&p, &u, &CwsvmParams::new(1e4, 1e4, kernel).unwrap()).unwrap();
        let large = train(&p, &u, &CwsvmParams::new(1e6, 1e6, kernel).unwrap()).unwrap();
        for gx in -6..=6 {
            for gy in -6..=6 {
                let x = SparseVector::from_dense(&[gx as f64 * 0.5, gy as f64 * 0.5]);
                let (a, b) = (small.decision_value(&x), large.decision_value(&x));
                if a.abs() > 1e-6 || b.abs() > 1e-6 {
                    assert_eq!(a >= 0.0, b >= 0.0, "{kernel} at ({gx},{gy}): {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn repeated_indices_match_cloned_instances() {
    use puforge::cwsvm::train_on_gram;
    use puforge::kernel::Gram;
    use std::sync::Arc;
    for seed in 500..530 {
        let prob = random_problem(seed);
        let points: Vec<Arc<SparseVector>> = prob.p.iter().chain(&prob.u).map(|x| Arc::clone(&x.features)).collect();
        let n_p = prob.p.len();
        // Index lists with repeats, and the same multisets as separate instances.
        let pos: Vec<usize> = (0..n_p).flat_map(|i| std::iter::repeat_n(i, 1 + i % 3)).collect();
        let unl: Vec<usize> = (n_p..points.len())
            .flat_map(|i| std::iter::repeat_n(i, 1 + i % 2))
            .collect();
        let clone = |idx: &[usize], observed| -> Vec<_> {
            idx.iter()
                .enumerate()
                .map(|(k, &i)| instance(k as u64, &dense(&points[i]), observed))
                .collect()
        };
        let (p2, u2) = (clone(&pos, Observed::Positive), clone(&unl, Observed::Unlabeled));
        for kernel in kernels() {
            let params = CwsvmParams::new(prob.c_pos, prob.c_unl, kernel)
                .unwrap()
                .with_tolerance(1e-10);
            let gram = Gram::new(kernel, points.clone());
            let merged = train_on_gram(&gram, &pos, &unl, &params).unwrap();
            let cloned = train(&p2, &u2, &params).unwrap();
            // One dual variable per distinct point after merging.
            assert!(merged.support_vectors().len() <= points.len());
            assert!(balance(&merged) <= 1e-9);
            // The RBF decision function is unique at the optimum.
            if kernel != Kernel::Linear {
                for x in &points {
                    let (a, b) = (merged.decision_value(x), cloned.decision_value(x));
                    assert!((a - b).abs() <= 1e-5, "seed {seed}: {a} vs {b}");
                }
            }
        }
    }
}

fn dense(x: &SparseVector) -> Vec<f64> {
    (1..=x.max_index() as u32).map(|k| x.get(k)).collect()
}
