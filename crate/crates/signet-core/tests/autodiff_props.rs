//! Property tests for the tensor engine: finite differences agree with the
//! tape on randomized inputs, and the stable paths never produce NaN/Inf.

use std::rc::Rc;

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use signet_core::{grad_check, Tape, Tensor};

fn vec_in(range: std::ops::Range<f64>, n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(range, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    // composite kernel: sum(sigmoid(A·B) ⊙ v) + mean(tanh(A)²)
    #[test]
    fn composite_kernel_gradients_match_finite_differences(
        a in vec_in(-2.0..2.0, 12),
        b in vec_in(-2.0..2.0, 8),
        v in vec_in(-2.0..2.0, 2),
    ) {
        let params = vec![
            Tensor::from_vec(&[3, 4], a).unwrap(),
            Tensor::from_vec(&[4, 2], b).unwrap(),
            Tensor::vector(v),
        ];
        let err = grad_check(
            |tape, vars| {
                let prod = tape.matmul(vars[0], vars[1])?;
                let sig = tape.sigmoid(prod)?;
                let scaled = tape.hadamard(sig, vars[2])?;
                let left = tape.sum(scaled)?;
                let th = tape.tanh(vars[0])?;
                let sq = tape.square(th)?;
                let right = tape.mean(sq)?;
                tape.add(left, right)
            },
            &params,
            1e-5,
        ).unwrap();
        prop_assert!(err < 1e-4, "rel err {err}");
    }

    #[test]
    fn gather_scatter_concat_gradients_match(
        table in vec_in(-2.0..2.0, 10),
        w in vec_in(-2.0..2.0, 8),
    ) {
        let params = vec![
            Tensor::from_vec(&[5, 2], table).unwrap(),
            Tensor::from_vec(&[4, 2], w).unwrap(),
        ];
        let err = grad_check(
            |tape, vars| {
                let idx = Rc::new(vec![4usize, 0, 2, 2]);
                let picked = tape.gather_rows(vars[0], idx)?;
                let cat = tape.concat_cols(picked, vars[1])?;
                let spread = tape.scatter_add_rows(cat, Rc::new(vec![1usize, 0, 1, 2]), 3)?;
                let rs = tape.row_sum(spread)?;
                let sq = tape.square(rs)?;
                tape.sum(sq)
            },
            &params,
            1e-5,
        ).unwrap();
        prop_assert!(err < 1e-4, "rel err {err}");
    }

    #[test]
    fn bce_with_logits_gradients_match(logits in vec_in(-3.0..3.0, 16)) {
        let labels: Rc<Vec<f64>> = Rc::new(
            logits.iter().enumerate().map(|(i, _)| (i % 2) as f64).collect(),
        );
        let params = vec![Tensor::vector(logits)];
        let err = grad_check(
            |tape, vars| tape.bce_with_logits(vars[0], Rc::clone(&labels)),
            &params,
            1e-5,
        ).unwrap();
        prop_assert!(err < 1e-4, "rel err {err}");
    }

    // stable paths: no NaN/Inf anywhere in [-1e3, 1e3]
    #[test]
    fn kernels_stay_finite_on_wide_inputs(x in vec_in(-1e3..1e3, 24)) {
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::from_vec(&[6, 4], x).unwrap());
        let s = tape.sigmoid(v).unwrap();
        let r = tape.relu(v).unwrap();
        let t = tape.tanh(v).unwrap();
        let logits = tape.row_sum(v).unwrap();
        let labels = Rc::new(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let loss = tape.bce_with_logits(logits, labels).unwrap();
        for var in [s, r, t, loss] {
            prop_assert!(tape.value(var).is_finite());
        }
    }
}

#[test]
fn randomized_fd_sweep_mirrors_spec_tolerance() {
    // 50 trials over inputs in [-2, 2]: rel err < 1e-4 at h = 1e-5
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..50 {
        let m = rng.random_range(2..5);
        let k = rng.random_range(2..5);
        let a = Tensor::from_vec(
            &[m, k],
            (0..m * k).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let b = Tensor::from_vec(
            &[k, 3],
            (0..k * 3).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let err = grad_check(
            |tape, vars| {
                let prod = tape.matmul(vars[0], vars[1])?;
                let act = tape.tanh(prod)?;
                let sq = tape.square(act)?;
                tape.mean(sq)
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "trial {trial}: rel err {err}");
    }
}

#[test]
fn sigmoid_extremes_match_reference() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(vec![40.0, -40.0]));
    let s = tape.sigmoid(x).unwrap();
    let v = tape.value(s).data();
    assert!((v[0] - 1.0).abs() < 1e-15);
    assert!(v[1].abs() < 1e-15);
}
