//! Finite-difference verification of tape gradients.

use super::{Tape, Tensor, TensorError, Var};

/// Compare tape gradients of a scalar function against central differences.
///
/// `f` receives a fresh tape and one registered `Var` per parameter and must
/// return a scalar. Returns the max over all coordinates of the relative
/// error `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |theta: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = theta.iter().map(|t| tape.constant(t.clone())).collect();
        let root = f(&mut tape, &vars)?;
        Ok(tape.value(root).data()[0])
    };

    // analytic gradients
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.parameter(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    tape.backward(root)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(v, p)| tape.grad(*v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();

    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor> = params.to_vec();
    for (k, param) in params.iter().enumerate() {
        for j in 0..param.len() {
            let orig = param.data()[j];
            work[k].data_mut()[j] = orig + h;
            let up = eval(&work)?;
            work[k].data_mut()[j] = orig - h;
            let down = eval(&work)?;
            work[k].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k].data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::rc::Rc;

    #[test]
    fn linear_function_is_exact() {
        let params = vec![Tensor::vector(vec![1.0, -2.0, 3.0])];
        let err = grad_check(
            |tape, vars| {
                let w = tape.constant(Tensor::vector(vec![0.5, 1.5, -0.5]));
                let prod = tape.hadamard(vars[0], w)?;
                tape.sum(prod)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "rel err {err}");
    }

    #[test]
    fn quadratic_function_small_error() {
        let params = vec![Tensor::vector(vec![0.7, -1.3, 2.1, 0.2])];
        let err = grad_check(
            |tape, vars| {
                let sq = tape.square(vars[0])?;
                tape.sum(sq)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "rel err {err}");
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = Tensor::from_vec(
            &[4, 5],
            (0..20).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let b = Tensor::from_vec(
            &[5, 2],
            (0..10).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let err = grad_check(
            |tape, vars| {
                let c = tape.matmul(vars[0], vars[1])?;
                let sq = tape.square(c)?;
                tape.sum(sq)
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let logits = Tensor::vector((0..16).map(|_| rng.random_range(-2.0..2.0)).collect());
        let labels: Rc<Vec<f64>> =
            Rc::new((0..16).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect());
        let err = grad_check(
            |tape, vars| tape.bce_with_logits(vars[0], Rc::clone(&labels)),
            &[logits],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "rel err {err}");
    }
}
