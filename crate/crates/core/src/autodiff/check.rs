//! Central-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamId, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Denominator floor in [`relative_error`].
pub const FD_EPSILON: f64 = 1e-12;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (numeric.abs() + FD_EPSILON)
}

fn projection_for(shape: crate::tensor::Shape) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

/// Builds `sum(f(x) * r)` for a fixed pseudo-random `r`, so tensor-valued
/// functions reduce to a scalar with every output coordinate weighted.
fn projected_loss<F>(f: &F, point: &Tensor) -> Result<(Tape, Var, Var)>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.input(point.clone());
    let y = f(&mut tape, x)?;
    let r = tape.input(projection_for(tape.value(y).shape()));
    let prod = tape.mul(&y, &r)?;
    let loss = tape.sum(prod)?;
    Ok((tape, x, loss))
}

fn scalar(tape: &Tape, v: Var) -> Result<f64> {
    let value = tape.value(v).value()?;
    if !value.is_finite() {
        return Err(Error::NonFinite { op: "finite_diff_check" });
    }
    Ok(value)
}

/// Largest relative error between the tape gradient of `f` at `point` and
/// central differences with the given `step`, over every input coordinate.
pub fn finite_diff_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::invalid("finite_diff_check", format!("step {step}")));
    }
    point.ensure_finite("finite_diff_check")?;
    let (tape, x, loss) = projected_loss(&f, point)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.wrt(x).cloned().unwrap_or_else(|| Tensor::zeros(point.shape()));

    let mut worst: f64 = 0.0;
    let mut probe = point.clone();
    for i in 0..point.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let (t, _, l) = projected_loss(&f, &probe)?;
        let plus = scalar(&t, l)?;
        probe.data_mut()[i] = orig - step;
        let (t, _, l) = projected_loss(&f, &probe)?;
        let minus = scalar(&t, l)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// Same check over a parameter list. `loss` must register `params[i]` under
/// `ParamId(i)` and return a scalar.
pub fn finite_diff_check_params<F>(params: &[Tensor], loss: F, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Tensor]) -> Result<Var>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::invalid("finite_diff_check", format!("step {step}")));
    }
    let mut tape = Tape::new();
    let l = loss(&mut tape, params)?;
    scalar(&tape, l)?;
    let grads = tape.backward(l)?;

    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for p in 0..params.len() {
        let analytic = grads
            .param(ParamId(p))
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(params[p].shape()));
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            let eval = |v: f64, probe: &mut Vec<Tensor>| -> Result<f64> {
                probe[p].data_mut()[i] = v;
                let mut t = Tape::new();
                let l = loss(&mut t, probe)?;
                scalar(&t, l)
            };
            let plus = eval(orig + step, &mut probe)?;
            let minus = eval(orig - step, &mut probe)?;
            probe[p].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    Ok(worst)
}
