use ndarray::Array2;

use super::{Tape, Var};
use crate::error::Result;

/// Largest relative disagreement between the reverse-mode gradient of a
/// scalar function and central finite differences with step `h`.
///
/// Relative error per coordinate is `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Array2<f64>, h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let analytic = {
        let tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let y = f(&tape, xv)?;
        tape.backward(y)?.get(xv)
    };
    let eval = |point: Array2<f64>| -> Result<f64> {
        let tape = Tape::new();
        let xv = tape.leaf(point);
        Ok(f(&tape, xv)?.item())
    };
    let mut worst: f64 = 0.0;
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let mut plus = x.clone();
        plus[[r, c]] += h;
        let mut minus = x.clone();
        minus[[r, c]] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let a = analytic[[r, c]];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
