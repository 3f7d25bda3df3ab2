use ndarray::Array2;

/// Compares an analytic gradient of the scalar function `f` at `x` against
/// central differences with step `h`.
///
/// Returns the largest per-coordinate error `|numeric − analytic| / max(1, |analytic|)`.
pub fn grad_check<F>(mut f: F, x: &Array2<f64>, analytic: &Array2<f64>, h: f64) -> f64
where
    F: FnMut(&Array2<f64>) -> f64,
{
    assert_eq!(x.shape(), analytic.shape(), "gradient shape must match input");
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for idx in 0..x.len() {
        let orig = nth(x, idx);
        set(&mut probe, idx, orig + h);
        let up = f(&probe);
        set(&mut probe, idx, orig - h);
        let down = f(&probe);
        set(&mut probe, idx, orig);
        let numeric = (up - down) / (2.0 * h);
        let a = nth(analytic, idx);
        worst = worst.max((numeric - a).abs() / a.abs().max(1.0));
    }
    worst
}

fn nth(x: &Array2<f64>, idx: usize) -> f64 {
    let cols = x.ncols();
    x[[idx / cols, idx % cols]]
}

fn set(x: &mut Array2<f64>, idx: usize, v: f64) {
    let cols = x.ncols();
    x[[idx / cols, idx % cols]] = v;
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_function_has_zero_error() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(grad_check(|_| 7.0, &x, &Array2::zeros((2, 2)), 1e-5), 0.0);
    }

    #[test]
    fn detects_a_gradient_off_by_two() {
        let x = array![[0.5, -1.5, 2.0]];
        // f = Σ x², true gradient 2x; report x instead.
        let wrong = x.clone();
        let err = grad_check(|x| x.iter().map(|v| v * v).sum(), &x, &wrong, 1e-5);
        assert!((err - 1.0).abs() < 1e-6, "{err}");
    }
}
