//! Small quadrature toolkit: Gauss–Legendre rules and double-exponential
//! (tanh-sinh) integration for integrands with endpoint singularities.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed Gauss–Legendre rule mapped to an interval.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
    }
}

/// Tanh-sinh integral of `f` over `(a, b)`; the endpoints are never sampled,
/// so integrable endpoint singularities are fine. Halves the step until two
/// levels agree to `tol` (relative, with an absolute floor of `tol²`).
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    // abscissae c ± h·tanh(u); the distance 1 - tanh(u) is formed directly
    // so points close to the endpoints keep full relative accuracy
    let eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        if t == 0.0 {
            return w * f(c);
        }
        let e = (-2.0 * u).exp();
        let d = h * 2.0 * e / (1.0 + e);
        let mut s = 0.0;
        for x in [b - d, a + d] {
            if x > a && x < b {
                s += f(x);
            }
        }
        w * s
    };
    let tmax = 4.0;
    let mut step = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * step <= tmax {
        sum += eval(k as f64 * step);
        k += 1;
    }
    let mut prev = h * step * sum;
    for _ in 0..10 {
        step /= 2.0;
        let mut k = 1;
        while (k as f64) * step <= tmax {
            sum += eval(k as f64 * step);
            k += 2;
        }
        let est = h * step * sum;
        if (est - prev).abs() <= tol * est.abs().max(tol) {
            return est;
        }
        prev = est;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        for n in [1, 2, 5, 16] {
            let q = GaussLegendre::new(n);
            for p in 0..(2 * n) {
                let exact = (1.0 - (-1.0f64).powi(p as i32 + 1)) / (p as f64 + 1.0);
                let got = q.integrate(-1.0, 1.0, |x| x.powi(p as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
        let (_, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let got = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((got - 2.0).abs() < 1e-10, "{got}");
        let got = tanh_sinh(|x| (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-12);
        assert!((got - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let got = tanh_sinh(|x| x.ln(), 0.0, 1.0, 1e-12);
        assert!((got + 1.0).abs() < 1e-10);
    }
}
