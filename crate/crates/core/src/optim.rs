//! Small dense BFGS minimizer with Armijo backtracking.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Looser gradient bound accepted when the line search can no longer
    /// make progress (the objective is flat to rounding).
    pub stall_grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            stall_grad_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOutcome<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub grad: [f64; N],
    pub iterations: usize,
    pub converged: bool,
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm<const N: usize>(a: &[f64; N]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn identity<const N: usize>() -> [[f64; N]; N] {
    let mut h = [[0.0; N]; N];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    h
}

/// Minimize `f`, which returns the value and gradient or `None` where the
/// objective is undefined. Every accepted step decreases the objective.
pub fn bfgs<const N: usize, F>(mut f: F, x0: [f64; N], opts: &BfgsOptions) -> Option<BfgsOutcome<N>>
where
    F: FnMut(&[f64; N]) -> Option<(f64, [f64; N])>,
{
    let (mut fx, mut g) = f(&x0)?;
    if !fx.is_finite() {
        return None;
    }
    let mut x = x0;
    let mut h = identity::<N>();
    let mut first = true;
    let mut out = BfgsOutcome {
        x,
        value: fx,
        grad: g,
        iterations: 0,
        converged: false,
    };

    for iter in 0..opts.max_iter {
        out.iterations = iter;
        if inf_norm(&g) < opts.grad_tol {
            out.converged = true;
            break;
        }
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity();
            first = true;
            d = g.map(|v| -v);
            slope = dot(&g, &d);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn = x;
            for i in 0..N {
                xn[i] += t * d[i];
            }
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            out.converged = inf_norm(&g) < opts.stall_grad_tol;
            break;
        };

        let mut s = [0.0; N];
        let mut y = [0.0; N];
        for i in 0..N {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
                first = false;
            }
            // H <- (I - r s y') H (I - r y s') + r s s'
            let r = 1.0 / sy;
            let mut hy = [0.0; N];
            for i in 0..N {
                hy[i] = dot(&h[i], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..N {
                for j in 0..N {
                    h[i][j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + (r * r * yhy + r) * s[i] * s[j];
                }
            }
        }

        let flat = (fx - fn_).abs() <= 1e-15 * (1.0 + fx.abs());
        x = xn;
        fx = fn_;
        g = gn;
        out = BfgsOutcome {
            x,
            value: fx,
            grad: g,
            iterations: iter + 1,
            converged: false,
        };
        if flat && inf_norm(&g) < opts.stall_grad_tol {
            out.converged = true;
            break;
        }
    }
    if inf_norm(&out.grad) < opts.grad_tol {
        out.converged = true;
    }
    Some(out)
}
