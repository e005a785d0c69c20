//! Gaussian quadrature node/weight generation (Legendre and Hermite rules).
//!
//! Nodes are found by Newton iteration on the orthogonal-polynomial
//! recurrences; this is exact to machine precision for the modest orders used
//! here (tables are cached by the callers, not recomputed per evaluation).

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Exact for polynomials up to degree 2n-1.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let (mut pn, mut dpn);
        loop {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                // Bonnet: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            pn = p0;
            dpn = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = pn / dpn;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let _ = pn;
        let w = 2.0 / ((1.0 - z * z) * dpn * dpn);
        out[i] = (-z, w);
        out[n - 1 - i] = (z, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0; // enforce exact symmetry for the central node
    }
    out
}

/// Gauss-Legendre rule mapped onto [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Nodes and weights of the n-point Gauss-Hermite rule (physicists'
/// convention, weight function exp(-x^2) on the whole real line).
///
/// `sum(w_k * g(x_k))` approximates `integral exp(-x^2) g(x) dx`; in
/// particular the weights sum to sqrt(pi).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        // Initial guesses walk inward from the largest root.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0,
            3 => 1.91 * z - 0.91 * out[1].0,
            _ => 2.0 * z - out[i - 2].0,
        };
        let mut h_prev = 0.0;
        for _ in 0..100 {
            // Orthonormal Hermite recurrence, stable against overflow.
            let mut h0 = std::f64::consts::PI.powf(-0.25);
            let mut h1 = 0.0;
            for k in 0..n {
                let h2 = h1;
                h1 = h0;
                h0 = z * (2.0 / (k as f64 + 1.0)).sqrt() * h1
                    - (k as f64 / (k as f64 + 1.0)).sqrt() * h2;
            }
            h_prev = h1;
            let dh = (2.0 * nf).sqrt() * h1; // d/dx of orthonormal H_n
            let dz = h0 / dh;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 1.0 / (nf * h_prev * h_prev);
        out[i] = (z, w);
        out[n - 1 - i] = (-z, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    // Return in ascending node order.
    out.reverse();
    out
}
