// Polynomial root finding used as an independent oracle for Nyquist counts.

use num_complex::Complex64;

/// Ascending coefficients of `Π (s − r_k)`.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        p = next;
    }
    p
}

fn horner(p: &[Complex64], s: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// All roots of the polynomial with ascending coefficients `p`
/// (Durand–Kerner iteration followed by Newton polishing).
pub fn roots(p: &[Complex64]) -> Vec<Complex64> {
    let mut p = p.to_vec();
    while p.len() > 1 && p[p.len() - 1].norm() == 0.0 {
        p.pop();
    }
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = p[n];
    let monic: Vec<Complex64> = p.iter().map(|c| c / lead).collect();
    // Cauchy bound for the initial circle
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    for _ in 0..5000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = horner(&monic, z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm() / z[i].norm().max(1.0));
        }
        if delta < 1e-15 {
            break;
        }
    }
    let dp: Vec<Complex64> = (1..=n).map(|k| monic[k] * k as f64).collect();
    for r in z.iter_mut() {
        for _ in 0..5 {
            let d = horner(&dp, *r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= horner(&monic, *r) / d;
        }
    }
    z
}

/// Right-half-plane zeros of `den + num`, i.e. unstable closed-loop roots of
/// `L = num/den` under unity negative feedback.
pub fn closed_loop_rhp_roots(num: &[Complex64], den: &[Complex64]) -> i64 {
    let n = num.len().max(den.len());
    let mut ch = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in num.iter().enumerate() {
        ch[k] += c;
    }
    for (k, c) in den.iter().enumerate() {
        ch[k] += c;
    }
    let r = roots(&ch);
    for z in &r {
        assert!(z.re.abs() > 1e-6 * z.norm().max(1.0), "closed-loop root {z} on the imaginary axis");
    }
    r.iter().filter(|z| z.re > 0.0).count() as i64
}
