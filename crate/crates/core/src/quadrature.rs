//! Gauss–Legendre rules and geometrically graded panel layouts.

use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1] by Newton iteration on P_n.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Iterator over (node, weight) mapped onto [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared rule of the given order; orders 8, 16 and 32 are cached.
pub fn gauss_legendre(order: usize) -> &'static GaussLegendre {
    static R8: OnceLock<GaussLegendre> = OnceLock::new();
    static R16: OnceLock<GaussLegendre> = OnceLock::new();
    static R32: OnceLock<GaussLegendre> = OnceLock::new();
    match order {
        8 => R8.get_or_init(|| GaussLegendre::new(8)),
        16 => R16.get_or_init(|| GaussLegendre::new(16)),
        32 => R32.get_or_init(|| GaussLegendre::new(32)),
        _ => Box::leak(Box::new(GaussLegendre::new(order))),
    }
}

/// Breakpoints of panels covering `[0, extent]` with the first panel
/// `[0, first]` and each later panel `ratio` times longer than the previous.
pub fn graded_offsets(first: f64, extent: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    if extent <= 0.0 {
        return out;
    }
    let mut edge = first.min(extent);
    let mut width = first;
    out.push(edge);
    while edge < extent {
        width *= ratio;
        // absorb a short tail into the last panel
        edge = if edge + width * 1.5 >= extent { extent } else { edge + width };
        out.push(edge);
    }
    out
}

/// Geometric panels `[a r^k, a r^{k+1}]` covering `[lo, hi]` anchored at `anchor`.
pub fn geometric_panels(lo: f64, hi: f64, anchor: f64, ratio: f64) -> Vec<(f64, f64)> {
    assert!(lo >= 0.0 && hi > lo && anchor > 0.0 && ratio > 1.0);
    let mut edges = Vec::new();
    // walk down from the anchor
    let mut e = anchor;
    while e > lo && e > 0.0 {
        edges.push(e);
        e /= ratio;
        if e < lo.max(anchor * 1e-12) {
            break;
        }
    }
    edges.push(lo);
    edges.reverse();
    let mut e = anchor * ratio;
    while e < hi {
        edges.push(e);
        e *= ratio;
    }
    edges.push(hi);
    edges.retain(|&x| x >= lo && x <= hi);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    edges.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let r = GaussLegendre::new(16);
        let v = r.integrate(0.0, 2.0, |x| x.powi(31));
        assert!((v - 2f64.powi(32) / 32.0).abs() / v < 1e-13);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn geometric_panels_cover_interval() {
        let p = geometric_panels(1e-6, 10.0, 1e-2, 4.0);
        assert_eq!(p.first().unwrap().0, 1e-6);
        assert_eq!(p.last().unwrap().1, 10.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        let p = geometric_panels(0.0, 1.0, 0.25, 4.0);
        assert_eq!(p[0].0, 0.0);
    }

    #[test]
    fn graded_offsets_reach_extent() {
        let o = graded_offsets(0.01, 3.0, 2.0);
        assert_eq!(*o.last().unwrap(), 3.0);
        assert!(o.windows(2).all(|w| w[1] > w[0]));
    }
}
