/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` log-spaced points from `a` to `b` inclusive (both > 0).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Layout of a grid resolving both heterodyne sidebands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandGrid {
    /// Sideband offset from the IF, normally Ωm.
    pub offset: f64,
    /// FWHM of the sideband Lorentzians.
    pub linewidth: f64,
    pub points_per_linewidth: f64,
    /// Half width of the dense window around each sideband, in linewidths.
    pub half_span_linewidths: f64,
    /// Log-spaced points on each side of each window, reaching out toward ±0.9·offset.
    pub far_points: usize,
}

impl SidebandGrid {
    pub fn new(offset: f64, linewidth: f64) -> Self {
        SidebandGrid {
            offset,
            linewidth,
            points_per_linewidth: 40.0,
            half_span_linewidths: 1000.0,
            far_points: 80,
        }
    }

    pub fn points_per_linewidth(mut self, v: f64) -> Self {
        self.points_per_linewidth = v;
        self
    }

    pub fn half_span_linewidths(mut self, v: f64) -> Self {
        self.half_span_linewidths = v;
        self
    }

    pub fn far_points(mut self, v: usize) -> Self {
        self.far_points = v;
        self
    }

    /// IF offsets, strictly increasing, symmetric about zero.
    pub fn build(&self) -> Vec<f64> {
        let reach = 0.9 * self.offset;
        let half = (self.half_span_linewidths * self.linewidth).min(0.5 * reach);
        let step = self.linewidth / self.points_per_linewidth;
        let k = (half / step).floor() as i64;
        let mut out = Vec::new();
        for c in [-self.offset, self.offset] {
            for i in -k..=k {
                out.push(c + i as f64 * step);
            }
            if self.far_points > 0 && reach > 1.05 * half {
                for d in logspace(1.05 * half.max(step), reach, self.far_points) {
                    out.push(c - d);
                    out.push(c + d);
                }
            }
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * step);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_increasing_and_symmetric() {
        let g = SidebandGrid::new(1e6, 10.0).half_span_linewidths(50.0).build();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let n = g.len();
        for i in 0..n {
            assert!((g[i] + g[n - 1 - i]).abs() < 1e-6);
        }
    }
}
