//! Small statistical helpers shared by the Monte Carlo paths.

/// Neumaier-compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }

    /// |mean − target| ≤ z·SE.
    pub fn covers(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_error
    }
}

/// Plain sample mean and standard error `s/√n`.
pub fn mean_and_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value()
        / (n - 1) as f64;
    Estimate { mean, std_error: (var / n as f64).sqrt(), samples: n }
}

/// Batch-means estimate: split the samples into `batches` contiguous groups
/// and use the spread of the group means as the error estimate.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    assert!(batches >= 2 && n >= batches, "batch_means needs n >= batches >= 2");
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &xs[b * size..(b + 1) * size];
            chunk.iter().copied().collect::<CompensatedSum>().value() / size as f64
        })
        .collect();
    let mut est = mean_and_se(&means);
    est.samples = size * batches;
    est
}

/// Median of the group means, robust against heavy tails.
pub fn median_of_means(xs: &[f64], groups: usize) -> f64 {
    assert!(groups >= 1 && xs.len() >= groups);
    let size = xs.len() / groups;
    let mut means: Vec<f64> = (0..groups)
        .map(|g| xs[g * size..(g + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    median(&mut means)
}

pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Outcome of a two-sample Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
}

impl KsOutcome {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Two-sample KS statistic with the asymptotic critical value
/// `c(α)·√((n+m)/(n·m))`, `c(α) = √(−ln(α/2)/2)`. Ties (discrete laws) make
/// the test conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    KsOutcome { statistic: d, critical: c * ((n + m) / (n * m)).sqrt() }
}
