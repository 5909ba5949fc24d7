use num_complex::Complex64;

/// Detector outputs for a run of input samples: one `|z|` envelope per
/// detector, one value per sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResponseMatrix {
    pub sample_rate: f64,
    /// Index of the first column within the bank's input stream.
    pub start_sample: u64,
    /// Nominal characteristic frequency of each row.
    pub labels: Vec<f64>,
    pub envelopes: Vec<Vec<f64>>,
    /// Complex trajectories, when requested.
    pub complex: Option<Vec<Vec<Complex64>>>,
}

impl ResponseMatrix {
    /// Number of samples (columns).
    pub fn len(&self) -> usize {
        self.envelopes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn detector_count(&self) -> usize {
        self.envelopes.len()
    }

    /// Time in seconds of column `n`.
    pub fn time(&self, n: usize) -> f64 {
        (self.start_sample + n as u64) as f64 / self.sample_rate
    }

    /// Largest envelope value of detector `i`.
    pub fn peak(&self, i: usize) -> f64 {
        self.envelopes[i].iter().copied().fold(0.0, f64::max)
    }

    /// Column index of the largest envelope value of detector `i`.
    pub fn peak_index(&self, i: usize) -> Option<usize> {
        let env = &self.envelopes[i];
        let mut best: Option<usize> = None;
        for (n, v) in env.iter().enumerate() {
            if best.is_none_or(|b| *v > env[b]) {
                best = Some(n);
            }
        }
        best
    }

    /// Detector with the largest peak. Exact ties go to the lowest
    /// frequency.
    pub fn argmax_detector(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.detector_count() {
            let p = self.peak(i);
            best = match best {
                None => Some((i, p)),
                Some((j, q)) if p > q || (p == q && self.labels[i] < self.labels[j]) => {
                    Some((i, p))
                }
                keep => keep,
            };
        }
        best.map(|(i, _)| i)
    }

    /// Append the columns of `other`, which must have the same rows.
    pub fn extend(&mut self, other: ResponseMatrix) {
        if self.envelopes.is_empty() && self.labels.is_empty() {
            *self = other;
            return;
        }
        for (a, b) in self.envelopes.iter_mut().zip(other.envelopes) {
            a.extend(b);
        }
        if let (Some(a), Some(b)) = (self.complex.as_mut(), other.complex) {
            for (x, y) in a.iter_mut().zip(b) {
                x.extend(y);
            }
        }
    }
}
