//! Running observation normalization (Welford/Chan merge), frozen into
//! checkpoints.

use ndarray::{Array1, Array2, Axis};

#[derive(Debug, Clone)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Array1<f64>,
    pub m2: Array1<f64>,
    /// Normalized values clip to this magnitude.
    pub clip: f64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> RunningNorm {
        RunningNorm {
            count: 0.0,
            mean: Array1::zeros(dim),
            m2: Array1::zeros(dim),
            clip: 10.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merge a batch of rows into the running statistics.
    pub fn update(&mut self, batch: &Array2<f64>) {
        let n = batch.nrows() as f64;
        if n == 0.0 {
            return;
        }
        let batch_mean = batch.mean_axis(Axis(0)).unwrap();
        let mut batch_m2 = Array1::zeros(self.mean.len());
        for row in batch.rows() {
            for (j, v) in row.iter().enumerate() {
                let d = v - batch_mean[j];
                batch_m2[j] += d * d;
            }
        }
        if self.count == 0.0 {
            self.count = n;
            self.mean = batch_mean;
            self.m2 = batch_m2;
            return;
        }
        let total = self.count + n;
        for j in 0..self.mean.len() {
            let delta = batch_mean[j] - self.mean[j];
            self.mean[j] += delta * n / total;
            self.m2[j] += batch_m2[j] + delta * delta * self.count * n / total;
        }
        self.count = total;
    }

    pub fn var(&self) -> Array1<f64> {
        if self.count < 2.0 {
            Array1::ones(self.mean.len())
        } else {
            self.m2.mapv(|v| (v / self.count).max(1e-8))
        }
    }

    /// Normalize rows: `(x - mean) / sqrt(var)`, clipped.
    pub fn apply(&self, batch: &Array2<f64>) -> Array2<f64> {
        if self.count < 2.0 {
            return batch.clone();
        }
        let std = self.var().mapv(f64::sqrt);
        let mut out = batch.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = ((*v - self.mean[j]) / std[j]).clamp(-self.clip, self.clip);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_stats_match_two_pass_computation() {
        let mut rng = crate::rng::stream(21, 0);
        use rand::Rng;
        let all = Array2::from_shape_fn((300, 4), |_| rng.gen_range(-3.0..5.0));
        let mut norm = RunningNorm::new(4);
        for chunk in all.axis_chunks_iter(Axis(0), 64) {
            norm.update(&chunk.to_owned());
        }
        let mean = all.mean_axis(Axis(0)).unwrap();
        for j in 0..4 {
            assert!((norm.mean[j] - mean[j]).abs() < 1e-10);
            let var: f64 =
                all.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / 300.0;
            assert!((norm.var()[j] - var).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_batch_is_standardized() {
        let mut rng = crate::rng::stream(22, 0);
        use rand::Rng;
        let batch = Array2::from_shape_fn((2000, 2), |(_, j)| {
            if j == 0 {
                rng.gen_range(5.0..15.0)
            } else {
                rng.gen_range(-0.01..0.01)
            }
        });
        let mut norm = RunningNorm::new(2);
        norm.update(&batch);
        let z = norm.apply(&batch);
        let m = z.mean_axis(Axis(0)).unwrap();
        assert!(m[0].abs() < 1e-10);
        assert!(m[1].abs() < 1e-10);
    }
}
