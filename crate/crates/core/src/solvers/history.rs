use std::io::Write;

use crate::error::Result;
use crate::operator::norm;

/// Per-iteration record of an iterative solve.
///
/// Index `k` of every array describes iterate `k + 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveHistory {
    /// `‖A f⁽ᵏ⁾ − b‖ / ‖b‖`.
    pub residual_norms: Vec<f64>,
    /// `‖f⁽ᵏ⁾ − f_true‖ / ‖f_true‖`, when a reference image was supplied.
    pub error_norms: Option<Vec<f64>>,
    /// Objective values, for solvers that minimize one explicitly.
    pub objective: Option<Vec<f64>>,
    pub iterates: Option<Vec<Vec<f64>>>,
    /// Last iterate.
    pub solution: Vec<f64>,
    /// Index of the smallest entry of `error_norms`.
    pub best_index: Option<usize>,
}

impl SolveHistory {
    pub fn iterations(&self) -> usize {
        self.residual_norms.len()
    }

    /// The iterate with the smallest reference error, if iterates were kept.
    pub fn best_iterate(&self) -> Option<&[f64]> {
        let k = self.best_index?;
        self.iterates.as_ref().map(|it| it[k].as_slice())
    }

    /// Headered CSV `iter,res_rel,err_rel` (1-based `iter`, empty `err_rel`
    /// without a reference), followed by `#` summary lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,res_rel,err_rel")?;
        for (k, r) in self.residual_norms.iter().enumerate() {
            match self.error_norms.as_ref().map(|e| e[k]) {
                Some(e) => writeln!(w, "{},{r:.16e},{e:.16e}", k + 1)?,
                None => writeln!(w, "{},{r:.16e},", k + 1)?,
            }
        }
        if let Some(r) = self.residual_norms.last() {
            writeln!(w, "# final_res_rel={r:.16e}")?;
        }
        if let Some(e) = self.error_norms.as_ref().and_then(|e| e.last()) {
            writeln!(w, "# final_err_rel={e:.16e}")?;
        }
        if let Some(b) = self.best_index {
            writeln!(w, "# best_iter={}", b + 1)?;
        }
        Ok(())
    }
}

/// Accumulates a [`SolveHistory`] one iterate at a time.
pub struct HistoryRecorder<'a> {
    b_norm: f64,
    ftrue: Option<(&'a [f64], f64)>,
    keep_iterates: bool,
    history: SolveHistory,
}

impl<'a> HistoryRecorder<'a> {
    pub fn new(b: &[f64], ftrue: Option<&'a [f64]>, keep_iterates: bool) -> Self {
        let ftrue = ftrue.map(|f| (f, norm(f)));
        Self {
            b_norm: norm(b),
            ftrue,
            keep_iterates,
            history: SolveHistory {
                error_norms: ftrue.map(|_| Vec::new()),
                iterates: keep_iterates.then(Vec::new),
                ..Default::default()
            },
        }
    }

    /// Records an iterate and its absolute residual norm `‖A f − b‖`.
    pub fn record(&mut self, f: &[f64], residual: f64) {
        let rel = if self.b_norm > 0.0 {
            residual / self.b_norm
        } else {
            residual
        };
        self.history.residual_norms.push(rel);
        if let (Some((ft, ft_norm)), Some(errs)) = (self.ftrue, self.history.error_norms.as_mut()) {
            let d: f64 = f
                .iter()
                .zip(ft)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            errs.push(if ft_norm > 0.0 { d / ft_norm } else { d });
        }
        if self.keep_iterates {
            if let Some(it) = self.history.iterates.as_mut() {
                it.push(f.to_vec());
            }
        }
    }

    pub fn record_objective(&mut self, value: f64) {
        self.history
            .objective
            .get_or_insert_with(Vec::new)
            .push(value);
    }

    pub fn finish(mut self, solution: Vec<f64>) -> SolveHistory {
        self.history.best_index = self.history.error_norms.as_ref().and_then(|e| {
            e.iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
        });
        self.history.solution = solution;
        self.history
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorder_tracks_best() {
        let b = [3.0, 4.0];
        let ft = [1.0, 0.0];
        let mut r = HistoryRecorder::new(&b, Some(&ft), true);
        r.record(&[0.5, 0.0], 5.0);
        r.record(&[0.9, 0.0], 2.5);
        r.record(&[1.5, 0.0], 1.0);
        let h = r.finish(vec![1.5, 0.0]);
        assert_eq!(h.residual_norms, vec![1.0, 0.5, 0.2]);
        let e = h.error_norms.as_ref().unwrap();
        assert!((e[1] - 0.1).abs() < 1e-15);
        assert_eq!(h.best_index, Some(1));
        assert_eq!(h.best_iterate().unwrap(), &[0.9, 0.0]);
    }

    #[test]
    fn csv_layout() {
        let b = [1.0];
        let mut r = HistoryRecorder::new(&b, None, false);
        r.record(&[0.0], 0.5);
        let h = r.finish(vec![0.0]);
        let mut out = Vec::new();
        h.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,res_rel,err_rel"));
        assert_eq!(lines.next(), Some("1,5.0000000000000000e-1,"));
        assert_eq!(lines.next(), Some("# final_res_rel=5.0000000000000000e-1"));
    }
}
