//! Radial crossover search: tabulate `F(d)` on a logarithmic grid, flag sign
//! changes of the energy, and refine a stationary point of `F` by
//! golden-section search inside the bracket where the radial force flips.

/// Logarithmically spaced radial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub d_min: f64,
    pub d_max: f64,
    pub samples: usize,
}

impl ScanRange {
    pub fn distances(&self) -> Vec<f64> {
        let n = self.samples.max(2);
        let (a, b) = (self.d_min.ln(), self.d_max.ln());
        (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverRow {
    pub distance: f64,
    pub energy: f64,
    /// The energy changes sign between this row and the previous one.
    pub sign_change: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverReport {
    pub rows: Vec<CrossoverRow>,
    /// First radial stationary point `(d*, F(d*))`, if the force changes sign.
    pub stationary: Option<(f64, f64)>,
}

impl CrossoverReport {
    pub fn sign_changes(&self) -> usize {
        self.rows.iter().filter(|r| r.sign_change).count()
    }

    pub fn found(&self) -> bool {
        self.stationary.is_some()
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Scan `energy(d)` over `range` and locate the first radial stationary
/// point. The search is done in `ln d`.
pub fn crossover_scan<E, F>(mut energy: F, range: ScanRange) -> Result<CrossoverReport, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let distances = range.distances();
    let mut rows = Vec::with_capacity(distances.len());
    for (i, &d) in distances.iter().enumerate() {
        let e = energy(d)?;
        let sign_change = i > 0 && {
            let prev: &CrossoverRow = &rows[i - 1];
            prev.energy.signum() != e.signum() && prev.energy != 0.0 && e != 0.0
        };
        rows.push(CrossoverRow {
            distance: d,
            energy: e,
            sign_change,
        });
    }

    // Radial force −dF/dd flips sign where consecutive slopes change sign.
    let mut bracket = None;
    for i in 1..rows.len().saturating_sub(1) {
        let left = rows[i].energy - rows[i - 1].energy;
        let right = rows[i + 1].energy - rows[i].energy;
        if left.signum() != right.signum() && left != 0.0 && right != 0.0 {
            let is_min = left < 0.0;
            bracket = Some((rows[i - 1].distance, rows[i + 1].distance, is_min));
            break;
        }
    }

    let stationary = match bracket {
        None => None,
        Some((lo, hi, is_min)) => {
            let sign = if is_min { 1.0 } else { -1.0 };
            let mut objective = |lnd: f64| energy(lnd.exp()).map(|e| sign * e);
            let (mut a, mut b) = (lo.ln(), hi.ln());
            let mut c = b - GOLDEN * (b - a);
            let mut d = a + GOLDEN * (b - a);
            let mut fc = objective(c)?;
            let mut fd = objective(d)?;
            while (b - a).abs() > 1e-10 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - GOLDEN * (b - a);
                    fc = objective(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + GOLDEN * (b - a);
                    fd = objective(d)?;
                }
            }
            let d_star = (0.5 * (a + b)).exp();
            Some((d_star, energy(d_star)?))
        }
    };

    Ok(CrossoverReport { rows, stationary })
}
