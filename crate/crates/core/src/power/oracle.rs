//! Numeric cross-check of the closed-form pair allocation.
//!
//! Minimises `p_a + p_b` over the region where both analytic
//! outage probabilities stay within their targets and the decoding-order
//! prerequisites hold: a refined grid over the SIC user's power, with the
//! other power found by bisection for every grid column. The outage probabilities are evaluated through the
//! exponential gain CDF, not through the closed-form thresholds, so this path
//! shares no algebra with [`super::solve_case`].

use super::{prerequisites_hold, roles, solve_case, PairSolution, SicUser, VirtualUser};
use crate::error::{domain, Error, Result};

/// Grid-search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Grid intervals over the SIC user's power.
    pub grid: usize,
    /// Minimum number of zoom rounds after the initial grid.
    pub min_rounds: usize,
    /// Hard cap on zoom rounds.
    pub max_rounds: usize,
    /// Outage level used to express the constraints as probabilities. The
    /// feasible set does not depend on it.
    pub reference_outage: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { grid: 512, min_rounds: 6, max_rounds: 40, reference_outage: 0.01 }
    }
}

/// Grid spacings kept on each side of the incumbent when zooming in.
const ZOOM_NEIGHBOURS: usize = 2;

struct Constraints {
    sinr_s: f64,
    sinr_o: f64,
    // Fading rate times noise power, per user, for the reference outage level.
    scale_s: f64,
    scale_o: f64,
    target: f64,
}

impl Constraints {
    fn new(s: &VirtualUser, o: &VirtualUser, reference_outage: f64) -> Self {
        // beta = -ln(1 - delta) / (sigma^2 (1 + d^alpha)), so the product of
        // fading rate and noise power is -ln(1 - delta) / beta.
        let log_term = -(-reference_outage).ln_1p();
        Self {
            sinr_s: s.target_sinr,
            sinr_o: o.target_sinr,
            scale_s: log_term / s.beta,
            scale_o: log_term / o.beta,
            target: reference_outage,
        }
    }

    fn outage(scale: f64, threshold: f64) -> f64 {
        1.0 - (-scale * threshold).exp()
    }

    fn feasible(&self, p_s: f64, p_o: f64) -> bool {
        if !(p_s > 0.0) || !prerequisites_hold(p_s, p_o, self.sinr_s, self.sinr_o) {
            return false;
        }
        let residual = p_o - p_s * self.sinr_o;
        // Thresholds on |h|^2 in units of the noise power.
        let own = self.sinr_s / p_s;
        let cross = self.sinr_o / residual;
        let limit = self.target * (1.0 + 1e-12);
        Self::outage(self.scale_s, own.max(cross)) <= limit && Self::outage(self.scale_o, cross) <= limit
    }
}

/// Minimum-power allocation found by refined grid search.
///
/// `sic` fixes the SIC user; `None` searches both cases and keeps the cheaper.
/// The search stops once the grid spacing is below `rel_tol` of the incumbent
/// total (and at least `min_rounds` zooms were made).
pub fn oracle_min_power(
    a: &VirtualUser,
    b: &VirtualUser,
    sic: Option<SicUser>,
    rel_tol: f64,
    opts: &OracleOptions,
) -> Result<PairSolution> {
    if !(rel_tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {rel_tol}")));
    }
    match sic {
        Some(case) => search_case(a, b, case, rel_tol, opts),
        None => {
            let with_a = search_case(a, b, SicUser::A, rel_tol, opts);
            let with_b = search_case(a, b, SicUser::B, rel_tol, opts);
            match (with_a, with_b) {
                (Ok(x), Ok(y)) => Ok(if x.total <= y.total { x } else { y }),
                (Ok(x), Err(_)) | (Err(_), Ok(x)) => Ok(x),
                (Err(e), Err(_)) => Err(e),
            }
        }
    }
}

fn search_case(
    a: &VirtualUser,
    b: &VirtualUser,
    sic: SicUser,
    rel_tol: f64,
    opts: &OracleOptions,
) -> Result<PairSolution> {
    let (s, o) = roles(a, b, sic);
    let cons = Constraints::new(s, o, opts.reference_outage);
    // Any allocation cheaper than a feasible total T has both coordinates
    // below T, so [0, 4T] per axis cannot miss the optimum.
    let reference = solve_case(a, b, sic)?.total;
    if !reference.is_finite() {
        return Err(Error::Infeasible("closed-form reference is not finite".into()));
    }
    let ceiling = 4.0 * reference;
    let n = opts.grid.max(2);
    // First round: a linear grid plus a geometric one spanning 15 decades, so
    // a feasible band much narrower than a linear cell is still hit.
    let mut points: Vec<f64> = (0..=n)
        .map(|i| ceiling * i as f64 / n as f64)
        .chain((0..=n).map(|i| ceiling * 10f64.powf(-15.0 * (n - i) as f64 / n as f64)))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut best: Option<(f64, f64)> = None;

    for round in 0..=opts.max_rounds {
        // Columns left of the optimum are infeasible and the objective grows
        // to its right, so the first feasible column is the round's best.
        let mut best_index = None;
        for (k, &p_s) in points.iter().enumerate() {
            let Some(p_o) = cheapest_partner(&cons, p_s, ceiling, rel_tol) else {
                continue;
            };
            if best.is_none_or(|(bs, bo)| p_s + p_o < bs + bo) {
                best = Some((p_s, p_o));
                best_index = Some(k);
            }
        }
        let Some((bs, bo)) = best else {
            return Err(Error::Infeasible(format!(
                "no grid point satisfies the constraints with user {} performing SIC",
                s.user_id
            )));
        };
        // The optimum lies within one spacing left of the incumbent. Zoom
        // around the incumbent rather than the round's own best column: a
        // round may bring no improvement when the previous grid was locally
        // finer than the new one.
        let spacing = match best_index {
            Some(k) => {
                let left = if k > 0 { points[k] - points[k - 1] } else { 0.0 };
                let right = if k + 1 < points.len() { points[k + 1] - points[k] } else { 0.0 };
                left.max(right)
            }
            None => points[1] - points[0],
        };
        let width = ZOOM_NEIGHBOURS as f64 * spacing;
        let lo = (bs - width).max(0.0);
        let step = (bs + width - lo) / n as f64;
        if round >= opts.min_rounds && step <= rel_tol * (bs + bo) * 0.01 {
            break;
        }
        points = (0..=n).map(|i| lo + step * i as f64).collect();
    }
    let (p_s, p_o) = best.expect("checked above");
    Ok(PairSolution::from_roles(sic, p_s, p_o))
}

/// Smallest feasible power for the non-SIC user given the SIC user's power,
/// by bisection on `[0, ceiling]`. Feasibility is monotone in this coordinate:
/// every constraint only gets looser as it grows.
fn cheapest_partner(cons: &Constraints, p_s: f64, ceiling: f64, rel_tol: f64) -> Option<f64> {
    if !cons.feasible(p_s, ceiling) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, ceiling);
    for _ in 0..200 {
        if hi - lo <= rel_tol * 1e-3 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cons.feasible(p_s, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
