//! Browser bindings for the dpboost demo page.
//!
//! Every function returns flat `Float64Array`s so the page can draw them on a
//! canvas without any glue beyond indexing.

use wasm_bindgen::prelude::*;

use dpboost::dataset::synthetic;
use dpboost::ensemble::{alphaboost_fit, BoostConfig};
use dpboost::{AlphaStrategy, BudgetAccountant, Classifier, LossSpec, PrivateTreeConfig, RandomSource, TreeConfig};

fn checked_alpha(alpha: f64) -> Result<LossSpec, JsError> {
    LossSpec::m_alpha(alpha).map_err(|e| JsError::new(&e.to_string()))
}

/// `samples` points of `u in [0, 1]` followed by four curves of the same
/// length: `phi_alpha`, the Matsushita and 0/1 risks it interpolates, and the
/// surrogate `psi_alpha(z)` on `z in [-4, 4]`.
#[wasm_bindgen]
pub fn loss_curves(alpha: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let loss = checked_alpha(alpha)?;
    let n = samples.max(2);
    let mut out = Vec::with_capacity(5 * n);
    let us: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    out.extend(&us);
    for spec in [loss, LossSpec::MAlpha(1.0), LossSpec::ZeroOne] {
        for &u in &us {
            out.push(spec.bayes_risk(u).map_err(|e| JsError::new(&e.to_string()))?);
        }
    }
    for &u in &us {
        out.push(loss.surrogate(8.0 * u - 4.0));
    }
    Ok(out)
}

/// For `m = 1..=m_max`: the sensitivity bound and the change realized by
/// flipping the single positive of `m` unit examples, as `[bound.., tight..]`.
#[wasm_bindgen]
pub fn sensitivity_curve(alpha: f64, m_max: usize) -> Result<Vec<f64>, JsError> {
    let loss = checked_alpha(alpha)?;
    let ms = 1..=m_max.max(1);
    let bounds = ms.clone().map(|m| loss.sensitivity_bound(m));
    let tight = ms.map(|m| m as f64 * loss.bayes_risk(1.0 / m as f64).unwrap_or(0.0));
    Ok(bounds.chain(tight).collect())
}

/// Boosted ensemble fit on the noisy disk data, evaluated on every cell of
/// the quantized plane.
#[wasm_bindgen]
pub struct DecisionMap {
    resolution: usize,
    margins: Vec<f64>,
    points: Vec<f64>,
    train_error: f64,
    spent: f64,
}

#[wasm_bindgen]
impl DecisionMap {
    /// Cells per side.
    #[wasm_bindgen(getter)]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major margins, row index = second attribute bin.
    pub fn margins(&self) -> Vec<f64> {
        self.margins.clone()
    }

    /// Training points as `(u, v, label)` triples in `[-1, 1]^2`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn train_error(&self) -> f64 {
        self.train_error
    }

    #[wasm_bindgen(getter)]
    pub fn spent(&self) -> f64 {
        self.spent
    }
}

/// Fits `rounds` trees of depth `depth` on `m` disk points. `epsilon <= 0`
/// trains without privacy.
#[wasm_bindgen]
pub fn decision_map(
    epsilon: f64,
    rounds: usize,
    depth: usize,
    m: usize,
    resolution: usize,
    seed: u64,
) -> Result<DecisionMap, JsError> {
    let err = |e: dpboost::Error| JsError::new(&e.to_string());
    let resolution = resolution.clamp(2, 64);
    let ds = synthetic::disk(m.max(2), resolution, 0.05, seed);
    let privacy = (epsilon > 0.0).then_some(PrivateTreeConfig {
        epsilon,
        beta_tree: 0.5,
        trees: rounds,
        output_bound: 10.0,
    });
    let tree = TreeConfig {
        depth,
        alpha: AlphaStrategy::ObjectiveCalibration,
        privacy,
    };
    let mut acc = match privacy {
        Some(_) => BudgetAccountant::new(epsilon).map_err(err)?,
        None => BudgetAccountant::none(),
    };
    let cfg = BoostConfig::new(rounds, tree, 10.0);
    let (model, trace) = alphaboost_fit(&ds, &cfg, &mut acc, &mut RandomSource::new(seed)).map_err(err)?;

    let mut margins = Vec::with_capacity(resolution * resolution);
    for v in 0..resolution as u16 {
        for u in 0..resolution as u16 {
            margins.push(model.margin(&[u, v]));
        }
    }
    let domains = ds.domains();
    let mut points = Vec::with_capacity(3 * ds.len());
    for i in 0..ds.len() {
        let row = ds.row(i);
        points.extend([domains[0].grid_value(row[0]), domains[1].grid_value(row[1]), ds.y(i)]);
    }
    Ok(DecisionMap {
        resolution,
        margins,
        points,
        train_error: trace.train_error.last().copied().unwrap_or(1.0),
        spent: acc.spent(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_curves_layout() {
        let c = loss_curves(0.5, 11).unwrap();
        assert_eq!(c.len(), 55);
        // phi at u = 1/2 is 1 for every curve
        for k in 1..4 {
            assert!((c[k * 11 + 5] - 1.0).abs() < 1e-12);
        }
        assert!((c[11 + 2] - (0.5 * c[2 * 11 + 2] + 0.5 * c[3 * 11 + 2])).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_curve_dominates_tight_case() {
        let c = sensitivity_curve(1.0, 8).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c[3], 3.0 + 2.0 * (4.0f64.sqrt() - 1.0));
        assert!((c[8 + 3] - 2.0 * 3.0f64.sqrt()).abs() < 1e-12);
        for m in 0..8 {
            assert!(c[8 + m] <= c[m]);
        }
    }

    #[test]
    fn nonprivate_map_fits_the_disk() {
        let map = decision_map(0.0, 10, 3, 300, 16, 1).unwrap();
        assert_eq!(map.margins().len(), 256);
        assert_eq!(map.points().len(), 900);
        assert_eq!(map.spent(), 0.0);
        assert!(map.train_error() < 0.3);
    }

    #[test]
    fn private_map_spends_its_budget() {
        let map = decision_map(1.0, 5, 2, 200, 12, 2).unwrap();
        assert!((map.spent() - 1.0).abs() < 1e-12);
        assert!(map.margins().iter().all(|m| m.is_finite()));
    }
}
