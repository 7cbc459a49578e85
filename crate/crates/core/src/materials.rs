//! Soft-ferromagnet magnetisation curves.
//!
//! Every model is odd in `H`, strictly increasing, and has a differential
//! permeability no smaller than `MU_0`. Tabulated curves are interpolated on
//! the polarisation `J = B - MU_0 H` with a monotone cubic, which keeps
//! `dB/dH >= MU_0` between knots; beyond the last knot the curve continues
//! with slope exactly `MU_0`.

use std::sync::OnceLock;

use thiserror::Error;

use crate::interp::MonotoneCubic;
use crate::MU_0;

/// Default relative threshold above `MU_0` that marks full saturation.
pub const DEFAULT_SATURATION_EPS: f64 = 1e-3;

/// Relative slack allowed when checking the `MU_0` slope floor on tables.
const SLOPE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("BH table needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("BH table row 1 must be (0, 0), got ({0}, {1})")]
    BadOrigin(f64, f64),
    #[error("BH table row {row}: non-finite value")]
    NonFinite { row: usize },
    #[error("BH table row {row}: H must be strictly increasing ({prev} then {h})")]
    NonMonotoneH { row: usize, prev: f64, h: f64 },
    #[error("BH table row {row}: B must be strictly increasing ({prev} then {b})")]
    NonMonotoneB { row: usize, prev: f64, b: f64 },
    #[error("BH table row {row}: slope {slope:.6e} T·m/A is below mu0")]
    SlopeBelowMu0 { row: usize, slope: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("material '{0}' does not saturate")]
    DoesNotSaturate(String),
    #[error("no saturation crossing for eps = {eps:e} in material '{name}'")]
    NoCrossing { name: String, eps: f64 },
}

/// Tabulated first-quadrant normal magnetisation curve, `(H [A/m], B [T])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BhTable {
    points: Vec<(f64, f64)>,
}

impl BhTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, MaterialError> {
        if points.len() < 2 {
            return Err(MaterialError::TooFewRows(points.len()));
        }
        for (i, &(h, b)) in points.iter().enumerate() {
            if !h.is_finite() || !b.is_finite() {
                return Err(MaterialError::NonFinite { row: i + 1 });
            }
        }
        let (h0, b0) = points[0];
        if h0 != 0.0 || b0 != 0.0 {
            return Err(MaterialError::BadOrigin(h0, b0));
        }
        for i in 1..points.len() {
            let (hp, bp) = points[i - 1];
            let (h, b) = points[i];
            let row = i + 1;
            if h <= hp {
                return Err(MaterialError::NonMonotoneH { row, prev: hp, h });
            }
            if b <= bp {
                return Err(MaterialError::NonMonotoneB { row, prev: bp, b });
            }
            let slope = (b - bp) / (h - hp);
            if slope < MU_0 * (1.0 - SLOPE_TOLERANCE) {
                return Err(MaterialError::SlopeBelowMu0 { row, slope });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn h_max(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn b_max(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }
}

/// Which family of `B(H)` curve a [`MaterialModel`] uses.
#[derive(Debug, Clone, PartialEq)]
pub enum MaterialKind {
    /// `B = mu_rel * MU_0 * H`.
    Linear { mu_rel: f64 },
    /// Monotone cubic through tabulated data.
    Table {
        table: BhTable,
        polarization: MonotoneCubic,
    },
    /// `B = MU_0 H + js * tanh(chi * H / js)`, with `chi = mu_i - MU_0`.
    Tanh { js: f64, chi: f64 },
}

/// An immutable anhysteretic material model.
#[derive(Debug, Clone)]
pub struct MaterialModel {
    name: String,
    kind: MaterialKind,
    b_sat: Option<f64>,
    h_sat: OnceLock<Option<f64>>,
}

impl PartialEq for MaterialModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.b_sat == other.b_sat
    }
}

impl MaterialModel {
    /// Linear material with relative permeability `mu_rel >= 1`.
    pub fn linear(name: impl Into<String>, mu_rel: f64) -> Result<Self, MaterialError> {
        if !(mu_rel.is_finite() && mu_rel >= 1.0) {
            return Err(MaterialError::Parameter(format!(
                "mu_rel must be finite and >= 1, got {mu_rel}"
            )));
        }
        Ok(Self {
            name: name.into(),
            kind: MaterialKind::Linear { mu_rel },
            b_sat: None,
            h_sat: OnceLock::new(),
        })
    }

    /// Material interpolating a validated BH table.
    pub fn from_table(name: impl Into<String>, table: BhTable) -> Result<Self, MaterialError> {
        let hs: Vec<f64> = table.points.iter().map(|p| p.0).collect();
        let mut js: Vec<f64> = table.points.iter().map(|p| p.1 - MU_0 * p.0).collect();
        // Rows with slope within tolerance of mu0 may produce a tiny negative
        // step in J; flatten those so J stays non-decreasing.
        for i in 1..js.len() {
            if js[i] < js[i - 1] {
                js[i] = js[i - 1];
            }
        }
        let polarization = MonotoneCubic::new(hs, js).map_err(|e| MaterialError::Parameter(e.to_string()))?;
        let b_sat = polarization.y()[polarization.y().len() - 1];
        Ok(Self {
            name: name.into(),
            kind: MaterialKind::Table { table, polarization },
            b_sat: Some(b_sat),
            h_sat: OnceLock::new(),
        })
    }

    /// Saturating tanh material with initial permeability `mu_i` (T·m/A)
    /// and saturation polarisation `js` (T).
    pub fn saturating(name: impl Into<String>, mu_i: f64, js: f64) -> Result<Self, MaterialError> {
        if !(mu_i.is_finite() && mu_i > MU_0) {
            return Err(MaterialError::Parameter(format!(
                "initial permeability must exceed mu0, got {mu_i:e}"
            )));
        }
        if !(js.is_finite() && js > 0.0) {
            return Err(MaterialError::Parameter(format!(
                "saturation polarisation must be positive, got {js}"
            )));
        }
        Ok(Self {
            name: name.into(),
            kind: MaterialKind::Tanh { js, chi: mu_i - MU_0 },
            b_sat: Some(js),
            h_sat: OnceLock::new(),
        })
    }

    /// Tanh material whose full-saturation field (at threshold `eps`) lands
    /// on `h_sat`. Solves for the initial permeability on the high-`chi`
    /// branch of `chi * sech^2(chi * h_sat / js) = eps * MU_0`.
    pub fn saturating_calibrated(
        name: impl Into<String>,
        h_sat: f64,
        js: f64,
        eps: f64,
    ) -> Result<Self, MaterialError> {
        if !(h_sat > 0.0 && js > 0.0 && eps > 0.0) {
            return Err(MaterialError::Parameter("h_sat, js and eps must be positive".into()));
        }
        let target = eps * MU_0;
        // g(chi) = chi sech^2(chi h / js) peaks where x tanh x = 1/2 (x ~ 0.7718).
        let excess = |chi: f64| {
            let x = chi * h_sat / js;
            chi * sech2(x) - target
        };
        let mut lo = 0.7718 * js / h_sat;
        if excess(lo) <= 0.0 {
            return Err(MaterialError::Parameter(format!(
                "no tanh material reaches eps = {eps:e} at H = {h_sat} with js = {js}"
            )));
        }
        let mut hi = lo * 2.0;
        while excess(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Self::saturating(name, hi + MU_0, js)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &MaterialKind {
        &self.kind
    }

    /// Same model under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    /// Saturation polarisation (T); `None` for linear materials.
    pub fn b_sat(&self) -> Option<f64> {
        self.b_sat
    }

    /// Full-saturation field at [`DEFAULT_SATURATION_EPS`], computed on
    /// first use. `None` for linear materials.
    pub fn saturation_field(&self) -> Option<f64> {
        if !self.saturates() {
            return None;
        }
        *self.h_sat.get_or_init(|| self.scan_h_sat(DEFAULT_SATURATION_EPS).ok())
    }

    pub fn saturates(&self) -> bool {
        !matches!(self.kind, MaterialKind::Linear { .. })
    }

    /// Initial (H = 0) permeability, T·m/A.
    pub fn initial_permeability(&self) -> f64 {
        self.mu_diff(0.0)
    }

    /// Flux density `B(H)` in tesla.
    pub fn b_of_h(&self, h: f64) -> f64 {
        let mag = h.abs();
        let b = match &self.kind {
            MaterialKind::Linear { mu_rel } => mu_rel * MU_0 * mag,
            MaterialKind::Tanh { js, chi } => MU_0 * mag + js * (chi * mag / js).tanh(),
            MaterialKind::Table { table, polarization } => table_b(table, polarization, mag),
        };
        if h < 0.0 {
            -b
        } else {
            b
        }
    }

    /// Differential permeability `dB/dH` in T·m/A (even in `H`).
    pub fn mu_diff(&self, h: f64) -> f64 {
        let mag = h.abs();
        match &self.kind {
            MaterialKind::Linear { mu_rel } => mu_rel * MU_0,
            MaterialKind::Tanh { js, chi } => MU_0 + chi * sech2(chi * mag / js),
            MaterialKind::Table { table, polarization } => {
                if mag > table.h_max() {
                    MU_0
                } else {
                    MU_0 + polarization.derivative(mag).max(0.0)
                }
            }
        }
    }

    /// Smallest `H >= 0` with `mu_diff(H) <= (1 + eps) MU_0`.
    pub fn h_sat(&self, eps: f64) -> Result<f64, MaterialError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(MaterialError::Parameter(format!(
                "saturation threshold must be positive, got {eps}"
            )));
        }
        if !self.saturates() {
            return Err(MaterialError::DoesNotSaturate(self.name.clone()));
        }
        if eps == DEFAULT_SATURATION_EPS {
            if let Some(h) = self.saturation_field() {
                return Ok(h);
            }
        }
        self.scan_h_sat(eps)
    }

    fn scan_h_sat(&self, eps: f64) -> Result<f64, MaterialError> {
        const DECADES: (i32, i32) = (-6, 15);
        const PER_DECADE: i32 = 400;

        let threshold = (1.0 + eps) * MU_0;
        let no_crossing = || MaterialError::NoCrossing {
            name: self.name.clone(),
            eps,
        };
        if threshold <= MU_0 {
            return Err(no_crossing());
        }
        let sat = |h: f64| self.mu_diff(h) <= threshold;
        if sat(0.0) {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = None;
        for i in 0..=(DECADES.1 - DECADES.0) * PER_DECADE {
            let h = 10f64.powf(DECADES.0 as f64 + i as f64 / PER_DECADE as f64);
            if sat(h) {
                hi = Some(h);
                break;
            }
            lo = h;
        }
        let mut hi = hi.ok_or_else(no_crossing)?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sat(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(hi)
    }
}

fn table_b(table: &BhTable, polarization: &MonotoneCubic, h: f64) -> f64 {
    let h_max = table.h_max();
    if h > h_max {
        return table.b_max() + MU_0 * (h - h_max);
    }
    let pts = table.points();
    if let Ok(i) = pts.binary_search_by(|p| p.0.total_cmp(&h)) {
        return pts[i].1;
    }
    MU_0 * h + polarization.eval(h)
}

fn sech2(x: f64) -> f64 {
    // 4 / (e^x + e^-x)^2, written to avoid overflow for large |x|
    let ax = x.abs();
    if ax > 350.0 {
        return 0.0;
    }
    let e = (-2.0 * ax).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_table() -> MaterialModel {
        let t = BhTable::new(vec![(0.0, 0.0), (400.0, 0.75), (1000.0, 0.7508)]).unwrap();
        MaterialModel::from_table("t", t).unwrap()
    }

    #[test]
    fn table_hits_knots_and_extrapolates() {
        let m = spec_table();
        assert_eq!(m.b_of_h(400.0), 0.75);
        assert_eq!(m.b_of_h(-400.0), -0.75);
        assert_eq!(m.b_of_h(1000.0), 0.7508);
        let expected = 0.7508 + MU_0 * 1000.0;
        assert!((m.b_of_h(2000.0) - expected).abs() <= 1e-15);
        assert_eq!(m.mu_diff(5000.0), MU_0);
    }

    #[test]
    fn table_validation_names_rows() {
        let e = BhTable::new(vec![(0.0, 0.0), (10.0, 0.5), (5.0, 0.6)]).unwrap_err();
        assert!(matches!(e, MaterialError::NonMonotoneH { row: 3, .. }));
        let e = BhTable::new(vec![(0.0, 0.0), (10.0, 0.5), (20.0, 0.4)]).unwrap_err();
        assert!(matches!(e, MaterialError::NonMonotoneB { row: 3, .. }));
        let e = BhTable::new(vec![(0.0, 0.0), (10.0, 0.5), (1e6, 0.5 + 0.5 * MU_0 * 1e6)]).unwrap_err();
        assert!(matches!(e, MaterialError::SlopeBelowMu0 { row: 3, .. }));
        let e = BhTable::new(vec![(1.0, 0.0), (10.0, 0.5)]).unwrap_err();
        assert!(matches!(e, MaterialError::BadOrigin(..)));
    }

    #[test]
    fn linear_material() {
        let m = MaterialModel::linear("lin", 1e4).unwrap();
        assert_eq!(m.b_of_h(100.0), 1e4 * MU_0 * 100.0);
        assert_eq!(m.b_of_h(0.0), 0.0);
        assert!(matches!(m.h_sat(1e-3), Err(MaterialError::DoesNotSaturate(_))));
        assert!(MaterialModel::linear("bad", 0.5).is_err());
    }

    #[test]
    fn tanh_material_basics() {
        let mu_i = 2e4 * MU_0;
        let m = MaterialModel::saturating("tanh", mu_i, 0.75).unwrap();
        assert_eq!(m.b_of_h(0.0), 0.0);
        assert!((m.mu_diff(0.0) - mu_i).abs() <= 1e-15 * mu_i);
        assert_eq!(m.mu_diff(1e9), MU_0);
        assert_eq!(m.mu_diff(-1e9), MU_0);
        assert_eq!(m.b_sat(), Some(0.75));
        assert!(MaterialModel::saturating("bad", MU_0, 1.0).is_err());
        assert!(MaterialModel::saturating("bad", 2.0 * MU_0, 0.0).is_err());
    }

    #[test]
    fn h_sat_matches_closed_form_for_tanh() {
        let m = MaterialModel::saturating("tanh", 1e4 * MU_0, 1.0).unwrap();
        let (js, chi) = match m.kind() {
            MaterialKind::Tanh { js, chi } => (*js, *chi),
            _ => unreachable!(),
        };
        let eps = 1e-3;
        // sech^2(x) = eps mu0 / chi  <=>  cosh(x) = sqrt(chi / (eps mu0))
        let x = (chi / (eps * MU_0)).sqrt().acosh();
        let exact = x * js / chi;
        let got = m.h_sat(eps).unwrap();
        assert!((got - exact).abs() <= 1e-9 * exact, "{got} vs {exact}");
        let mu = m.mu_diff(got);
        assert!(mu >= MU_0 && mu <= (1.0 + eps) * MU_0 * (1.0 + 1e-6));
    }

    #[test]
    fn calibrated_tanh_lands_on_target() {
        for (h, js) in [(400.0, 0.75), (4e4, 1.5), (3e5, 2.3)] {
            let m = MaterialModel::saturating_calibrated("c", h, js, 1e-3).unwrap();
            let got = m.h_sat(1e-3).unwrap();
            assert!((got - h).abs() <= 1e-6 * h, "{got} vs {h}");
        }
    }

    #[test]
    fn h_sat_rejects_tiny_eps() {
        let m = MaterialModel::saturating("tanh", 1e4 * MU_0, 1.0).unwrap();
        assert!(matches!(m.h_sat(1e-20), Err(MaterialError::NoCrossing { .. })));
        assert!(m.h_sat(0.0).is_err());
    }

    #[test]
    fn table_mu_diff_matches_finite_difference() {
        let m = spec_table();
        for h in [37.0, 150.0, 333.0, 612.5, 901.0] {
            let step = 1e-4;
            let fd = (m.b_of_h(h + step) - m.b_of_h(h - step)) / (2.0 * step);
            let mu = m.mu_diff(h);
            assert!((fd - mu).abs() <= 1e-6 * mu, "H={h}: {fd} vs {mu}");
        }
    }
}
