use serde::{Deserialize, Serialize};

use super::FluidModel;
use crate::error::{Error, Result};

/// Tabulated water/oil relative permeabilities, interpolated piecewise
/// linearly. Saturations outside the table are clamped to its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelPermTable {
    sw: Vec<f64>,
    krw: Vec<f64>,
    kro: Vec<f64>,
    swc: f64,
    sor: f64,
}

impl RelPermTable {
    pub fn new(sw: Vec<f64>, krw: Vec<f64>, kro: Vec<f64>, swc: f64, sor: f64) -> Result<Self> {
        if sw.len() < 2 {
            return Err(Error::Config(format!(
                "relative permeability table needs at least 2 points, got {}",
                sw.len()
            )));
        }
        if krw.len() != sw.len() || kro.len() != sw.len() {
            return Err(Error::Config("relative permeability columns differ in length".into()));
        }
        if !(0.0..1.0).contains(&swc) || !(0.0..1.0).contains(&sor) || swc + sor >= 1.0 {
            return Err(Error::Config(format!("invalid endpoints swc={swc} sor={sor}")));
        }
        if sw.iter().any(|s| !(0.0..=1.0).contains(s)) || sw.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sw column must be strictly increasing in [0, 1]".into()));
        }
        if krw.iter().chain(&kro).any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(Error::Config("relative permeabilities must be nonnegative".into()));
        }
        if krw.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("krw must be nondecreasing in sw".into()));
        }
        if kro.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("kro must be nonincreasing in sw".into()));
        }
        let table = RelPermTable { sw, krw, kro, swc, sor };
        let (krw_c, _) = table.eval(swc);
        let (_, kro_r) = table.eval(1.0 - sor);
        if krw_c != 0.0 || kro_r != 0.0 {
            return Err(Error::Config(format!(
                "table must satisfy krw(swc)=0 and kro(1-sor)=0, got {krw_c} and {kro_r}"
            )));
        }
        Ok(table)
    }

    /// Corey-type table on `[swc, 1 - sor]` with `points` nodes.
    pub fn corey(swc: f64, sor: f64, nw: f64, no: f64, krw_max: f64, kro_max: f64, points: usize) -> Result<Self> {
        let points = points.max(2);
        let span = 1.0 - swc - sor;
        let mut sw = Vec::with_capacity(points);
        let mut krw = Vec::with_capacity(points);
        let mut kro = Vec::with_capacity(points);
        for n in 0..points {
            let sn = n as f64 / (points - 1) as f64;
            sw.push(if n == points - 1 { 1.0 - sor } else { swc + sn * span });
            krw.push(krw_max * sn.powf(nw));
            kro.push(kro_max * (1.0 - sn).powf(no));
        }
        RelPermTable::new(sw, krw, kro, swc, sor)
    }

    /// The default shipped table: quadratic Corey curves with swc = sor = 0.2.
    pub fn default_corey() -> Self {
        RelPermTable::corey(0.2, 0.2, 2.0, 2.0, 1.0, 1.0, 21).expect("valid default table")
    }

    pub fn swc(&self) -> f64 {
        self.swc
    }

    pub fn sor(&self) -> f64 {
        self.sor
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.sw
            .iter()
            .zip(&self.krw)
            .zip(&self.kro)
            .map(|((&s, &w), &o)| (s, w, o))
    }

    /// `(krw, kro)` at water saturation `sw`.
    pub fn eval(&self, sw: f64) -> (f64, f64) {
        let n = self.sw.len();
        let s = sw.clamp(self.sw[0], self.sw[n - 1]);
        // First node strictly above s, clamped to a valid interval.
        let hi = self.sw.partition_point(|&x| x <= s).clamp(1, n - 1);
        let lo = hi - 1;
        let t = (s - self.sw[lo]) / (self.sw[hi] - self.sw[lo]);
        let lerp = |v: &[f64]| {
            if t == 0.0 {
                v[lo]
            } else if t == 1.0 {
                v[hi]
            } else {
                v[lo] + t * (v[hi] - v[lo])
            }
        };
        (lerp(&self.krw), lerp(&self.kro))
    }

    /// Phase mobilities `(krw/mu_w, kro/mu_o)`.
    pub fn mobilities(&self, sw: f64, fluid: &FluidModel) -> (f64, f64) {
        let (krw, kro) = self.eval(sw);
        (krw / fluid.mu_w, kro / fluid.mu_o)
    }

    pub fn total_mobility(&self, sw: f64, fluid: &FluidModel) -> f64 {
        let (lw, lo) = self.mobilities(sw, fluid);
        lw + lo
    }

    pub fn fractional_flow(&self, sw: f64, fluid: &FluidModel) -> f64 {
        let (lw, lo) = self.mobilities(sw, fluid);
        let lt = lw + lo;
        if lt > 0.0 {
            lw / lt
        } else {
            0.0
        }
    }

    /// Largest slope of the fractional flow curve, estimated on a fine mesh.
    pub fn max_fractional_flow_slope(&self, fluid: &FluidModel) -> f64 {
        let a = self.sw[0];
        let b = self.sw[self.sw.len() - 1];
        let samples = 4000;
        let h = (b - a) / samples as f64;
        let mut prev = self.fractional_flow(a, fluid);
        let mut slope: f64 = 0.0;
        for n in 1..=samples {
            let f = self.fractional_flow(a + n as f64 * h, fluid);
            slope = slope.max((f - prev).abs() / h);
            prev = f;
        }
        slope
    }
}
