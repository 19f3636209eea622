//! Trimming functions applied to the phaseless measurements.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Affine map `t -> scale * t + shift` applied by [`normalize_trimmer`].
///
/// Since `A^H A = I`, the data matrix transforms as `M~ = scale * M + shift * I`,
/// so eigenvalues map back through [`AffineMap::invert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub scale: f64,
    pub shift: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { scale: 1.0, shift: 0.0 };

    pub fn apply(&self, t: f64) -> f64 {
        self.scale * t + self.shift
    }

    pub fn invert(&self, t: f64) -> f64 {
        (t - self.shift) / self.scale
    }

    /// `self` after `inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            scale: self.scale * inner.scale,
            shift: self.scale * inner.shift + self.shift,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.shift == 0.0
    }
}

/// Piecewise-linear table `(y, t)` with constant extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    ys: Vec<f64>,
    ts: Vec<f64>,
}

impl Table {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Table> {
        if points.is_empty() {
            return Err(Error::Table("table has no rows".into()));
        }
        if points.iter().any(|(y, t)| !y.is_finite() || !t.is_finite()) {
            return Err(Error::Table("non-finite entry".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Table("duplicate y knot".into()));
        }
        let (ys, ts) = points.into_iter().unzip();
        Ok(Table { ys, ts })
    }

    /// Parses two comma-separated columns. Blank lines, `#` comments and a
    /// non-numeric header row are skipped.
    pub fn parse_csv(text: &str) -> Result<Table> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Table(format!("line {}: expected two columns", lineno + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(y), Ok(t)) => points.push((y, t)),
                _ if points.is_empty() => continue,
                _ => return Err(Error::Table(format!("line {}: not numeric", lineno + 1))),
            }
        }
        Table::new(points)
    }

    pub fn load(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        Table::parse_csv(&text)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y <= self.ys[0] {
            return self.ts[0];
        }
        if y >= self.ys[n - 1] {
            return self.ts[n - 1];
        }
        let k = self.ys.partition_point(|&v| v <= y);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        let (t0, t1) = (self.ts[k - 1], self.ts[k]);
        t0 + (t1 - t0) * (y - y0) / (y1 - y0)
    }

    fn range(&self) -> (f64, f64) {
        let lo = self.ts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Mm { delta: f64 },
    Lal { delta: f64 },
    Opt { delta: f64 },
    OptEps { delta: f64, eps: f64 },
    Const { c: f64 },
    Table(Arc<Table>),
}

impl Kind {
    fn eval(&self, y: f64) -> f64 {
        match *self {
            Kind::Mm { delta } => {
                let u = delta * y * y;
                u / (u + delta.sqrt() - 1.0)
            }
            Kind::Lal { delta } => {
                let u = delta * y * y;
                u / (u + 0.1)
            }
            Kind::Opt { delta } => 1.0 - 1.0 / (delta * y * y),
            Kind::OptEps { delta, eps } => 1.0 - 1.0 / (delta * y * y + eps),
            Kind::Const { c } => c,
            Kind::Table(ref t) => t.eval(y),
        }
    }
}

/// A map `y -> T(y)` together with its declared range and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmingFunction {
    name: String,
    params: Vec<(&'static str, f64)>,
    kind: Kind,
    /// Map from the underlying evaluator to the values returned by `eval`.
    affine: AffineMap,
    range: (f64, f64),
    bounded: bool,
    lipschitz: bool,
}

impl fmt::Display for TrimmingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

impl TrimmingFunction {
    fn built(name: &str, params: Vec<(&'static str, f64)>, kind: Kind, range: (f64, f64)) -> Self {
        let bounded = range.0.is_finite() && range.1.is_finite();
        TrimmingFunction {
            name: name.to_string(),
            params,
            kind,
            affine: AffineMap::IDENTITY,
            range,
            bounded,
            lipschitz: bounded,
        }
    }

    /// `T(y) = δy² / (δy² + √δ − 1)`.
    pub fn mm(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self::built("mm", vec![("delta", delta)], Kind::Mm { delta }, (0.0, 1.0)))
    }

    /// `T(y) = δy² / (δy² + 0.1)`.
    pub fn lal(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self::built("lal", vec![("delta", delta)], Kind::Lal { delta }, (0.0, 1.0)))
    }

    /// `T(y) = 1 − 1/(δy²)`, unbounded below.
    pub fn opt(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self::built("opt", vec![("delta", delta)], Kind::Opt { delta }, (f64::NEG_INFINITY, 1.0)))
    }

    /// `T(y) = 1 − 1/(δy² + ε)` with range `[1 − 1/ε, 1]`.
    pub fn opt_eps(delta: f64, eps: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
        }
        Ok(Self::built(
            "opt-eps",
            vec![("delta", delta), ("eps", eps)],
            Kind::OptEps { delta, eps },
            (1.0 - 1.0 / eps, 1.0),
        ))
    }

    /// Deterministic trimmer `T ≡ c`, used for degenerate test cases.
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Domain(format!("constant must be finite, got {c}")));
        }
        let mut t = Self::built("const", vec![("c", c)], Kind::Const { c }, (c, c));
        t.lipschitz = true;
        Ok(t)
    }

    pub fn table(name: &str, table: Table) -> Self {
        let range = table.range();
        Self::built(name, Vec::new(), Kind::Table(Arc::new(table)), range)
    }

    /// Looks up a built-in trimmer by id: `mm`, `lal`, `opt`, `opt-eps`, `const`.
    /// `param` is `ε` for `opt-eps` and the level for `const`.
    pub fn from_id(id: &str, delta: f64, param: Option<f64>) -> Result<Self> {
        match id {
            "mm" => Self::mm(delta),
            "lal" => Self::lal(delta),
            "opt" => Self::opt(delta),
            "opt-eps" => Self::opt_eps(delta, param.unwrap_or(1e-2)),
            "const" => Self::constant(param.unwrap_or(0.5)),
            _ => Err(Error::Domain(format!("unknown trimmer id `{id}`"))),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.affine.apply(self.kind.eval(y))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(&'static str, f64)] {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn declared_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn bounded(&self) -> bool {
        self.bounded
    }

    pub fn lipschitz(&self) -> bool {
        self.lipschitz
    }

    /// Cumulative map applied by normalization; identity for raw trimmers.
    pub fn affine(&self) -> AffineMap {
        self.affine
    }

    pub fn is_normalized(&self) -> bool {
        self.bounded && self.range.0 >= 0.0 && self.range.1 <= 1.0
    }

    pub fn has_negative_values(&self) -> bool {
        self.range.0 < 0.0
    }
}

/// Rescales a bounded trimmer with range `[a, b]` to `(t − a)/(b − a)`.
///
/// Trimmers whose range is exactly `[0, 1]` are returned unchanged.
pub fn normalize_trimmer(t: &TrimmingFunction) -> Result<TrimmingFunction> {
    if !t.bounded {
        return Err(Error::UnboundedTrimmer(t.to_string()));
    }
    let (a, b) = t.range;
    if a == 0.0 && b == 1.0 {
        return Ok(t.clone());
    }
    if !(b > a) {
        return Err(Error::Domain(format!("trimmer `{t}` has degenerate range [{a}, {b}]")));
    }
    let step = AffineMap { scale: 1.0 / (b - a), shift: -a / (b - a) };
    let mut out = t.clone();
    out.affine = step.compose(&t.affine);
    out.range = (0.0, 1.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> impl Iterator<Item = f64> {
        (0..=200_000).map(|i| {
            let u = i as f64 / 200_000.0;
            // dense near zero, reaching y = 1e4
            1e4 * u.powi(4)
        })
    }

    #[test]
    fn builtin_ranges_by_grid_scan() {
        for t in [TrimmingFunction::mm(3.0).unwrap(), TrimmingFunction::lal(3.0).unwrap()] {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in grid() {
                let v = t.eval(y);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert_eq!(lo, 0.0);
            assert!((hi - 1.0).abs() < 1e-6, "{t}: sup {hi}");
            assert!(hi <= 1.0);
        }
        let t = TrimmingFunction::opt_eps(3.0, 0.1).unwrap();
        let (a, b) = t.declared_range();
        assert_eq!(t.eval(0.0), a);
        assert!((a - (-9.0)).abs() < 1e-12);
        let hi = grid().map(|y| t.eval(y)).fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - b).abs() < 1e-6 && hi <= b);
    }

    #[test]
    fn normalize_identity_when_already_unit() {
        let t = TrimmingFunction::mm(2.0).unwrap();
        let n = normalize_trimmer(&t).unwrap();
        assert_eq!(n.affine(), AffineMap::IDENTITY);
        assert_eq!(n, t);
    }

    #[test]
    fn normalize_recovers_affine_image() {
        let base = TrimmingFunction::mm(3.0).unwrap();
        let mut shifted = base.clone();
        shifted.affine = AffineMap { scale: 2.0, shift: 3.0 };
        shifted.range = (3.0, 5.0);
        let n = normalize_trimmer(&shifted).unwrap();
        assert_eq!(n.declared_range(), (0.0, 1.0));
        for y in [0.0, 0.1, 0.7, 3.0, 40.0] {
            assert!((n.eval(y) - base.eval(y)).abs() < 1e-15);
        }
        let m = n.affine();
        assert!((m.invert(m.apply(4.2)) - 4.2).abs() < 1e-15);
    }

    #[test]
    fn normalize_opt_eps_is_shifted_ratio() {
        let eps = 0.05;
        let n = normalize_trimmer(&TrimmingFunction::opt_eps(4.0, eps).unwrap()).unwrap();
        for y in [0.0, 0.01, 0.3, 1.0, 9.0] {
            let s = 4.0 * y * y;
            assert!((n.eval(y) - s / (s + eps)).abs() < 1e-13);
        }
    }

    #[test]
    fn unbounded_rejected() {
        let t = TrimmingFunction::opt(3.0).unwrap();
        assert!(matches!(normalize_trimmer(&t), Err(Error::UnboundedTrimmer(_))));
    }

    #[test]
    fn invalid_delta_rejected() {
        assert!(TrimmingFunction::mm(1.0).is_err());
        assert!(TrimmingFunction::lal(f64::NAN).is_err());
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let t = Table::parse_csv("y,t\n0,0\n1,0.5\n2,1\n").unwrap();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(0.5), 0.25);
        assert_eq!(t.eval(1.5), 0.75);
        assert_eq!(t.eval(7.0), 1.0);
        let f = TrimmingFunction::table("user", t);
        assert_eq!(f.declared_range(), (0.0, 1.0));
        assert!(Table::parse_csv("0,1\n0,2\n").is_err());
        assert!(Table::parse_csv("0,1\nx,2\n").is_err());
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(TrimmingFunction::from_id("lal", 2.0, None).unwrap().name(), "lal");
        assert_eq!(TrimmingFunction::from_id("opt-eps", 2.0, Some(0.3)).unwrap().param("eps"), Some(0.3));
        assert!(TrimmingFunction::from_id("nope", 2.0, None).is_err());
    }
}
