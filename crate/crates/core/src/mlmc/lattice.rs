//! Regular evaluation lattices, CDF fields stored on them, and per-axis
//! marginals with monotone inverses.

use std::io::{Read, Write};

use crate::bench::csvio::fmt_f64;
use crate::error::{Error, Result};

/// Equally spaced nodes `lo, lo + delta, ..., hi` along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisGrid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl AxisGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "axis needs lo < hi and at least two nodes (lo={lo}, hi={hi}, n={n})"
            )));
        }
        Ok(AxisGrid { lo, hi, n })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        if m + 1 == self.n {
            self.hi
        } else {
            self.lo + m as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|m| self.node(m))
    }
}

/// Tensor product of axis grids. Flat storage is row-major: the last axis
/// varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    axes: Vec<AxisGrid>,
    strides: Vec<usize>,
}

impl Lattice {
    /// One `(lo, hi, nodes)` triple per axis.
    pub fn new(spec: Vec<(f64, f64, usize)>) -> Result<Self> {
        let axes = spec
            .into_iter()
            .map(|(lo, hi, n)| AxisGrid::new(lo, hi, n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_axes(axes)
    }

    pub fn from_axes(axes: Vec<AxisGrid>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("lattice needs at least one axis".into()));
        }
        let mut strides = vec![1; axes.len()];
        for j in (0..axes.len() - 1).rev() {
            strides[j] = strides[j + 1] * axes[j + 1].len();
        }
        Ok(Lattice { axes, strides })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, j: usize) -> &AxisGrid {
        &self.axes[j]
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.strides[0] * self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.spacing()).collect()
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    /// Multi-indices in flat storage order.
    pub fn node_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(|f| self.multi_index(f))
    }

    pub fn node(&self, m: &[usize]) -> Vec<f64> {
        m.iter().zip(&self.axes).map(|(&i, a)| a.node(i)).collect()
    }

    /// True when `x` lies inside the lattice hull.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.axes).all(|(&v, a)| v >= a.lo && v <= a.hi)
    }
}

/// A real field on lattice nodes, usually a (possibly unadjusted) CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeCdf {
    lattice: Lattice,
    values: Vec<f64>,
    adjusted: bool,
}

impl LatticeCdf {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                got: values.len(),
            });
        }
        Ok(LatticeCdf {
            lattice,
            values,
            adjusted: false,
        })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        let n = lattice.len();
        LatticeCdf {
            lattice,
            values: vec![0.0; n],
            adjusted: false,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, m: &[usize]) -> f64 {
        self.values[self.lattice.flat_index(m)]
    }

    /// Whether the values have passed through [`monotonicity_adjust`].
    pub fn is_adjusted(&self) -> bool {
        self.adjusted
    }

    /// `self + scale * other`, node by node.
    pub fn add_scaled(&self, other: &LatticeCdf, scale: f64) -> Result<LatticeCdf> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + scale * b).collect();
        LatticeCdf::new(self.lattice.clone(), values)
    }

    /// Largest absolute node difference.
    pub fn sup_distance(&self, other: &LatticeCdf) -> Result<f64> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// The slice through the top node of every other axis.
    pub fn marginal(&self, j: usize) -> MarginalCdf {
        let top: Vec<usize> = self.lattice.shape().iter().map(|n| n - 1).collect();
        let axis = self.lattice.axis(j);
        let mut m = top;
        let values = (0..axis.len())
            .map(|i| {
                m[j] = i;
                self.value(&m)
            })
            .collect();
        MarginalCdf::from_parts(j, *axis, values)
    }

    pub fn marginals(&self) -> Vec<MarginalCdf> {
        (0..self.lattice.dim()).map(|j| self.marginal(j)).collect()
    }

    /// Writes one row per node: coordinates then value.
    pub fn write_csv<W: Write>(&self, writer: W, names: &[String]) -> Result<()> {
        if names.len() != self.lattice.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.dim(),
                got: names.len(),
            });
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = names.to_vec();
        header.push("value".into());
        w.write_record(&header)?;
        for (f, v) in self.values.iter().enumerate() {
            let m = self.lattice.multi_index(f);
            let mut row: Vec<String> = self.lattice.node(&m).into_iter().map(fmt_f64).collect();
            row.push(fmt_f64(*v));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`LatticeCdf::write_csv`]; returns the field and the axis names.
    pub fn read_csv<R: Read>(reader: R) -> Result<(LatticeCdf, Vec<String>)> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(Error::Parse("lattice csv needs coordinates and a value column".into()));
        }
        let k = header.len() - 1;
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != k + 1 {
                return Err(Error::Parse("ragged lattice csv".into()));
            }
            values.push(row[k]);
            coords.push(row[..k].to_vec());
        }
        if coords.is_empty() {
            return Err(Error::Parse("empty lattice csv".into()));
        }
        let mut spec = Vec::with_capacity(k);
        for j in 0..k {
            let lo = coords.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min);
            let hi = coords.iter().map(|c| c[j]).fold(f64::NEG_INFINITY, f64::max);
            let mut distinct: Vec<f64> = coords.iter().map(|c| c[j]).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            spec.push((lo, hi, distinct.len()));
        }
        let lattice = Lattice::new(spec)?;
        // Rows may come in any order; place each by its coordinates.
        let mut placed = vec![f64::NAN; lattice.len()];
        for (c, v) in coords.iter().zip(values) {
            let m: Vec<usize> = c
                .iter()
                .zip(lattice.axes())
                .map(|(&x, a)| ((x - a.lo()) / a.spacing()).round() as usize)
                .collect();
            placed[lattice.flat_index(&m)] = v;
        }
        if placed.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("lattice csv does not cover every node".into()));
        }
        Ok((LatticeCdf::new(lattice, placed)?, header[..k].to_vec()))
    }
}

/// Clamps to [0, 1], then takes a running maximum along each axis in turn.
pub fn monotonicity_adjust(cdf: &LatticeCdf) -> LatticeCdf {
    let lattice = cdf.lattice.clone();
    let mut v: Vec<f64> = cdf.values.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let shape = lattice.shape();
    for (j, &n) in shape.iter().enumerate() {
        let stride = lattice.strides()[j];
        for f in 0..v.len() {
            // Visit every node with a nonzero index on axis j, in flat order,
            // so the predecessor along j is already final.
            if (f / stride) % n != 0 && v[f - stride] > v[f] {
                v[f] = v[f - stride];
            }
        }
    }
    LatticeCdf {
        lattice,
        values: v,
        adjusted: true,
    }
}

/// A one-dimensional CDF tabulated on an axis grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalCdf {
    axis: usize,
    grid: AxisGrid,
    values: Vec<f64>,
}

impl MarginalCdf {
    /// Clamps to [0, 1] and enforces monotonicity with a running maximum.
    pub fn new(axis: usize, grid: AxisGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self::from_parts(axis, grid, values))
    }

    fn from_parts(axis: usize, grid: AxisGrid, mut values: Vec<f64>) -> Self {
        let mut run = 0.0f64;
        for v in values.iter_mut() {
            run = run.max(v.clamp(0.0, 1.0));
            *v = run;
        }
        MarginalCdf { axis, grid, values }
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn grid(&self) -> &AxisGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when the marginal carries no probability increase at all.
    pub fn is_constant(&self) -> bool {
        self.values[0] == self.values[self.values.len() - 1]
    }

    /// Linear interpolation between nodes, constant outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= g.lo() {
            return self.values[0];
        }
        if x >= g.hi() {
            return self.values[g.len() - 1];
        }
        let t = (x - g.lo()) / g.spacing();
        let i = (t.floor() as usize).min(g.len() - 2);
        let w = (t - i as f64).clamp(0.0, 1.0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Inverse of the piecewise-linear interpolant. Flat stretches map to
    /// their leftmost abscissa; `p` outside the value range clamps to the end
    /// nodes.
    pub fn inverse(&self, p: f64) -> f64 {
        let g = &self.grid;
        let v = &self.values;
        if !(p > v[0]) {
            return g.lo();
        }
        if p > v[v.len() - 1] {
            return g.hi();
        }
        // Smallest m with v[m] >= p; m >= 1 since p > v[0].
        let m = v.partition_point(|&x| x < p);
        let (a, b) = (v[m - 1], v[m]);
        let w = (p - a) / (b - a);
        g.node(m - 1) + w * (g.node(m) - g.node(m - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(lo: f64, hi: f64, n: usize) -> AxisGrid {
        AxisGrid::new(lo, hi, n).unwrap()
    }

    #[test]
    fn lattice_indexing_round_trips() {
        let l = Lattice::new(vec![(0.0, 1.0, 3), (0.0, 2.0, 4), (-1.0, 1.0, 2)]).unwrap();
        assert_eq!(l.len(), 24);
        assert_eq!(l.strides(), &[8, 2, 1]);
        for (f, m) in l.node_indices().enumerate() {
            assert_eq!(l.flat_index(&m), f);
        }
        assert_eq!(l.node(&[1, 3, 0]), vec![0.5, 2.0, -1.0]);
    }

    #[test]
    fn bad_axes_are_rejected() {
        assert!(AxisGrid::new(0.0, 1.0, 1).is_err());
        assert!(AxisGrid::new(1.0, 1.0, 5).is_err());
        assert!(Lattice::new(vec![]).is_err());
    }

    #[test]
    fn adjust_examples() {
        let l = Lattice::new(vec![(0.0, 1.0, 3)]).unwrap();
        let c = LatticeCdf::new(l.clone(), vec![0.2, 0.1, 0.3]).unwrap();
        assert_eq!(monotonicity_adjust(&c).values(), &[0.2, 0.2, 0.3]);
        let c = LatticeCdf::new(l, vec![-0.05, 0.5, 1.05]).unwrap();
        let a = monotonicity_adjust(&c);
        assert_eq!(a.values(), &[0.0, 0.5, 1.0]);
        assert!(a.is_adjusted());
    }

    #[test]
    fn marginal_of_product_form() {
        let l = Lattice::new(vec![(0.0, 1.0, 5), (0.0, 1.0, 4)]).unwrap();
        let f1 = [0.0, 0.1, 0.5, 0.9, 1.0];
        let f2 = [0.2, 0.3, 0.7, 1.0];
        let vals = l.node_indices().map(|m| f1[m[0]] * f2[m[1]]).collect();
        let c = LatticeCdf::new(l, vals).unwrap();
        assert_eq!(c.marginal(0).values(), &f1);
        assert_eq!(c.marginal(1).values(), &f2);
    }

    #[test]
    fn inverse_examples() {
        let m = MarginalCdf::new(0, grid(0.0, 1.0, 2), vec![0.25, 1.0]).unwrap();
        assert!((m.inverse(0.625) - 0.5).abs() < 1e-15);
        assert_eq!(m.inverse(0.0), 0.0);
        assert_eq!(m.inverse(1.0), 1.0);

        let m = MarginalCdf::new(0, grid(0.0, 4.0, 5), vec![0.0, 0.2, 0.2, 0.7, 1.0]).unwrap();
        assert_eq!(m.inverse(0.7), 3.0);
        // Flat stretch: leftmost abscissa.
        assert_eq!(m.inverse(0.2), 1.0);
        assert_eq!(m.eval(1.5), 0.2);
        assert!((m.eval(2.5) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let l = Lattice::new(vec![(0.0, 0.06, 4), (0.0, 2.0, 3)]).unwrap();
        let vals: Vec<f64> = (0..12).map(|i| (i as f64 / 11.0).powf(1.7)).collect();
        let c = LatticeCdf::new(l, vals).unwrap();
        let names = vec!["beta".to_string(), "gamma".to_string()];
        let mut buf = Vec::new();
        c.write_csv(&mut buf, &names).unwrap();
        let (back, got_names) = LatticeCdf::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert_eq!(got_names, names);
    }

    fn field() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
        prop::collection::vec(2usize..5, 1..4).prop_flat_map(|shape| {
            let n: usize = shape.iter().product();
            (Just(shape), prop::collection::vec(-0.2f64..1.2, n))
        })
    }

    fn build(shape: &[usize], vals: Vec<f64>) -> LatticeCdf {
        let l = Lattice::new(shape.iter().map(|&n| (0.0, 1.0, n)).collect()).unwrap();
        LatticeCdf::new(l, vals).unwrap()
    }

    proptest! {
        #[test]
        fn adjust_is_monotone_idempotent_and_never_lowers((shape, vals) in field()) {
            let c = build(&shape, vals);
            let a = monotonicity_adjust(&c);
            let l = a.lattice();
            for (f, m) in l.node_indices().enumerate() {
                let v = a.values()[f];
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(v >= c.values()[f].clamp(0.0, 1.0));
                for j in 0..l.dim() {
                    if m[j] > 0 {
                        let mut p = m.clone();
                        p[j] -= 1;
                        prop_assert!(a.value(&p) <= v);
                    }
                }
            }
            let again = monotonicity_adjust(&a);
            prop_assert_eq!(again.values(), a.values());
        }

        #[test]
        fn marginals_are_monotone_and_end_at_corner((shape, vals) in field()) {
            let a = monotonicity_adjust(&build(&shape, vals));
            let corner = *a.values().last().unwrap();
            for m in a.marginals() {
                prop_assert!(m.values().windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(*m.values().last().unwrap(), corner);
            }
        }

        #[test]
        fn inverse_is_monotone(vals in prop::collection::vec(0.0f64..1.0, 2..12), p in 0.0f64..1.0, q in 0.0f64..1.0) {
            let n = vals.len();
            let m = MarginalCdf::new(0, grid(-1.0, 3.0, n), vals).unwrap();
            let (p, q) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(m.inverse(p) <= m.inverse(q));
            let x = m.inverse(p);
            prop_assert!((-1.0..=3.0).contains(&x));
        }
    }
}
