//! Truncated Taylor-Fourier series with Chebyshev-tabulated coefficients.
//!
//! A series is a sum of `c(I, y, x) e^{i k.phi} p^h q^j`. Every coefficient
//! `c` is stored by its values on one tensor Lobatto grid over the box
//! (actions first, then `y`, then `x`; `x` varies fastest).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cheb::{self, Mat};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Modes whose sup falls below this fraction of the largest one are dropped
/// after sampling.
pub const PRUNE_REL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub n_angles: usize,
    pub m_pq: usize,
    pub fourier_cutoff: i32,
    pub pq_degree: u32,
    pub nodes: usize,
    /// intervals of the actions, then `y`, then `x`
    pub boxes: Vec<(f64, f64)>,
}

impl Shape {
    pub fn new(n_angles: usize, m_pq: usize, fourier_cutoff: i32, pq_degree: u32, nodes: usize, boxes: Vec<(f64, f64)>) -> Result<Self> {
        let s = Self { n_angles, m_pq, fourier_cutoff, pq_degree, nodes, boxes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boxes.len() != self.n_angles + 2 {
            return Err(Error::arg("boxes", format!("need {} intervals", self.n_angles + 2)));
        }
        if self.boxes.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::arg("boxes", "every interval needs lo < hi"));
        }
        if self.nodes < 4 {
            return Err(Error::arg("nodes", "need at least 4 grid nodes"));
        }
        if self.fourier_cutoff < 0 {
            return Err(Error::arg("fourier_cutoff", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.n_angles + 2
    }

    pub fn y_axis(&self) -> usize {
        self.n_angles
    }

    pub fn x_axis(&self) -> usize {
        self.n_angles + 1
    }

    pub fn grid_shape(&self) -> Vec<usize> {
        vec![self.nodes; self.dims()]
    }

    pub fn grid_len(&self) -> usize {
        self.nodes.pow(self.dims() as u32)
    }

    /// Coordinates of the flat grid index.
    pub fn grid_point(&self, mut flat: usize) -> Vec<f64> {
        let n = self.nodes;
        let mut idx = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            idx[d] = flat % n;
            flat /= n;
        }
        let t = cheb::lobatto(n);
        idx.iter().zip(&self.boxes).map(|(&i, &(a, b))| 0.5 * (a + b) + 0.5 * (b - a) * t[i]).collect()
    }

    pub fn admits(&self, key: &ModeKey) -> bool {
        key.k.len() == self.n_angles
            && key.h.len() == self.m_pq
            && key.j.len() == self.m_pq
            && key.k.iter().all(|k| k.abs() <= self.fourier_cutoff)
            && key.degree() <= self.pq_degree
    }

    pub fn check_compatible(&self, o: &Shape) -> Result<()> {
        if self != o {
            return Err(Error::Shape(format!("{self:?} vs {o:?}")));
        }
        Ok(())
    }

    fn all_keys(&self) -> Vec<ModeKey> {
        let ks = k_vectors(self.n_angles, self.fourier_cutoff);
        let pq = pq_monomials(self.m_pq, self.pq_degree);
        let mut out = Vec::with_capacity(ks.len() * pq.len());
        for k in &ks {
            for (h, j) in &pq {
                out.push(ModeKey { k: k.clone(), h: h.clone(), j: j.clone() });
            }
        }
        out
    }
}

fn k_vectors(n: usize, cut: i32) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-cut..=cut).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out
}

fn exponent_vectors(len: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v: Vec<u32>| {
                let used: u32 = v.iter().sum();
                (0..=max_total - used).map(move |e| {
                    let mut w = v.clone();
                    w.push(e);
                    w
                })
            })
            .collect();
    }
    out
}

fn pq_monomials(m: usize, deg: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    exponent_vectors(2 * m, deg).into_iter().map(|v| (v[..m].to_vec(), v[m..].to_vec())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeKey {
    pub k: Vec<i32>,
    pub h: Vec<u32>,
    pub j: Vec<u32>,
}

impl ModeKey {
    pub fn zero(shape: &Shape) -> Self {
        Self { k: vec![0; shape.n_angles], h: vec![0; shape.m_pq], j: vec![0; shape.m_pq] }
    }

    pub fn degree(&self) -> u32 {
        self.h.iter().sum::<u32>() + self.j.iter().sum::<u32>()
    }

    pub fn k_norm(&self) -> i32 {
        self.k.iter().map(|k| k.abs()).sum()
    }

    /// Normal class: no angle dependence and `h = j`.
    pub fn is_average(&self) -> bool {
        self.k.iter().all(|&k| k == 0) && self.h == self.j
    }

    fn combine(&self, o: &ModeKey) -> ModeKey {
        ModeKey {
            k: self.k.iter().zip(&o.k).map(|(a, b)| a + b).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| a + b).collect(),
            j: self.j.iter().zip(&o.j).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Point handed to a sampling closure.
#[derive(Debug, Clone, Copy)]
pub struct SamplePoint<'a> {
    pub actions: &'a [f64],
    pub angles: &'a [f64],
    pub p: &'a [Complex64],
    pub q: &'a [Complex64],
    pub y: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TFSeries {
    shape: Shape,
    modes: BTreeMap<ModeKey, Vec<Complex64>>,
}

impl TFSeries {
    pub fn zero(shape: &Shape) -> Self {
        Self { shape: shape.clone(), modes: BTreeMap::new() }
    }

    pub fn from_modes(shape: &Shape, modes: impl IntoIterator<Item = (ModeKey, Vec<Complex64>)>) -> Result<Self> {
        shape.validate()?;
        let mut s = Self::zero(shape);
        for (key, vals) in modes {
            if !shape.admits(&key) {
                return Err(Error::Shape(format!("mode {key:?} outside the truncation")));
            }
            if vals.len() != shape.grid_len() {
                return Err(Error::Shape(format!("mode {key:?} has {} values, grid has {}", vals.len(), shape.grid_len())));
            }
            s.accumulate(key, &vals, Complex64::new(1.0, 0.0));
        }
        Ok(s)
    }

    /// A function of `(I, y, x)` only.
    pub fn from_grid_fn(shape: &Shape, f: impl Fn(&[f64], f64, f64) -> f64) -> Result<Self> {
        shape.validate()?;
        let na = shape.n_angles;
        let vals: Vec<Complex64> = (0..shape.grid_len())
            .map(|i| {
                let pt = shape.grid_point(i);
                Complex64::new(f(&pt[..na], pt[na], pt[na + 1]), 0.0)
            })
            .collect();
        Self::from_modes(shape, [(ModeKey::zero(shape), vals)])
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeKey, &[Complex64])> {
        self.modes.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn mode(&self, key: &ModeKey) -> Option<&[Complex64]> {
        self.modes.get(key).map(|v| v.as_slice())
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.values().all(|v| v.iter().all(|c| *c == ZERO))
    }

    /// Largest absolute value over all modes and grid nodes.
    pub fn max_abs(&self) -> f64 {
        self.modes.values().flat_map(|v| v.iter().map(|c| c.norm())).fold(0.0, f64::max)
    }

    fn accumulate(&mut self, key: ModeKey, vals: &[Complex64], factor: Complex64) {
        let e = self.modes.entry(key).or_insert_with(|| vec![ZERO; vals.len()]);
        for (d, s) in e.iter_mut().zip(vals) {
            *d += factor * s;
        }
    }

    pub fn axpy(&self, a: Complex64, o: &TFSeries) -> Result<TFSeries> {
        self.shape.check_compatible(&o.shape)?;
        let mut out = self.clone();
        for (k, v) in &o.modes {
            out.accumulate(k.clone(), v, a);
        }
        Ok(out)
    }

    pub fn add(&self, o: &TFSeries) -> Result<TFSeries> {
        self.axpy(Complex64::new(1.0, 0.0), o)
    }

    pub fn sub(&self, o: &TFSeries) -> Result<TFSeries> {
        self.axpy(Complex64::new(-1.0, 0.0), o)
    }

    pub fn scale(&self, a: Complex64) -> TFSeries {
        let mut out = self.clone();
        out.modes.values_mut().for_each(|v| v.iter_mut().for_each(|c| *c *= a));
        out
    }

    /// Map every coefficient grid; keys are kept.
    fn map_modes(&self, f: impl Fn(&ModeKey, &[Complex64]) -> Option<(ModeKey, Vec<Complex64>)>) -> TFSeries {
        let mut out = TFSeries::zero(&self.shape);
        for (k, v) in &self.modes {
            if let Some((nk, nv)) = f(k, v) {
                out.accumulate(nk, &nv, Complex64::new(1.0, 0.0));
            }
        }
        out
    }

    pub fn d_action(&self, a: usize) -> TFSeries {
        self.d_axis(a)
    }

    pub fn d_y(&self) -> TFSeries {
        self.d_axis(self.shape.y_axis())
    }

    pub fn d_x(&self) -> TFSeries {
        self.d_axis(self.shape.x_axis())
    }

    fn d_axis(&self, axis: usize) -> TFSeries {
        let d = cheb::diff(self.shape.nodes, self.shape.boxes[axis]);
        let gs = self.shape.grid_shape();
        self.map_modes(|k, v| Some((k.clone(), cheb::diff_axis(v, &gs, axis, &d))))
    }

    pub fn d_angle(&self, a: usize) -> TFSeries {
        self.map_modes(|k, v| {
            (k.k[a] != 0).then(|| {
                let f = Complex64::new(0.0, k.k[a] as f64);
                (k.clone(), v.iter().map(|c| f * c).collect())
            })
        })
    }

    pub fn d_p(&self, i: usize) -> TFSeries {
        self.map_modes(|k, v| {
            (k.h[i] > 0).then(|| {
                let mut nk = k.clone();
                nk.h[i] -= 1;
                let f = k.h[i] as f64;
                (nk, v.iter().map(|c| f * c).collect())
            })
        })
    }

    pub fn d_q(&self, i: usize) -> TFSeries {
        self.map_modes(|k, v| {
            (k.j[i] > 0).then(|| {
                let mut nk = k.clone();
                nk.j[i] -= 1;
                let f = k.j[i] as f64;
                (nk, v.iter().map(|c| f * c).collect())
            })
        })
    }

    /// Evaluate at one point; angles real, `p`, `q` complex.
    pub fn eval(&self, actions: &[f64], angles: &[f64], p: &[Complex64], q: &[Complex64], y: f64, x: f64) -> Complex64 {
        let sh = &self.shape;
        let coords: Vec<f64> = actions.iter().copied().chain([y, x]).collect();
        let rows: Vec<Vec<f64>> =
            coords.iter().zip(&sh.boxes).map(|(&c, &bx)| cheb::bary_row(sh.nodes, cheb::to_reference(c, bx))).collect();
        let mut total = ZERO;
        for (key, vals) in &self.modes {
            let mut cur = vals.clone();
            let mut gs = sh.grid_shape();
            for (ax, row) in rows.iter().enumerate().rev() {
                let m = Mat { rows: 1, cols: sh.nodes, data: row.clone() };
                let (v, s) = cheb::apply_axis(&cur, &gs, ax, &m);
                cur = v;
                gs = s;
            }
            let phase: f64 = key.k.iter().zip(angles).map(|(&k, &a)| k as f64 * a).sum();
            let mut mono = Complex64::from_polar(1.0, phase);
            for (i, &e) in key.h.iter().enumerate() {
                mono *= p[i].powu(e);
            }
            for (i, &e) in key.j.iter().enumerate() {
                mono *= q[i].powu(e);
            }
            total += cur[0] * mono;
        }
        total
    }

    /// Drop modes that are exactly zero.
    pub fn pruned(mut self) -> TFSeries {
        self.modes.retain(|_, v| v.iter().any(|c| *c != ZERO));
        self
    }

    pub fn to_json(&self) -> String {
        let doc = SeriesDoc {
            format: FORMAT_TAG.to_string(),
            grid_order: GRID_ORDER.to_string(),
            shape: self.shape.clone(),
            modes: self
                .modes
                .iter()
                .map(|(k, v)| ModeDoc {
                    k: k.k.clone(),
                    h: k.h.clone(),
                    j: k.j.clone(),
                    re: v.iter().map(|c| c.re).collect(),
                    im: v.iter().map(|c| c.im).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("series document serializes")
    }

    pub fn from_json(text: &str) -> Result<TFSeries> {
        let doc: SeriesDoc = serde_json::from_str(text).map_err(|e| Error::Shape(format!("bad series document: {e}")))?;
        if doc.format != FORMAT_TAG {
            return Err(Error::Shape(format!("unknown format tag {}", doc.format)));
        }
        let modes = doc
            .modes
            .into_iter()
            .map(|m| {
                if m.re.len() != m.im.len() {
                    return Err(Error::Shape("re/im length mismatch".into()));
                }
                let vals = m.re.iter().zip(&m.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
                Ok((ModeKey { k: m.k, h: m.h, j: m.j }, vals))
            })
            .collect::<Result<Vec<_>>>()?;
        TFSeries::from_modes(&doc.shape, modes)
    }
}

const FORMAT_TAG: &str = "tfseries/1";
const GRID_ORDER: &str = "row-major over (actions..., y, x), x fastest, Lobatto nodes cos(pi i/(n-1))";

#[derive(Serialize, Deserialize)]
struct SeriesDoc {
    format: String,
    grid_order: String,
    shape: Shape,
    modes: Vec<ModeDoc>,
}

#[derive(Serialize, Deserialize)]
struct ModeDoc {
    k: Vec<i32>,
    h: Vec<u32>,
    j: Vec<u32>,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Sample `f` on the grid, Fourier-transform in the angles and extract the
/// `(p, q)` Taylor coefficients from samples on the unit torus.
pub fn tf_build<F>(shape: &Shape, f: F) -> Result<TFSeries>
where
    F: Fn(&SamplePoint) -> Result<Complex64> + Sync,
{
    shape.validate()?;
    let na = shape.n_angles;
    let m = shape.m_pq;
    let cut = shape.fourier_cutoff;
    let n_ang = if na == 0 || cut == 0 { 1 } else { (4 * cut as usize).max(2 * cut as usize + 1) };
    let n_pq = shape.pq_degree as usize + 1;
    let ang_samples: Vec<Vec<f64>> =
        index_vectors(na, n_ang).into_iter().map(|iv| iv.iter().map(|&i| 2.0 * PI * i as f64 / n_ang as f64).collect()).collect();
    let pq_samples: Vec<Vec<f64>> =
        index_vectors(2 * m, n_pq).into_iter().map(|iv| iv.iter().map(|&i| 2.0 * PI * i as f64 / n_pq as f64).collect()).collect();
    let keys = shape.all_keys();
    let norm = 1.0 / (ang_samples.len() * pq_samples.len()) as f64;

    let per_node: Vec<Vec<Complex64>> = (0..shape.grid_len())
        .into_par_iter()
        .map(|flat| {
            let pt = shape.grid_point(flat);
            let mut samples = Vec::with_capacity(ang_samples.len() * pq_samples.len());
            for ang in &ang_samples {
                for th in &pq_samples {
                    let p: Vec<Complex64> = th[..m].iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
                    let q: Vec<Complex64> = th[m..].iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
                    let sp = SamplePoint { actions: &pt[..na], angles: ang, p: &p, q: &q, y: pt[na], x: pt[na + 1] };
                    let v = f(&sp)?;
                    if !v.is_finite() {
                        return Err(Error::Domain(format!("evaluator returned {v} at {pt:?}")));
                    }
                    samples.push(v);
                }
            }
            Ok(keys
                .iter()
                .map(|key| {
                    let mut acc = ZERO;
                    for (ia, ang) in ang_samples.iter().enumerate() {
                        let pa: f64 = key.k.iter().zip(ang).map(|(&k, &a)| k as f64 * a).sum();
                        for (ib, th) in pq_samples.iter().enumerate() {
                            let pb: f64 = key.h.iter().chain(&key.j).zip(th).map(|(&e, &t)| e as f64 * t).sum();
                            acc += samples[ia * pq_samples.len() + ib] * Complex64::from_polar(1.0, -(pa + pb));
                        }
                    }
                    acc * norm
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let sup: Vec<f64> = (0..keys.len()).map(|i| per_node.iter().map(|v| v[i].norm()).fold(0.0, f64::max)).collect();
    let top = sup.iter().copied().fold(0.0, f64::max);
    let mut out = TFSeries::zero(shape);
    for (i, key) in keys.into_iter().enumerate() {
        if sup[i] > PRUNE_REL * top {
            out.modes.insert(key, per_node.iter().map(|v| v[i]).collect());
        }
    }
    Ok(out)
}

fn index_vectors(len: usize, base: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                (0..base).map(move |i| {
                    let mut w = v.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    out
}

/// Split into the normal class and the rest.
pub fn tf_average_split(f: &TFSeries) -> (TFSeries, TFSeries) {
    let mut avg = TFSeries::zero(&f.shape);
    let mut osc = TFSeries::zero(&f.shape);
    for (k, v) in &f.modes {
        let dst = if k.is_average() { &mut avg } else { &mut osc };
        dst.modes.insert(k.clone(), v.clone());
    }
    (avg, osc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWeights {
    /// width in the actions
    pub rho: f64,
    /// width in the angles
    pub s: f64,
    /// radius in (p, q)
    pub delta: f64,
    /// width in y
    pub r: f64,
    /// width in x
    pub xi: f64,
}

impl NormWeights {
    pub fn new(rho: f64, s: f64, delta: f64, r: f64, xi: f64) -> Result<Self> {
        let w = Self { rho, s, delta, r, xi };
        if [rho, s, delta, r, xi].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::arg("weights", "all widths must be positive"));
        }
        Ok(w)
    }
}

/// Weighted norm with the real-grid sup standing in for the complex sup.
pub fn tf_norm(f: &TFSeries, w: &NormWeights) -> f64 {
    f.modes
        .iter()
        .map(|(k, v)| {
            let sup = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
            sup * (w.s * k.k_norm() as f64).exp() * w.delta.powi(k.degree() as i32)
        })
        .sum()
}

/// Same weights, but each coefficient is continued to the complex points
/// `node +- i width` along every axis.
pub fn tf_norm_complex(f: &TFSeries, w: &NormWeights) -> f64 {
    let sh = &f.shape;
    let n = sh.nodes;
    let to_coef = cheb::values_to_coeffs(n);
    let gs = sh.grid_shape();
    let t = cheb::lobatto(n);
    let widths: Vec<f64> = (0..sh.dims())
        .map(|ax| {
            let width = if ax < sh.n_angles {
                w.rho
            } else if ax == sh.y_axis() {
                w.r
            } else {
                w.xi
            };
            2.0 * width / (sh.boxes[ax].1 - sh.boxes[ax].0)
        })
        .collect();
    f.modes
        .iter()
        .map(|(k, v)| {
            let coef = cheb::apply_all(v, &gs, &to_coef);
            let mut cur = coef;
            let mut shape = gs.clone();
            for (ax, &wr) in widths.iter().enumerate() {
                let pts: Vec<Complex64> = t.iter().flat_map(|&ti| [Complex64::new(ti, wr), Complex64::new(ti, -wr)]).collect();
                let (nv, ns) = apply_axis_complex(&cur, &shape, ax, &pts);
                cur = nv;
                shape = ns;
            }
            let sup = cur.iter().map(|c| c.norm()).fold(0.0, f64::max);
            sup * (w.s * k.k_norm() as f64).exp() * w.delta.powi(k.degree() as i32)
        })
        .sum()
}

/// Evaluate Chebyshev coefficient tensors at complex reference points along
/// one axis.
fn apply_axis_complex(data: &[Complex64], shape: &[usize], axis: usize, pts: &[Complex64]) -> (Vec<Complex64>, Vec<usize>) {
    let len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    // T_k(z) table
    let tk: Vec<Vec<Complex64>> = pts
        .iter()
        .map(|&z| {
            let mut row = vec![Complex64::new(1.0, 0.0); len];
            if len > 1 {
                row[1] = z;
            }
            for k in 2..len {
                row[k] = 2.0 * z * row[k - 1] - row[k - 2];
            }
            row
        })
        .collect();
    let rows = pts.len();
    let mut out = vec![ZERO; outer * rows * inner];
    for o in 0..outer {
        for (r, trow) in tk.iter().enumerate() {
            for k in 0..len {
                let a = trow[k];
                for i in 0..inner {
                    out[(o * rows + r) * inner + i] += a * data[(o * len + k) * inner + i];
                }
            }
        }
    }
    let mut ns = shape.to_vec();
    ns[axis] = rows;
    (out, ns)
}

/// `sum_i sign_i * a_i * b_i`, with de-aliased products: each factor is
/// resampled on a 3/2-finer grid, multiplied there and projected back.
pub fn mul_sum(terms: &[(&TFSeries, &TFSeries, f64)]) -> Result<TFSeries> {
    let Some(first) = terms.first() else {
        return Err(Error::Shape("empty product list".into()));
    };
    let shape = first.0.shape.clone();
    for (a, b, _) in terms {
        shape.check_compatible(&a.shape)?;
        shape.check_compatible(&b.shape)?;
    }
    let n = shape.nodes;
    let m = (3 * n).div_ceil(2);
    let up = cheb::resample(n, m);
    let down = cheb::project(m, n);
    let gs = shape.grid_shape();
    let pad = |s: &TFSeries| -> Vec<(ModeKey, Vec<Complex64>)> {
        s.modes.par_iter().map(|(k, v)| (k.clone(), cheb::apply_all(v, &gs, &up))).collect()
    };
    let mut acc: BTreeMap<ModeKey, Vec<Complex64>> = BTreeMap::new();
    let fine_len = m.pow(shape.dims() as u32);
    for (a, b, sign) in terms {
        if a.modes.is_empty() || b.modes.is_empty() {
            continue;
        }
        let (pa, pb) = (pad(a), pad(b));
        for (ka, va) in &pa {
            for (kb, vb) in &pb {
                let key = ka.combine(kb);
                if !shape.admits(&key) {
                    continue;
                }
                let dst = acc.entry(key).or_insert_with(|| vec![ZERO; fine_len]);
                for ((d, x), y) in dst.iter_mut().zip(va).zip(vb) {
                    *d += *sign * x * y;
                }
            }
        }
    }
    let fine_shape = vec![m; shape.dims()];
    let modes: Vec<(ModeKey, Vec<Complex64>)> = acc.into_par_iter().map(|(k, v)| (k, cheb::apply_all(&v, &fine_shape, &down))).collect();
    let mut out = TFSeries::zero(&shape);
    out.modes.extend(modes);
    Ok(out)
}
