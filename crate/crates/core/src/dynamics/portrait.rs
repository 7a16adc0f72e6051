//! Level sets and critical points of the integral `E(G, g)` on the cylinder.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{e_hat, e_hat_gradient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Center,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// `(g, G)`
    pub location: (f64, f64),
    pub kind: EquilibriumKind,
    pub eigenvalues: (Complex64, Complex64),
}

/// Second derivatives `(E_gg, E_gG, E_GG)`.
fn hessian(eps: f64, lambda: f64, big_g: f64, g: f64) -> (f64, f64, f64) {
    let s = big_g / lambda;
    let w = (1.0 - s * s).sqrt();
    let (sg, cg) = g.sin_cos();
    let e_gg = -w * cg;
    let e_g_gg = s / (lambda * w) * sg;
    let e_gg_gg = (-cg / (w * w * w) + 2.0 * eps) / (lambda * lambda);
    (e_gg, e_g_gg, e_gg_gg)
}

fn wrap(g: f64) -> f64 {
    let w = (g + PI).rem_euclid(TAU) - PI;
    if w <= -PI + 1e-12 {
        PI
    } else {
        w
    }
}

/// Linearization of `g' = E_G`, `G' = -E_g`.
fn classify(eps: f64, lambda: f64, big_g: f64, g: f64) -> (EquilibriumKind, (Complex64, Complex64)) {
    let (e_gg, e_mixed, e_big) = hessian(eps, lambda, big_g, g);
    // trace is zero, so the eigenvalues are +-sqrt(-det)
    let det = e_gg * e_big - e_mixed * e_mixed;
    if det > 0.0 {
        let w = det.sqrt();
        (EquilibriumKind::Center, (Complex64::new(0.0, w), Complex64::new(0.0, -w)))
    } else {
        let w = (-det).sqrt();
        (EquilibriumKind::Saddle, (Complex64::new(w, 0.0), Complex64::new(-w, 0.0)))
    }
}

/// Critical points of `E` by Newton's method seeded from a grid.
pub fn find_equilibria(eps: f64, lambda: f64, grid_n: usize) -> Result<Vec<EquilibriumReport>> {
    if !(eps > 0.0) || (eps - 0.5).abs() < 1e-9 || (eps - 1.0).abs() < 1e-9 {
        return Err(Error::arg("eps", format!("{eps}: need eps > 0 away from 1/2 and 1")));
    }
    if grid_n < 4 {
        return Err(Error::arg("grid_n", "need at least 4 nodes"));
    }
    let mut seeds = Vec::with_capacity(grid_n * grid_n);
    for i in 0..grid_n {
        for j in 0..grid_n {
            let g = -PI + TAU * (i as f64 + 0.5) / grid_n as f64;
            let big_g = lambda * (-0.98 + 1.96 * (j as f64 + 0.5) / grid_n as f64);
            seeds.push((g, big_g));
        }
    }
    let found: Vec<(f64, f64)> = seeds.par_iter().filter_map(|&(g, big_g)| newton(eps, lambda, g, big_g)).collect();
    let mut out: Vec<EquilibriumReport> = vec![];
    for (g, big_g) in found {
        let dup = out.iter().any(|r| {
            let dg = (r.location.0 - g + PI).rem_euclid(TAU) - PI;
            dg.abs() < 1e-6 && (r.location.1 - big_g).abs() < 1e-6 * lambda
        });
        if !dup {
            let (kind, eigenvalues) = classify(eps, lambda, big_g, g);
            out.push(EquilibriumReport { location: (g, big_g), kind, eigenvalues });
        }
    }
    out.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap());
    Ok(out)
}

fn newton(eps: f64, lambda: f64, mut g: f64, mut big_g: f64) -> Option<(f64, f64)> {
    for _ in 0..60 {
        let (d_big, d_g) = e_hat_gradient(eps, lambda, big_g, g);
        if d_big.abs().max(d_g.abs()) < 1e-13 {
            let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
            return Some((snap(wrap(g)), snap(big_g)));
        }
        let (a, b, c) = hessian(eps, lambda, big_g, g);
        let det = a * c - b * b;
        if det.abs() < 1e-300 {
            return None;
        }
        // solve [[a, b], [b, c]] (dg, dG) = -(E_g, E_G)
        let dg = -(c * d_g - b * d_big) / det;
        let d_bg = -(a * d_big - b * d_g) / det;
        let mut t = 1.0;
        while (big_g + t * d_bg).abs() >= lambda * (1.0 - 1e-9) {
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
        g += t * dg;
        big_g += t * d_bg;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub level: f64,
    /// `(g, G)` vertices
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub eps: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub levels: Vec<f64>,
    pub polylines: Vec<Polyline>,
}

struct Grid {
    ng: usize,
    n_big: usize,
    lambda: f64,
    values: Vec<f64>,
}

impl Grid {
    fn new(eps: f64, lambda: f64, ng: usize, n_big: usize) -> Self {
        let values = (0..ng * n_big)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n_big, k % n_big);
                let (g, big_g) = Self::coords(lambda, ng, n_big, i, j);
                e_hat(eps, lambda, big_g, g)
            })
            .collect();
        Self { ng, n_big, lambda, values }
    }
    fn coords(lambda: f64, ng: usize, n_big: usize, i: usize, j: usize) -> (f64, f64) {
        (-PI + TAU * i as f64 / (ng - 1) as f64, lambda * (-1.0 + 2.0 * j as f64 / (n_big - 1) as f64))
    }
    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_big + j]
    }
    fn point(&self, i: usize, j: usize) -> (f64, f64) {
        Self::coords(self.lambda, self.ng, self.n_big, i, j)
    }
}

/// Edge identifiers: horizontal edge (i,j)-(i+1,j) or vertical (i,j)-(i,j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

fn edge_point(grid: &Grid, e: Edge, level: f64) -> (f64, f64) {
    let ((i0, j0), (i1, j1)) = match e {
        Edge::H(i, j) => ((i, j), (i + 1, j)),
        Edge::V(i, j) => ((i, j), (i, j + 1)),
    };
    let (v0, v1) = (grid.at(i0, j0), grid.at(i1, j1));
    let t = if v1 == v0 { 0.5 } else { ((level - v0) / (v1 - v0)).clamp(0.0, 1.0) };
    let (p0, p1) = (grid.point(i0, j0), grid.point(i1, j1));
    (p0.0 + t * (p1.0 - p0.0), p0.1 + t * (p1.1 - p0.1))
}

/// Marching squares for one level; returns chained polylines.
fn contour(grid: &Grid, level: f64) -> Vec<Polyline> {
    let mut segs: Vec<(Edge, Edge)> = vec![];
    for i in 0..grid.ng - 1 {
        for j in 0..grid.n_big - 1 {
            // corners counter-clockwise from bottom-left
            let v = [grid.at(i, j), grid.at(i + 1, j), grid.at(i + 1, j + 1), grid.at(i, j + 1)];
            let idx = v.iter().enumerate().fold(0, |m, (k, &x)| m | (((x > level) as usize) << k));
            let (b, r, t, l) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let centre_above = v.iter().sum::<f64>() / 4.0 > level;
            match idx {
                0 | 15 => {}
                1 | 14 => segs.push((l, b)),
                2 | 13 => segs.push((b, r)),
                3 | 12 => segs.push((l, r)),
                4 | 11 => segs.push((r, t)),
                6 | 9 => segs.push((b, t)),
                7 | 8 => segs.push((l, t)),
                5 => {
                    if centre_above {
                        segs.push((l, t));
                        segs.push((b, r));
                    } else {
                        segs.push((l, b));
                        segs.push((r, t));
                    }
                }
                10 => {
                    if centre_above {
                        segs.push((l, b));
                        segs.push((r, t));
                    } else {
                        segs.push((l, t));
                        segs.push((b, r));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(grid, level, segs)
}

fn chain(grid: &Grid, level: f64, segs: Vec<(Edge, Edge)>) -> Vec<Polyline> {
    let mut adj: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = vec![];
    // open chains first start from edges touched once
    let mut starts: Vec<Edge> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(e, _)| *e).collect();
    starts.sort_by_key(|e| format!("{e:?}"));
    let walk = |start: Edge, used: &mut Vec<bool>| -> (Vec<Edge>, bool) {
        let mut path = vec![start];
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let (a, b) = segs[k];
            cur = if a == cur { b } else { a };
            if cur == start {
                return (path, true);
            }
            path.push(cur);
        }
        (path, false)
    };
    for s in starts {
        if adj[&s].iter().all(|&k| used[k]) {
            continue;
        }
        let (path, closed) = walk(s, &mut used);
        out.push((path, closed));
    }
    for k in 0..segs.len() {
        if !used[k] {
            let (path, closed) = walk(segs[k].0, &mut used);
            out.push((path, closed));
        }
    }
    out.into_iter()
        .map(|(path, closed)| Polyline { level, points: path.into_iter().map(|e| edge_point(grid, e, level)).collect(), closed })
        .collect()
}

/// Contours of `E` on `[-pi, pi] x [-Lambda, Lambda]`. The separatrix level
/// `E(0, 0) = 1` is always included when `eps > 1/2`.
pub fn phase_portrait(eps: f64, lambda: f64, grid: (usize, usize), levels: usize) -> Result<Portrait> {
    if grid.0 < 64 || grid.1 < 64 {
        return Err(Error::arg("grid", format!("{grid:?}: need at least 64 x 64")));
    }
    let gr = Grid::new(eps, lambda, grid.0, grid.1);
    let (lo, hi) = gr.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut lv: Vec<f64> = (1..=levels).map(|k| lo + (hi - lo) * k as f64 / (levels + 1) as f64).collect();
    if eps > 0.5 {
        lv.push(1.0);
        lv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let polylines = lv.par_iter().flat_map(|&l| contour(&gr, l)).collect();
    Ok(Portrait { eps, lambda, levels: lv, polylines })
}

impl Portrait {
    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = header_comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "level,g,G")?;
        for (k, p) in self.polylines.iter().enumerate() {
            writeln!(w, "# polyline,{k},{}", if p.closed { "closed" } else { "open" })?;
            for (g, big_g) in &p.points {
                writeln!(w, "{:e},{g:e},{big_g:e}", p.level)?;
            }
        }
        Ok(())
    }
}

/// A level of `E` whose level set meets every meridian `g = const` away
/// from the circular orbits `|G| = Lambda`: a rotational motion. Found by
/// sweeping levels and checking sign changes column by column.
pub fn detect_rotation(eps: f64, lambda: f64, grid: (usize, usize), levels: usize) -> Option<f64> {
    let gr = Grid::new(eps, lambda, grid.0, grid.1);
    // drop one grid row at each pole
    let rows = 1..gr.n_big - 1;
    let (lo, hi) = gr.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    (1..=levels).map(|k| lo + (hi - lo) * k as f64 / (levels + 1) as f64).find(|&level| {
        (0..gr.ng).all(|i| rows.clone().zip(rows.clone().skip(1)).any(|(j0, j1)| (gr.at(i, j0) > level) != (gr.at(i, j1) > level)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(eps: f64) -> Vec<EquilibriumReport> {
        find_equilibria(eps, 1.0, 24).unwrap()
    }

    #[test]
    fn two_centres_below_one_half() {
        let eq = kinds(0.3);
        assert_eq!(eq.len(), 2, "{eq:?}");
        assert!(eq.iter().all(|e| e.kind == EquilibriumKind::Center));
        assert!(eq.iter().all(|e| e.eigenvalues.0.re.abs() < 1e-8 && e.location.1.abs() < 1e-12));
        let mut g: Vec<f64> = eq.iter().map(|e| e.location.0.abs()).collect();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(g[0] < 1e-12 && (g[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn saddle_and_new_centres_above_one_half() {
        let eq = kinds(0.7);
        assert_eq!(eq.len(), 4, "{eq:?}");
        let origin = eq.iter().find(|e| e.location.0.abs() < 1e-9 && e.location.1.abs() < 1e-9).unwrap();
        assert_eq!(origin.kind, EquilibriumKind::Saddle);
        let apo = eq.iter().find(|e| (e.location.0.abs() - PI).abs() < 1e-9).unwrap();
        assert_eq!(apo.kind, EquilibriumKind::Center);
        let axis: Vec<_> = eq.iter().filter(|e| e.location.0.abs() < 1e-9 && e.location.1.abs() > 1e-3).collect();
        assert_eq!(axis.len(), 2);
        let want = (1.0 - 1.0 / (4.0 * 0.49f64)).sqrt();
        for e in axis {
            assert!((e.location.1.abs() - want).abs() < 1e-10);
            assert_eq!(e.kind, EquilibriumKind::Center);
        }
    }

    #[test]
    fn rotation_appears_only_beyond_one() {
        assert!(detect_rotation(0.3, 1.0, (128, 128), 200).is_none());
        assert!(detect_rotation(0.7, 1.0, (128, 128), 200).is_none());
        let level = detect_rotation(1.5, 1.0, (128, 128), 200).unwrap();
        assert!(level > 1.0 && level < 1.5);
        assert!(find_equilibria(0.5, 1.0, 16).is_err());
    }

    #[test]
    fn contours_near_libration_centre_are_closed() {
        let p = phase_portrait(0.3, 1.0, (129, 129), 20).unwrap();
        let near: Vec<_> = p.polylines.iter().filter(|l| l.points.iter().all(|(g, big_g)| g.abs() < 1.0 && big_g.abs() < 0.9)).collect();
        assert!(!near.is_empty());
        assert!(near.iter().all(|l| l.closed));
    }

    #[test]
    fn circular_limit_portrait_is_symmetric() {
        let p = phase_portrait(0.0, 1.0, (65, 65), 9).unwrap();
        for l in &p.polylines {
            for &(g, big_g) in &l.points {
                let v = e_hat(0.0, 1.0, big_g, -g);
                assert!((v - l.level).abs() < 0.05);
            }
        }
    }

    #[test]
    fn separatrix_level_is_present() {
        let p = phase_portrait(0.7, 1.0, (128, 128), 10).unwrap();
        assert!(p.levels.contains(&1.0));
        assert!(p.polylines.iter().any(|l| l.level == 1.0 && !l.points.is_empty()));
        let mut buf = Vec::new();
        p.write_csv(&mut buf, Some("seed,0")).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1) == Some("level,g,G"));
    }
}
