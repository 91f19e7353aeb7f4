//! Fast pyramid transforms on the integer lattice with zero extension.
//!
//! Samples live on a uniform grid with dyadic spacing `2^-J_grid` anchored to
//! the lattice (grid points are integer multiples of the spacing). The
//! forward transform rescales samples into top-level scaling coefficients and
//! runs the full analysis pyramid down to level zero, so the output holds
//! level-0 scaling coefficients plus detail bands at every level
//! `0..J_grid-1`. Each step is an exact isometry on finitely supported
//! sequences, which gives energy conservation and exact invertibility.
//!
//! The caller declares a trusted `analysis_level` `J`; the transform requires
//! two guard levels (`J + 2 <= J_grid`) because coefficients at the finest
//! two levels are dominated by sampling quadrature error and must not feed
//! smoothness fits. All levels are nevertheless stored: dropping them would
//! break the energy identity and reconstruction.

use super::WaveletSystem;
use crate::error::Error;
use crate::Result;
use std::io::{BufRead, Write};

/// A dyadic cube `2^-j ([0,1]^d + k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicCube {
    pub level: usize,
    pub k: [i64; 2],
    pub dim: u8,
}

impl DyadicCube {
    pub fn new_1d(level: usize, k: i64) -> Self {
        DyadicCube { level, k: [k, 0], dim: 1 }
    }

    pub fn new_2d(level: usize, kx: i64, ky: i64) -> Self {
        DyadicCube { level, k: [kx, ky], dim: 2 }
    }

    /// Side length `2^-level`.
    pub fn side(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    /// Lebesgue measure `2^(-level * dim)`.
    pub fn measure(&self) -> f64 {
        0.5f64.powi((self.level * self.dim as usize) as i32)
    }

    /// Half-open membership test `k 2^-j <= x < (k+1) 2^-j` per axis.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let s = self.side();
        (0..self.dim as usize).all(|ax| {
            let lo = self.k[ax] as f64 * s;
            x[ax] >= lo && x[ax] < lo + s
        })
    }

    /// The parent cube one level coarser; `None` at level zero.
    pub fn parent(&self) -> Option<DyadicCube> {
        if self.level == 0 {
            return None;
        }
        Some(DyadicCube {
            level: self.level - 1,
            k: [self.k[0].div_euclid(2), self.k[1].div_euclid(2)],
            dim: self.dim,
        })
    }
}

/// A dense block of coefficients of one type at one level.
///
/// `ty` is `0` for scaling coefficients and `1..=3` for wavelet types
/// (bit 0: oscillation along x, bit 1: oscillation along y). Values are
/// stored row-major with `x` contiguous; lattice index `(off[0]+ix,
/// off[1]+iy)`. One-dimensional bands use `ny = 1` and `off[1] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub ty: u8,
    pub off: [i64; 2],
    pub nx: usize,
    pub ny: usize,
    pub v: Vec<f64>,
}

impl Band {
    pub fn zero(ty: u8, off: [i64; 2], nx: usize, ny: usize) -> Self {
        Band { ty, off, nx, ny, v: vec![0.0; nx * ny] }
    }

    pub fn get(&self, kx: i64, ky: i64) -> f64 {
        let ix = kx - self.off[0];
        let iy = ky - self.off[1];
        if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
            0.0
        } else {
            self.v[iy as usize * self.nx + ix as usize]
        }
    }

    pub fn set(&mut self, kx: i64, ky: i64, val: f64) {
        let ix = (kx - self.off[0]) as usize;
        let iy = (ky - self.off[1]) as usize;
        self.v[iy * self.nx + ix] = val;
    }

    pub fn energy(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum()
    }

    /// Sum of `|value|^p` over the band.
    pub fn abs_pow_sum(&self, p: f64) -> f64 {
        self.v.iter().map(|x| x.abs().powf(p)).sum()
    }
}

/// Identifier of one coefficient: level, type, translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryId {
    pub level: usize,
    pub ty: u8,
    pub k: [i64; 2],
}

/// Full multiscale coefficient set of one sampled function.
#[derive(Debug, Clone)]
pub struct WaveletCoefficients {
    /// Spatial dimension (1 or 2).
    pub dim: u8,
    /// Sample grid spacing exponent: spacing was `2^-grid_level`.
    pub grid_level: usize,
    /// Trusted analysis depth `J` declared by the caller (`J + 2 <= grid_level`).
    pub analysis_level: usize,
    /// Name of the generating filter bank (metadata for dumps).
    pub system_name: String,
    /// Level-0 scaling coefficients (`ty = 0`).
    pub scaling: Band,
    /// Detail bands per level; `details[j]` holds types `1..2^dim`.
    pub details: Vec<Vec<Band>>,
}

impl WaveletCoefficients {
    /// Finest stored detail level (`grid_level - 1` after a forward pass).
    pub fn max_level(&self) -> usize {
        self.details.len().saturating_sub(1)
    }

    /// Total squared coefficient mass (scaling plus all details).
    pub fn total_sq(&self) -> f64 {
        self.scaling.energy()
            + self
                .details
                .iter()
                .flat_map(|bands| bands.iter())
                .map(Band::energy)
                .sum::<f64>()
    }

    /// Number of stored coefficient slots.
    pub fn count(&self) -> usize {
        self.scaling.v.len()
            + self
                .details
                .iter()
                .flat_map(|bands| bands.iter())
                .map(|b| b.v.len())
                .sum::<usize>()
    }

    /// `sum |detail|^p` over all bands at level `j`.
    pub fn detail_level_pow_sum(&self, j: usize, p: f64) -> f64 {
        self.details
            .get(j)
            .map(|bands| bands.iter().map(|b| b.abs_pow_sum(p)).sum())
            .unwrap_or(0.0)
    }

    /// Coefficient-wise difference; layouts must match exactly.
    pub fn difference(&self, other: &WaveletCoefficients) -> Result<WaveletCoefficients> {
        let layout_ok = self.dim == other.dim
            && self.grid_level == other.grid_level
            && self.details.len() == other.details.len()
            && self.scaling.off == other.scaling.off
            && self.scaling.nx == other.scaling.nx
            && self.scaling.ny == other.scaling.ny;
        if !layout_ok {
            return Err(Error::Shape(
                "coefficient sets have different layouts; difference undefined".into(),
            ));
        }
        let mut out = self.clone();
        for (a, b) in out.scaling.v.iter_mut().zip(other.scaling.v.iter()) {
            *a -= b;
        }
        for (lvl, bands) in out.details.iter_mut().enumerate() {
            for (bi, band) in bands.iter_mut().enumerate() {
                let ob = &other.details[lvl][bi];
                if band.off != ob.off || band.nx != ob.nx || band.ny != ob.ny {
                    return Err(Error::Shape(format!(
                        "detail band layout mismatch at level {lvl} type {}",
                        band.ty
                    )));
                }
                for (a, b) in band.v.iter_mut().zip(ob.v.iter()) {
                    *a -= b;
                }
            }
        }
        Ok(out)
    }

    /// Builds a container from an explicit entry list (the inverse of
    /// [`WaveletCoefficients::sorted_entries`]); unlisted slots inside each
    /// band's bounding box are zero.
    pub fn from_entries(
        dim: u8,
        grid_level: usize,
        analysis_level: usize,
        system_name: &str,
        entries: Vec<(EntryId, f64)>,
    ) -> Result<WaveletCoefficients> {
        rebuild_container(dim, grid_level, analysis_level, system_name.to_string(), entries)
    }

    /// All entries as `(id, value)` sorted by `(level, type, k)`; scaling
    /// entries appear with level 0 and type 0.
    pub fn sorted_entries(&self) -> Vec<(EntryId, f64)> {
        let mut rows = Vec::with_capacity(self.count());
        push_band_entries(&mut rows, 0, &self.scaling);
        for (j, bands) in self.details.iter().enumerate() {
            for band in bands {
                push_band_entries(&mut rows, j, band);
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows
    }
}

fn push_band_entries(rows: &mut Vec<(EntryId, f64)>, level: usize, band: &Band) {
    for iy in 0..band.ny {
        for ix in 0..band.nx {
            let val = band.v[iy * band.nx + ix];
            rows.push((
                EntryId {
                    level,
                    ty: band.ty,
                    k: [band.off[0] + ix as i64, band.off[1] + iy as i64],
                },
                val,
            ));
        }
    }
}

/// Samples of a function on a 1-d dyadic grid: value `i` sits at
/// `origin + i * spacing`.
#[derive(Debug, Clone)]
pub struct GridSamples1 {
    pub origin: f64,
    pub spacing: f64,
    pub v: Vec<f64>,
}

/// Samples on a 2-d dyadic grid, row-major with `x` contiguous.
#[derive(Debug, Clone)]
pub struct GridSamples2 {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub v: Vec<f64>,
}

impl GridSamples2 {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.v[iy * self.nx + ix]
    }

    /// Value at an absolute lattice index (zero outside the stored block).
    pub fn at_lattice(&self, kx: i64, ky: i64) -> f64 {
        let ox = (self.origin[0] / self.spacing).round() as i64;
        let oy = (self.origin[1] / self.spacing).round() as i64;
        let ix = kx - ox;
        let iy = ky - oy;
        if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
            0.0
        } else {
            self.get(ix as usize, iy as usize)
        }
    }
}

impl GridSamples1 {
    pub fn at_lattice(&self, k: i64) -> f64 {
        let o = (self.origin / self.spacing).round() as i64;
        let i = k - o;
        if i < 0 || i as usize >= self.v.len() {
            0.0
        } else {
            self.v[i as usize]
        }
    }
}

/// Validates that `spacing = 2^-J` for some integer `J >= 0` and returns `J`.
fn spacing_level(spacing: f64) -> Result<usize> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::Shape(format!("grid spacing must be positive, got {spacing}")));
    }
    let j = -spacing.log2();
    let jr = j.round();
    if jr < 0.0 || (j - jr).abs() > 1e-9 || spacing != 0.5f64.powi(jr as i32) {
        return Err(Error::Shape(format!(
            "grid spacing {spacing} is not an exact dyadic step 2^-J"
        )));
    }
    Ok(jr as usize)
}

/// Validates that `origin` sits on the lattice of step `spacing`.
fn lattice_offset(origin: f64, spacing: f64) -> Result<i64> {
    let k = origin / spacing;
    let kr = k.round();
    if (k - kr).abs() > 1e-9 {
        return Err(Error::Shape(format!(
            "grid origin {origin} is not aligned to the dyadic lattice of step {spacing}"
        )));
    }
    Ok(kr as i64)
}

fn check_levels(analysis_level: usize, grid_level: usize) -> Result<()> {
    if analysis_level + 2 > grid_level {
        return Err(Error::Level(format!(
            "analysis level {analysis_level} needs two guard levels below grid level {grid_level}"
        )));
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("samples contain non-finite values".into()));
    }
    Ok(())
}

// ---- one-dimensional pyramid ----

fn analyze_1d_step(off: i64, v: &[f64], h: &[f64], g: &[f64]) -> ((i64, Vec<f64>), (i64, Vec<f64>)) {
    let l = h.len() as i64;
    let lo = off;
    let hi = off + v.len() as i64 - 1;
    let k_min = div_ceil(lo - (l - 1), 2);
    let k_max = div_floor(hi, 2);
    let count = (k_max - k_min + 1).max(0) as usize;
    let mut a = vec![0.0; count];
    let mut d = vec![0.0; count];
    for (i, (a_slot, d_slot)) in a.iter_mut().zip(d.iter_mut()).enumerate() {
        let k = k_min + i as i64;
        let mut sa = 0.0;
        let mut sd = 0.0;
        for n in 0..l {
            let idx = 2 * k + n - off;
            if idx >= 0 && (idx as usize) < v.len() {
                let x = v[idx as usize];
                sa += h[n as usize] * x;
                sd += g[n as usize] * x;
            }
        }
        *a_slot = sa;
        *d_slot = sd;
    }
    ((k_min, a), (k_min, d))
}

/// Scatter synthesis: exact adjoint of the analysis step.
fn synth_1d_step(
    a: (i64, &[f64]),
    d: Option<(i64, &[f64])>,
    h: &[f64],
    g: &[f64],
) -> (i64, Vec<f64>) {
    let l = h.len() as i64;
    let (aoff, av) = a;
    let mut n_min = 2 * aoff;
    let mut n_max = 2 * (aoff + av.len() as i64 - 1) + l - 1;
    if let Some((doff, dv)) = d {
        n_min = n_min.min(2 * doff);
        n_max = n_max.max(2 * (doff + dv.len() as i64 - 1) + l - 1);
    }
    let count = (n_max - n_min + 1).max(0) as usize;
    let mut out = vec![0.0; count];
    for (i, &val) in av.iter().enumerate() {
        let base = 2 * (aoff + i as i64) - n_min;
        for (n, tap) in h.iter().enumerate() {
            out[(base + n as i64) as usize] += tap * val;
        }
    }
    if let Some((doff, dv)) = d {
        for (i, &val) in dv.iter().enumerate() {
            let base = 2 * (doff + i as i64) - n_min;
            for (n, tap) in g.iter().enumerate() {
                out[(base + n as i64) as usize] += tap * val;
            }
        }
    }
    (n_min, out)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}

fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Forward transform of 1-d samples; see the module docs for the contract.
pub fn forward_1d(
    samples: &GridSamples1,
    system: &WaveletSystem,
    analysis_level: usize,
) -> Result<WaveletCoefficients> {
    let grid_level = spacing_level(samples.spacing)?;
    check_levels(analysis_level, grid_level)?;
    check_finite(&samples.v)?;
    let off = lattice_offset(samples.origin, samples.spacing)?;
    if samples.v.is_empty() {
        return Err(Error::Shape("empty sample vector".into()));
    }
    let h = system.lowpass().to_vec();
    let g = system.highpass();
    let scale = 0.5f64.powi(grid_level as i32).sqrt(); // spacing^(d/2), d = 1
    let mut cur_off = off;
    let mut cur: Vec<f64> = samples.v.iter().map(|x| x * scale).collect();
    let mut details: Vec<Vec<Band>> = vec![Vec::new(); grid_level];
    let mut level = grid_level;
    while level > 0 {
        let ((aoff, av), (doff, dv)) = analyze_1d_step(cur_off, &cur, &h, &g);
        level -= 1;
        details[level] = vec![Band { ty: 1, off: [doff, 0], nx: dv.len(), ny: 1, v: dv }];
        cur_off = aoff;
        cur = av;
    }
    Ok(WaveletCoefficients {
        dim: 1,
        grid_level,
        analysis_level,
        system_name: system.name().to_string(),
        scaling: Band { ty: 0, off: [cur_off, 0], nx: cur.len(), ny: 1, v: cur },
        details,
    })
}

/// Inverse of [`forward_1d`] onto a grid of spacing `2^-out_grid_level`.
pub fn inverse_1d(
    coeffs: &WaveletCoefficients,
    system: &WaveletSystem,
    out_grid_level: usize,
) -> Result<GridSamples1> {
    if coeffs.dim != 1 {
        return Err(Error::Shape("coefficients are not one-dimensional".into()));
    }
    if out_grid_level < coeffs.details.len() {
        return Err(Error::Level(format!(
            "output grid level {out_grid_level} is below the finest stored detail level {}",
            coeffs.details.len().saturating_sub(1)
        )));
    }
    let h = system.lowpass().to_vec();
    let g = system.highpass();
    let mut cur_off = coeffs.scaling.off[0];
    let mut cur = coeffs.scaling.v.clone();
    for bands in &coeffs.details {
        let d = &bands[0];
        let (noff, nv) = synth_1d_step((cur_off, &cur), Some((d.off[0], &d.v)), &h, &g);
        cur_off = noff;
        cur = nv;
    }
    for _ in coeffs.details.len()..out_grid_level {
        let (noff, nv) = synth_1d_step((cur_off, &cur), None, &h, &g);
        cur_off = noff;
        cur = nv;
    }
    let spacing = 0.5f64.powi(out_grid_level as i32);
    let scale = spacing.sqrt();
    Ok(GridSamples1 {
        origin: cur_off as f64 * spacing,
        spacing,
        v: cur.iter().map(|x| x / scale).collect(),
    })
}

// ---- two-dimensional pyramid ----

struct Sig2 {
    off: [i64; 2],
    nx: usize,
    ny: usize,
    v: Vec<f64>,
}

fn analyze_rows(sig: &Sig2, h: &[f64], g: &[f64]) -> (Sig2, Sig2) {
    let l = h.len() as i64;
    let lo = sig.off[0];
    let hi = sig.off[0] + sig.nx as i64 - 1;
    let k_min = div_ceil(lo - (l - 1), 2);
    let k_max = div_floor(hi, 2);
    let count = (k_max - k_min + 1).max(0) as usize;
    let mut a = vec![0.0; count * sig.ny];
    let mut d = vec![0.0; count * sig.ny];
    for iy in 0..sig.ny {
        let row = &sig.v[iy * sig.nx..(iy + 1) * sig.nx];
        for i in 0..count {
            let k = k_min + i as i64;
            let mut sa = 0.0;
            let mut sd = 0.0;
            for n in 0..l {
                let idx = 2 * k + n - lo;
                if idx >= 0 && (idx as usize) < sig.nx {
                    let x = row[idx as usize];
                    sa += h[n as usize] * x;
                    sd += g[n as usize] * x;
                }
            }
            a[iy * count + i] = sa;
            d[iy * count + i] = sd;
        }
    }
    let off = [k_min, sig.off[1]];
    (
        Sig2 { off, nx: count, ny: sig.ny, v: a },
        Sig2 { off, nx: count, ny: sig.ny, v: d },
    )
}

fn analyze_cols(sig: &Sig2, h: &[f64], g: &[f64]) -> (Sig2, Sig2) {
    let l = h.len() as i64;
    let lo = sig.off[1];
    let hi = sig.off[1] + sig.ny as i64 - 1;
    let k_min = div_ceil(lo - (l - 1), 2);
    let k_max = div_floor(hi, 2);
    let count = (k_max - k_min + 1).max(0) as usize;
    let mut a = vec![0.0; sig.nx * count];
    let mut d = vec![0.0; sig.nx * count];
    for i in 0..count {
        let k = k_min + i as i64;
        for ix in 0..sig.nx {
            let mut sa = 0.0;
            let mut sd = 0.0;
            for n in 0..l {
                let idx = 2 * k + n - lo;
                if idx >= 0 && (idx as usize) < sig.ny {
                    let x = sig.v[idx as usize * sig.nx + ix];
                    sa += h[n as usize] * x;
                    sd += g[n as usize] * x;
                }
            }
            a[i * sig.nx + ix] = sa;
            d[i * sig.nx + ix] = sd;
        }
    }
    let off = [sig.off[0], k_min];
    (
        Sig2 { off, nx: sig.nx, ny: count, v: a },
        Sig2 { off, nx: sig.nx, ny: count, v: d },
    )
}

fn synth_cols(a: &Sig2, d: Option<&Sig2>, h: &[f64], g: &[f64]) -> Sig2 {
    let l = h.len() as i64;
    let mut n_min = 2 * a.off[1];
    let mut n_max = 2 * (a.off[1] + a.ny as i64 - 1) + l - 1;
    let mut x_min = a.off[0];
    let mut x_max = a.off[0] + a.nx as i64 - 1;
    if let Some(dd) = d {
        n_min = n_min.min(2 * dd.off[1]);
        n_max = n_max.max(2 * (dd.off[1] + dd.ny as i64 - 1) + l - 1);
        x_min = x_min.min(dd.off[0]);
        x_max = x_max.max(dd.off[0] + dd.nx as i64 - 1);
    }
    let ny = (n_max - n_min + 1).max(0) as usize;
    let nx = (x_max - x_min + 1).max(0) as usize;
    let mut out = vec![0.0; nx * ny];
    let mut scatter = |sig: &Sig2, taps: &[f64]| {
        for iy in 0..sig.ny {
            let ybase = 2 * (sig.off[1] + iy as i64) - n_min;
            for ix in 0..sig.nx {
                let val = sig.v[iy * sig.nx + ix];
                if val == 0.0 {
                    continue;
                }
                let gx = (sig.off[0] + ix as i64 - x_min) as usize;
                for (n, tap) in taps.iter().enumerate() {
                    let oy = (ybase + n as i64) as usize;
                    out[oy * nx + gx] += tap * val;
                }
            }
        }
    };
    scatter(a, h);
    if let Some(dd) = d {
        scatter(dd, g);
    }
    Sig2 { off: [x_min, n_min], nx, ny, v: out }
}

fn synth_rows(a: &Sig2, d: Option<&Sig2>, h: &[f64], g: &[f64]) -> Sig2 {
    let l = h.len() as i64;
    let mut n_min = 2 * a.off[0];
    let mut n_max = 2 * (a.off[0] + a.nx as i64 - 1) + l - 1;
    let mut y_min = a.off[1];
    let mut y_max = a.off[1] + a.ny as i64 - 1;
    if let Some(dd) = d {
        n_min = n_min.min(2 * dd.off[0]);
        n_max = n_max.max(2 * (dd.off[0] + dd.nx as i64 - 1) + l - 1);
        y_min = y_min.min(dd.off[1]);
        y_max = y_max.max(dd.off[1] + dd.ny as i64 - 1);
    }
    let nx = (n_max - n_min + 1).max(0) as usize;
    let ny = (y_max - y_min + 1).max(0) as usize;
    let mut out = vec![0.0; nx * ny];
    let mut scatter = |sig: &Sig2, taps: &[f64]| {
        for iy in 0..sig.ny {
            let gy = (sig.off[1] + iy as i64 - y_min) as usize;
            for ix in 0..sig.nx {
                let val = sig.v[iy * sig.nx + ix];
                if val == 0.0 {
                    continue;
                }
                let xbase = 2 * (sig.off[0] + ix as i64) - n_min;
                for (n, tap) in taps.iter().enumerate() {
                    out[gy * nx + (xbase + n as i64) as usize] += tap * val;
                }
            }
        }
    };
    scatter(a, h);
    if let Some(dd) = d {
        scatter(dd, g);
    }
    Sig2 { off: [n_min, y_min], nx, ny, v: out }
}

fn band_from_sig(ty: u8, sig: Sig2) -> Band {
    Band { ty, off: sig.off, nx: sig.nx, ny: sig.ny, v: sig.v }
}

fn sig_from_band(band: &Band) -> Sig2 {
    Sig2 { off: band.off, nx: band.nx, ny: band.ny, v: band.v.clone() }
}

/// Forward transform of 2-d samples; see the module docs for the contract.
pub fn forward_2d(
    samples: &GridSamples2,
    system: &WaveletSystem,
    analysis_level: usize,
) -> Result<WaveletCoefficients> {
    let grid_level = spacing_level(samples.spacing)?;
    check_levels(analysis_level, grid_level)?;
    check_finite(&samples.v)?;
    let offx = lattice_offset(samples.origin[0], samples.spacing)?;
    let offy = lattice_offset(samples.origin[1], samples.spacing)?;
    if samples.v.len() != samples.nx * samples.ny || samples.v.is_empty() {
        return Err(Error::Shape(format!(
            "sample block {}x{} does not match value count {}",
            samples.nx,
            samples.ny,
            samples.v.len()
        )));
    }
    let h = system.lowpass().to_vec();
    let g = system.highpass();
    let scale = 0.5f64.powi(grid_level as i32); // spacing^(d/2), d = 2
    let mut cur = Sig2 {
        off: [offx, offy],
        nx: samples.nx,
        ny: samples.ny,
        v: samples.v.iter().map(|x| x * scale).collect(),
    };
    let mut details: Vec<Vec<Band>> = vec![Vec::new(); grid_level];
    let mut level = grid_level;
    while level > 0 {
        let (ax, dx) = analyze_rows(&cur, &h, &g);
        let (aa, ad) = analyze_cols(&ax, &h, &g);
        let (da, dd) = analyze_cols(&dx, &h, &g);
        level -= 1;
        details[level] = vec![
            band_from_sig(1, da),
            band_from_sig(2, ad),
            band_from_sig(3, dd),
        ];
        cur = aa;
    }
    Ok(WaveletCoefficients {
        dim: 2,
        grid_level,
        analysis_level,
        system_name: system.name().to_string(),
        scaling: band_from_sig(0, cur),
        details,
    })
}

/// Inverse of [`forward_2d`] onto a grid of spacing `2^-out_grid_level`.
pub fn inverse_2d(
    coeffs: &WaveletCoefficients,
    system: &WaveletSystem,
    out_grid_level: usize,
) -> Result<GridSamples2> {
    if coeffs.dim != 2 {
        return Err(Error::Shape("coefficients are not two-dimensional".into()));
    }
    if out_grid_level < coeffs.details.len() {
        return Err(Error::Level(format!(
            "output grid level {out_grid_level} is below the finest stored detail level {}",
            coeffs.details.len().saturating_sub(1)
        )));
    }
    let h = system.lowpass().to_vec();
    let g = system.highpass();
    let mut cur = sig_from_band(&coeffs.scaling);
    for bands in &coeffs.details {
        let da = sig_from_band(&bands[0]);
        let ad = sig_from_band(&bands[1]);
        let dd = sig_from_band(&bands[2]);
        let ax = synth_cols(&cur, Some(&ad), &h, &g);
        let dx = synth_cols(&da, Some(&dd), &h, &g);
        cur = synth_rows(&ax, Some(&dx), &h, &g);
    }
    for _ in coeffs.details.len()..out_grid_level {
        let up_y = synth_cols(&cur, None, &h, &g);
        cur = synth_rows(&up_y, None, &h, &g);
    }
    let spacing = 0.5f64.powi(out_grid_level as i32);
    let scale = spacing; // spacing^(d/2), d = 2
    Ok(GridSamples2 {
        origin: [cur.off[0] as f64 * spacing, cur.off[1] as f64 * spacing],
        spacing,
        nx: cur.nx,
        ny: cur.ny,
        v: cur.v.iter().map(|x| x / scale).collect(),
    })
}

// ---- CSV round-trip ----

/// Writes coefficients as CSV: metadata header comment, then rows
/// `j,k...,type,value` sorted by `(j, type, k)`. Values use 17 significant
/// digits, which round-trips `f64` exactly.
pub fn write_coefficients_csv<W: Write>(coeffs: &WaveletCoefficients, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "# dim={} grid_level={} analysis_level={} system={}",
        coeffs.dim, coeffs.grid_level, coeffs.analysis_level, coeffs.system_name
    )?;
    if coeffs.dim == 1 {
        writeln!(w, "j,k,type,value")?;
    } else {
        writeln!(w, "j,kx,ky,type,value")?;
    }
    for (id, val) in coeffs.sorted_entries() {
        if coeffs.dim == 1 {
            writeln!(w, "{},{},{},{:.16e}", id.level, id.k[0], id.ty, val)?;
        } else {
            writeln!(w, "{},{},{},{},{:.16e}", id.level, id.k[0], id.k[1], id.ty, val)?;
        }
    }
    Ok(())
}

/// Reads a coefficient CSV produced by [`write_coefficients_csv`].
pub fn read_coefficients_csv<R: BufRead>(r: R) -> Result<WaveletCoefficients> {
    let mut dim = 0u8;
    let mut grid_level = None;
    let mut analysis_level = 0usize;
    let mut system_name = String::new();
    let mut entries: Vec<(EntryId, f64)> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for tok in meta.split_whitespace() {
                if let Some((key, val)) = tok.split_once('=') {
                    match key {
                        "dim" => dim = parse_num(val, lineno)? as u8,
                        "grid_level" => grid_level = Some(parse_num(val, lineno)? as usize),
                        "analysis_level" => analysis_level = parse_num(val, lineno)? as usize,
                        "system" => system_name = val.to_string(),
                        _ => {}
                    }
                }
            }
            continue;
        }
        if line.starts_with('j') {
            continue; // column header
        }
        let cols: Vec<&str> = line.split(',').collect();
        let expect = if dim == 1 { 4 } else { 5 };
        if cols.len() != expect {
            return Err(Error::Shape(format!(
                "line {}: expected {expect} columns, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        let level = parse_num(cols[0], lineno)? as usize;
        let kx = parse_num(cols[1], lineno)? as i64;
        let (ky, ty_col, val_col) = if dim == 1 {
            (0i64, 2, 3)
        } else {
            (parse_num(cols[2], lineno)? as i64, 3, 4)
        };
        let ty = parse_num(cols[ty_col], lineno)? as u8;
        let val: f64 = cols[val_col]
            .parse()
            .map_err(|_| Error::Shape(format!("line {}: bad value {}", lineno + 1, cols[val_col])))?;
        entries.push((EntryId { level, ty, k: [kx, ky] }, val));
    }
    let grid_level = grid_level
        .ok_or_else(|| Error::Shape("missing grid_level metadata in coefficient CSV".into()))?;
    if dim != 1 && dim != 2 {
        return Err(Error::Shape(format!("unsupported dimension {dim} in coefficient CSV")));
    }
    rebuild_container(dim, grid_level, analysis_level, system_name, entries)
}

fn parse_num(s: &str, lineno: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Shape(format!("line {}: bad number {s}", lineno + 1)))
}

fn rebuild_container(
    dim: u8,
    grid_level: usize,
    analysis_level: usize,
    system_name: String,
    entries: Vec<(EntryId, f64)>,
) -> Result<WaveletCoefficients> {
    let max_level = entries
        .iter()
        .filter(|(id, _)| id.ty > 0)
        .map(|(id, _)| id.level)
        .max()
        .unwrap_or(0);
    let ntypes = if dim == 1 { 1 } else { 3 };
    let mut groups: Vec<Vec<(EntryId, f64)>> = vec![Vec::new(); (max_level + 1) * ntypes + 1];
    for (id, val) in entries {
        if id.ty == 0 {
            if id.level != 0 {
                return Err(Error::Shape("scaling entries must carry level 0".into()));
            }
            groups[0].push((id, val));
        } else {
            let slot = 1 + id.level * ntypes + (id.ty as usize - 1);
            groups[slot].push((id, val));
        }
    }
    let densify = |ty: u8, items: &[(EntryId, f64)]| -> Band {
        if items.is_empty() {
            return Band::zero(ty, [0, 0], 0, 0);
        }
        let minx = items.iter().map(|(id, _)| id.k[0]).min().unwrap();
        let maxx = items.iter().map(|(id, _)| id.k[0]).max().unwrap();
        let miny = items.iter().map(|(id, _)| id.k[1]).min().unwrap();
        let maxy = items.iter().map(|(id, _)| id.k[1]).max().unwrap();
        let nx = (maxx - minx + 1) as usize;
        let ny = (maxy - miny + 1) as usize;
        let mut band = Band::zero(ty, [minx, miny], nx, ny);
        for (id, val) in items {
            band.set(id.k[0], id.k[1], *val);
        }
        band
    };
    let scaling = densify(0, &groups[0]);
    let mut details = Vec::with_capacity(max_level + 1);
    for j in 0..=max_level {
        let mut bands = Vec::with_capacity(ntypes);
        for t in 0..ntypes {
            bands.push(densify(t as u8 + 1, &groups[1 + j * ntypes + t]));
        }
        details.push(bands);
    }
    Ok(WaveletCoefficients {
        dim,
        grid_level,
        analysis_level,
        system_name,
        scaling,
        details,
    })
}
