use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GreenError, GreenFunction};
use crate::C64;

const MAGIC: &[u8; 8] = b"P2DGRID1";

/// Maximum fraction of non-converged nodes tolerated in a grid.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-3;

/// Box in the real coordinates `(Re z, Im z, Re w, Im w)` of an affine chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox(pub [[f64; 2]; 4]);

impl GridBox {
    pub fn cube(lo: f64, hi: f64) -> Self {
        Self([[lo, hi]; 4])
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.0[axis][1] - self.0[axis][0]
    }
}

/// Samples of a local potential at the cell midpoints of a tensor grid.
///
/// Node `(i0, i1, i2, i3)` sits at `lo + (i + ½)·h` on every axis and is
/// stored row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialGrid {
    pub chart: usize,
    pub bbox: GridBox,
    pub resolution: [usize; 4],
    pub values: Vec<f64>,
}

impl PotentialGrid {
    /// Tabulates `g` at every node, in parallel.
    pub fn tabulate<G>(chart: usize, bbox: GridBox, resolution: [usize; 4], g: G) -> Self
    where
        G: Fn(C64, C64) -> f64 + Sync,
    {
        let n = resolution.iter().product();
        let template = Self {
            chart,
            bbox,
            resolution,
            values: Vec::new(),
        };
        let values = (0..n)
            .into_par_iter()
            .map(|i| {
                let (z, w) = template.node(i);
                g(z, w)
            })
            .collect();
        Self { values, ..template }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> [f64; 4] {
        std::array::from_fn(|a| self.bbox.width(a) / self.resolution[a] as f64)
    }

    /// Multi-index of flat node `i`.
    pub fn index(&self, mut i: usize) -> [usize; 4] {
        let mut idx = [0; 4];
        for a in (0..4).rev() {
            idx[a] = i % self.resolution[a];
            i /= self.resolution[a];
        }
        idx
    }

    /// Coordinates of flat node `i`.
    pub fn node(&self, i: usize) -> (C64, C64) {
        let idx = self.index(i);
        let h = self.spacing();
        let x: [f64; 4] = std::array::from_fn(|a| self.bbox.0[a][0] + (idx[a] as f64 + 0.5) * h[a]);
        (C64::new(x[0], x[1]), C64::new(x[2], x[3]))
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.chart as u32).to_le_bytes())?;
        for [lo, hi] in self.bbox.0 {
            out.write_all(&lo.to_le_bytes())?;
            out.write_all(&hi.to_le_bytes())?;
        }
        for r in self.resolution {
            out.write_all(&(r as u32).to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, GreenError> {
        let io = |e: std::io::Error| GreenError::Format(e.to_string());
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(GreenError::Format("bad magic".into()));
        }
        let mut u4 = [0u8; 4];
        let mut f8 = [0u8; 8];
        input.read_exact(&mut u4).map_err(io)?;
        let chart = u32::from_le_bytes(u4) as usize;
        if chart > 2 {
            return Err(GreenError::Format(format!("chart {chart}")));
        }
        let mut bbox = [[0.0; 2]; 4];
        for axis in &mut bbox {
            for v in axis.iter_mut() {
                input.read_exact(&mut f8).map_err(io)?;
                *v = f64::from_le_bytes(f8);
            }
        }
        let mut resolution = [0usize; 4];
        for r in &mut resolution {
            input.read_exact(&mut u4).map_err(io)?;
            *r = u32::from_le_bytes(u4) as usize;
        }
        let n: usize = resolution.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            input.read_exact(&mut f8).map_err(io)?;
            values.push(f64::from_le_bytes(f8));
        }
        Ok(Self {
            chart,
            bbox: GridBox(bbox),
            resolution,
            values,
        })
    }

    /// CSV with columns `re_z,im_z,re_w,im_w,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re_z,im_z,re_w,im_w,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let (z, w) = self.node(i);
            writeln!(out, "{},{},{},{},{}", z.re, z.im, w.re, w.im, v)?;
        }
        Ok(())
    }
}

/// Tabulates the local potential of `f` on `bbox` in chart `chart`.
pub fn potential_grid(
    gf: &GreenFunction<'_>,
    chart: usize,
    bbox: GridBox,
    resolution: [usize; 4],
    tol: f64,
) -> Result<PotentialGrid, GreenError> {
    if resolution.iter().any(|&r| r < 16) {
        return Err(GreenError::Format("resolution must be at least 16 per axis".into()));
    }
    if bbox.0.iter().any(|[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(GreenError::Format("degenerate grid box".into()));
    }
    let mut flagged = std::sync::atomic::AtomicUsize::new(0);
    let grid = PotentialGrid::tabulate(chart, bbox, resolution, |z, w| {
        match gf.local_potential(chart, [z, w], tol) {
            Ok(v) => v,
            Err(GreenError::NoConvergence { value, .. }) => {
                flagged.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                value
            }
            Err(_) => {
                flagged.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                f64::NAN
            }
        }
    });
    let flagged = *flagged.get_mut();
    if flagged as f64 > MAX_FLAGGED_FRACTION * grid.len() as f64 || grid.values.iter().any(|v| !v.is_finite()) {
        return Err(GreenError::GridRejected {
            flagged,
            total: grid.len(),
        });
    }
    Ok(grid)
}
