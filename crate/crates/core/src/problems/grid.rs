use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// `(0, 1)`
    Interval,
    /// `(0, width) × (0, height)`
    Rectangle { width: f64, height: f64 },
    /// `(−1, 1)² \ [0, 1]²`
    LShape,
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Rectangle {
            width: 1.0,
            height: 1.0,
        }
    }

    pub fn is_2d(&self) -> bool {
        !matches!(self, Domain::Interval)
    }

    /// Lower-left corner and extents of the bounding box.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Domain::Interval => ([0.0, 0.0], [1.0, 0.0]),
            Domain::Rectangle { width, height } => ([0.0, 0.0], [width, height]),
            Domain::LShape => ([-1.0, -1.0], [2.0, 2.0]),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval => write!(f, "interval"),
            Domain::Rectangle { width, height } if *width == 1.0 && *height == 1.0 => {
                write!(f, "square")
            }
            Domain::Rectangle { width, height } => write!(f, "rectangle:{width}x{height}"),
            Domain::LShape => write!(f, "lshape"),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "interval" => Ok(Domain::Interval),
            "square" | "rectangle" => Ok(Domain::unit_square()),
            "lshape" | "l-shape" => Ok(Domain::LShape),
            other => {
                let dims = other
                    .strip_prefix("rectangle:")
                    .ok_or_else(|| Error::Parse(format!("unknown domain `{other}`")))?;
                let (w, h) = dims
                    .split_once('x')
                    .ok_or_else(|| Error::Parse(format!("expected WxH, got `{dims}`")))?;
                Ok(Domain::Rectangle {
                    width: parse_scalar(w)?,
                    height: parse_scalar(h)?,
                })
            }
        }
    }
}

/// Parses `0.25`, `1/4` or `2^-2`.
pub fn parse_scalar(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("cannot parse number `{s}`"));
    if let Some((base, exp)) = s.split_once('^') {
        let base: f64 = base.trim().parse().map_err(|_| bad())?;
        let exp: i32 = exp.trim().parse().map_err(|_| bad())?;
        return Ok(base.powi(exp));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|_| bad())?;
        let den: f64 = den.trim().parse().map_err(|_| bad())?;
        return Ok(num / den);
    }
    s.parse().map_err(|_| bad())
}

/// Uniform grid on a [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: Domain,
    pub h: f64,
}

fn cells(extent: f64, h: f64) -> Result<usize> {
    let n = extent / h;
    let rounded = n.round();
    if !(h > 0.0) || (n - rounded).abs() > 1e-9 * rounded.max(1.0) || rounded < 1.0 {
        return Err(Error::Grid(format!("h = {h} does not divide extent {extent}")));
    }
    Ok(rounded as usize)
}

impl GridSpec {
    pub fn new(domain: Domain, h: f64) -> Result<Self> {
        let g = Self { domain, h };
        g.validate()?;
        Ok(g)
    }

    /// Interval with `n` interior nodes, `h = 1/(n+1)`.
    pub fn interval_nodes(n: usize) -> Result<Self> {
        Self::new(Domain::Interval, 1.0 / (n as f64 + 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, ny) = self.cell_counts()?;
        if let Domain::LShape = self.domain {
            if nx % 2 != 0 {
                return Err(Error::Grid(format!(
                    "L-shape needs an even number of cells per side, got {nx}"
                )));
            }
        }
        if self.domain.is_2d() && ny == 0 {
            return Err(Error::Grid(format!("grid {self} has no cells along y")));
        }
        if self.interior_nodes().is_empty() {
            return Err(Error::Grid(format!("grid {self} has no interior nodes")));
        }
        Ok(())
    }

    /// Cells along x and y of the bounding box (`ny = 0` in 1D).
    pub fn cell_counts(&self) -> Result<(usize, usize)> {
        let (_, ext) = self.domain.bounding_box();
        let nx = cells(ext[0], self.h)?;
        let ny = if self.domain.is_2d() {
            cells(ext[1], self.h)?
        } else {
            0
        };
        Ok((nx, ny))
    }

    fn counts_unchecked(&self) -> (usize, usize) {
        let (_, ext) = self.domain.bounding_box();
        let nx = (ext[0] / self.h).round() as usize;
        let ny = if self.domain.is_2d() {
            (ext[1] / self.h).round() as usize
        } else {
            0
        };
        (nx, ny)
    }

    /// Whether bounding-box node `(i, j)` is an unknown.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let (nx, ny) = self.counts_unchecked();
        match self.domain {
            Domain::Interval => j == 0 && i >= 1 && i < nx,
            Domain::Rectangle { .. } => i >= 1 && i < nx && j >= 1 && j < ny,
            Domain::LShape => {
                let inside_box = i >= 1 && i < nx && j >= 1 && j < ny;
                // nodes with x >= 0 and y >= 0 belong to the removed closed quadrant
                let removed = 2 * i >= nx && 2 * j >= ny;
                inside_box && !removed
            }
        }
    }

    /// Interior nodes in lexicographic order, x fastest.
    pub fn interior_nodes(&self) -> Vec<(usize, usize)> {
        let (nx, ny) = self.counts_unchecked();
        let mut out = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if self.is_interior(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn node_coordinates(&self, (i, j): (usize, usize)) -> [f64; 2] {
        let (lo, _) = self.domain.bounding_box();
        [lo[0] + i as f64 * self.h, lo[1] + j as f64 * self.h]
    }

    pub fn num_unknowns(&self) -> usize {
        self.interior_nodes().len()
    }

    /// Dense lookup from bounding-box node to unknown index.
    pub fn index_map(&self) -> NodeIndex {
        let (nx, ny) = self.counts_unchecked();
        let stride = nx + 1;
        let mut map = vec![usize::MAX; stride * (ny + 1)];
        for (k, (i, j)) in self.interior_nodes().into_iter().enumerate() {
            map[j * stride + i] = k;
        }
        NodeIndex { map, stride, nx, ny }
    }

    /// Next coarser nested grid, if one exists with at least one unknown.
    pub fn coarsened(&self) -> Option<GridSpec> {
        let (nx, ny) = self.counts_unchecked();
        if nx % 2 != 0 || (self.domain.is_2d() && ny % 2 != 0) {
            return None;
        }
        let coarse = GridSpec {
            domain: self.domain,
            h: 2.0 * self.h,
        };
        coarse.validate().ok().map(|_| coarse)
    }

    /// Five-point (2D) or three-point (1D) Dirichlet Laplacian, scaled by `1/h²`.
    pub fn laplacian(&self) -> Result<CsrMatrix> {
        self.validate()?;
        let index = self.index_map();
        let nodes = self.interior_nodes();
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut triplets = Vec::with_capacity(nodes.len() * 5);
        for (row, &(i, j)) in nodes.iter().enumerate() {
            let neighbours: &[(isize, isize)] = if self.domain.is_2d() {
                &[(-1, 0), (1, 0), (0, -1), (0, 1)]
            } else {
                &[(-1, 0), (1, 0)]
            };
            triplets.push((row, row, neighbours.len() as f64 * inv_h2));
            for &(di, dj) in neighbours {
                if let Some(col) = index.lookup(i as isize + di, j as isize + dj) {
                    triplets.push((row, col, -inv_h2));
                }
            }
        }
        CsrMatrix::from_triplets(nodes.len(), nodes.len(), triplets)
    }

    /// Closed-form smallest two discrete eigenvalues, where known.
    pub fn closed_form_eigenvalues(&self) -> Option<(f64, Option<f64>)> {
        let h = self.h;
        let mode = |k: usize, extent: f64| 4.0 / (h * h) * (k as f64 * PI * h / (2.0 * extent)).sin().powi(2);
        match self.domain {
            Domain::Interval => {
                let (nx, _) = self.counts_unchecked();
                let n = nx - 1;
                let l1 = mode(1, 1.0);
                let l2 = (n >= 2).then(|| mode(2, 1.0));
                Some((l1, l2))
            }
            Domain::Rectangle { width, height } => {
                let (nx, ny) = self.counts_unchecked();
                let l1 = mode(1, width) + mode(1, height);
                let mut second = Vec::new();
                if nx >= 3 {
                    second.push(mode(2, width) + mode(1, height));
                }
                if ny >= 3 {
                    second.push(mode(1, width) + mode(2, height));
                }
                let l2 = second.into_iter().reduce(f64::min);
                Some((l1, l2))
            }
            Domain::LShape => None,
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.domain, self.h)
    }
}

impl FromStr for GridSpec {
    type Err = Error;
    /// `domain,h`, e.g. `lshape,2^-6`.
    fn from_str(s: &str) -> Result<Self> {
        let (domain, h) = s
            .rsplit_once(',')
            .ok_or_else(|| Error::Parse(format!("expected `domain,h`, got `{s}`")))?;
        GridSpec::new(domain.parse()?, parse_scalar(h)?)
    }
}

#[derive(Debug, Clone)]
pub struct NodeIndex {
    map: Vec<usize>,
    stride: usize,
    nx: usize,
    ny: usize,
}

impl NodeIndex {
    pub fn lookup(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize > self.nx || j as usize > self.ny {
            return None;
        }
        let k = self.map[j as usize * self.stride + i as usize];
        (k != usize::MAX).then_some(k)
    }
}
