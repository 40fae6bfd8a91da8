use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{NumericError, Result};

/// Orientation of the march: forward from t_min, or backward from t_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub t: (f64, f64),
    pub nt: usize,
    pub direction: Direction,
}

impl Grid {
    pub fn new(
        x: (f64, f64),
        y: (f64, f64),
        nx: usize,
        ny: usize,
        t: (f64, f64),
        nt: usize,
        direction: Direction,
    ) -> Result<Grid> {
        let g = Grid { x, y, nx, ny, t, nt, direction };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NumericError::Grid(m.to_string()));
        if self.nx < 41 || self.ny < 41 || self.nx % 2 == 0 || self.ny % 2 == 0 {
            return bad("node counts must be odd and at least 41");
        }
        if !(self.x.1 > self.x.0 && self.y.1 > self.y.0 && self.t.1 > self.t.0) {
            return bad("empty range");
        }
        if self.nt == 0 {
            return bad("need at least one time step");
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x.1 - self.x.0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y.1 - self.y.0) / (self.ny - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t.1 - self.t.0) / self.nt as f64
    }

    pub fn xs(&self, i: usize) -> f64 {
        self.x.0 + i as f64 * self.hx()
    }

    pub fn ys(&self, j: usize) -> f64 {
        self.y.0 + j as f64 * self.hy()
    }

    pub fn ts(&self, n: usize) -> f64 {
        self.t.0 + n as f64 * self.dt()
    }

    pub fn slab_len(&self) -> usize {
        self.nx * self.ny
    }

    /// Same grid with spacing and step halved.
    pub fn refined(&self) -> Grid {
        Grid {
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
            nt: 2 * self.nt,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Fd,
    ClosedForm,
    Transformed,
}

/// Nodal values, slab n holding time `grid.ts(n)`; index (i, j) is x-major.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl Field {
    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(grid: &Grid, provenance: Provenance, f: F) -> Field {
        let mut values = Vec::with_capacity((grid.nt + 1) * grid.slab_len());
        for n in 0..=grid.nt {
            let t = grid.ts(n);
            for i in 0..grid.nx {
                for j in 0..grid.ny {
                    values.push(f(t, grid.xs(i), grid.ys(j)));
                }
            }
        }
        Field { grid: grid.clone(), values, provenance }
    }

    #[inline]
    pub fn index(&self, n: usize, i: usize, j: usize) -> usize {
        (n * self.grid.nx + i) * self.grid.ny + j
    }

    #[inline]
    pub fn at(&self, n: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(n, i, j)]
    }

    pub fn slab(&self, n: usize) -> &[f64] {
        let l = self.grid.slab_len();
        &self.values[n * l..(n + 1) * l]
    }

    pub fn check_finite(&self) -> Result<()> {
        let l = self.grid.slab_len();
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(NumericError::NonFinite {
                step: k / l,
                t: self.grid.ts(k / l),
            }),
        }
    }

    /// CSV `t,x,y,u`, t-major then x then y, 17 significant digits.
    /// `y_index` restricts to one y line.
    pub fn write_csv<W: Write>(&self, mut w: W, y_index: Option<usize>) -> Result<()> {
        writeln!(w, "t,x,y,u")?;
        let js: Vec<usize> = match y_index {
            Some(j) => vec![j],
            None => (0..self.grid.ny).collect(),
        };
        for n in 0..=self.grid.nt {
            let t = self.grid.ts(n);
            for i in 0..self.grid.nx {
                let x = self.grid.xs(i);
                for &j in &js {
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{:.16e},{:.16e}",
                        t,
                        x,
                        self.grid.ys(j),
                        self.at(n, i, j)
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// max|a − b| / max(max|b|, 1e-12) over paired entries.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}
