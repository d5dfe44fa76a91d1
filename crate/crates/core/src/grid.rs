//! Masked Cartesian grids in two dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Values of a function on the masked cells of a uniform grid.
///
/// Cells are stored row-major: index `j * nx + i`, with cell centre
/// `origin + ((i + 0.5) dx, (j + 0.5) dx)`. Unmasked values are held at zero
/// and never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldJson", into = "FieldJson")]
pub struct ScalarField {
    dx: f64,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    mask: Vec<bool>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FieldJson {
    dx: f64,
    nx: usize,
    ny: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<[f64; 2]>,
    mask: Vec<u8>,
    values: Vec<f64>,
}

impl From<ScalarField> for FieldJson {
    fn from(f: ScalarField) -> Self {
        Self {
            dx: f.dx,
            nx: f.nx,
            ny: f.ny,
            origin: Some(f.origin),
            mask: f.mask.iter().map(|&m| m as u8).collect(),
            values: f.values,
        }
    }
}

impl TryFrom<FieldJson> for ScalarField {
    type Error = Error;

    fn try_from(j: FieldJson) -> Result<Self> {
        let mask = j
            .mask
            .iter()
            .map(|&m| match m {
                0 => Ok(false),
                1 => Ok(true),
                other => invalid(format!("mask entries must be 0 or 1, got {other}")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(j.dx, j.nx, j.ny, j.origin.unwrap_or([0.0, 0.0]), mask, j.values)
    }
}

impl ScalarField {
    pub fn new(
        dx: f64,
        nx: usize,
        ny: usize,
        origin: [f64; 2],
        mask: Vec<bool>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return invalid(format!("grid spacing must be positive, got {dx}"));
        }
        if nx == 0 || ny == 0 {
            return invalid("grid dimensions must be positive");
        }
        if mask.len() != nx * ny || values.len() != nx * ny {
            return invalid(format!(
                "mask/values length must be nx*ny = {}, got {} and {}",
                nx * ny,
                mask.len(),
                values.len()
            ));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyDomain);
        }
        for (k, v) in values.iter_mut().enumerate() {
            if mask[k] {
                if !v.is_finite() {
                    return invalid(format!("non-finite value at cell {k}"));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Self { dx, nx, ny, origin, mask, values })
    }

    /// Field that is zero on the given mask.
    pub fn zeros(dx: f64, nx: usize, ny: usize, origin: [f64; 2], mask: Vec<bool>) -> Result<Self> {
        let n = mask.len();
        Self::new(dx, nx, ny, origin, mask, vec![0.0; n])
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dx
    }
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
    pub fn measure(&self) -> f64 {
        self.masked_count() as f64 * self.cell_area()
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn center(&self, k: usize) -> [f64; 2] {
        let i = k % self.nx;
        let j = k / self.nx;
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dx,
        ]
    }
    pub fn is_masked(&self, k: usize) -> bool {
        self.mask[k]
    }

    /// Value at cell `(i, j)`, zero outside the mask or the box.
    pub fn get(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return 0.0;
        }
        self.values[j as usize * self.nx + i as usize]
    }

    /// Masked values in cell order.
    pub fn masked_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn max_value(&self) -> f64 {
        self.masked_values().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min_value(&self) -> f64 {
        self.masked_values().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Same grid and mask with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.dx, self.nx, self.ny, self.origin, self.mask.clone(), values)
    }

    /// Same grid and mask with values from a function of the cell centre.
    pub fn from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..self.values.len())
            .map(|k| {
                if self.mask[k] {
                    let c = self.center(k);
                    f(c[0], c[1])
                } else {
                    0.0
                }
            })
            .collect();
        self.with_values(values)
    }

    /// Pointwise map of the masked values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for k in 0..out.values.len() {
            if out.mask[k] {
                out.values[k] = f(out.values[k]);
            }
        }
        out
    }

    /// Cell sum of `g(|v|)` times the cell area.
    pub fn integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.masked_values().into_iter().map(|v| g(v.abs())).sum::<f64>() * self.cell_area()
    }

    /// Discrete L^q norm over the mask.
    pub fn lq_norm(&self, q: f64) -> f64 {
        self.integral(|v| v.powf(q)).powf(1.0 / q)
    }

    /// True when the mask and grid geometry coincide.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.dx == other.dx
            && self.origin == other.origin
            && self.mask == other.mask
    }

    /// Centroid of the masked cells.
    pub fn centroid(&self) -> [f64; 2] {
        let mut c = [0.0, 0.0];
        let mut n = 0.0;
        for k in 0..self.mask.len() {
            if self.mask[k] {
                let p = self.center(k);
                c[0] += p[0];
                c[1] += p[1];
                n += 1.0;
            }
        }
        [c[0] / n, c[1] / n]
    }

    /// Fraenkel-type asymmetry: measure of the symmetric difference between
    /// the mask and the equal-area disk at the centroid, divided by the area.
    pub fn disk_asymmetry(&self) -> f64 {
        let c = self.centroid();
        let r = (self.measure() / std::f64::consts::PI).sqrt();
        let mut diff = 0usize;
        for k in 0..self.mask.len() {
            let p = self.center(k);
            let inside = (p[0] - c[0]).hypot(p[1] - c[1]) < r;
            if inside != self.mask[k] {
                diff += 1;
            }
        }
        // Disk cells outside the bounding box are all outside the mask.
        let box_disk = self.disk_cells_outside_box(c, r);
        (diff + box_disk) as f64 * self.cell_area() / self.measure()
    }

    fn disk_cells_outside_box(&self, c: [f64; 2], r: f64) -> usize {
        let x0 = self.origin[0];
        let y0 = self.origin[1];
        let x1 = x0 + self.nx as f64 * self.dx;
        let y1 = y0 + self.ny as f64 * self.dx;
        if c[0] - r >= x0 && c[0] + r <= x1 && c[1] - r >= y0 && c[1] + r <= y1 {
            return 0;
        }
        let lo_i = ((c[0] - r - x0) / self.dx).floor() as isize - 1;
        let hi_i = ((c[0] + r - x0) / self.dx).ceil() as isize + 1;
        let lo_j = ((c[1] - r - y0) / self.dx).floor() as isize - 1;
        let hi_j = ((c[1] + r - y0) / self.dx).ceil() as isize + 1;
        let mut n = 0;
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                let inside_box =
                    i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny;
                if inside_box {
                    continue;
                }
                let px = x0 + (i as f64 + 0.5) * self.dx;
                let py = y0 + (j as f64 + 0.5) * self.dx;
                if (px - c[0]).hypot(py - c[1]) < r {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a plain PGM/PBM mask (`P1` or `P2`, nonzero = inside) and a CSV
    /// of values with one grid row per line. The first image row is the top
    /// row of the grid.
    pub fn from_pgm_csv(pgm: &str, csv: &str, dx: f64) -> Result<Self> {
        let tokens: Vec<&str> = pgm
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .collect();
        let magic = *tokens.first().ok_or_else(|| Error::Invalid("empty PGM".into()))?;
        let header = match magic {
            "P1" => 3,
            "P2" => 4,
            other => return invalid(format!("unsupported PGM magic {other}")),
        };
        let parse = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Invalid(format!("bad PGM token {s}")))
        };
        if tokens.len() < header {
            return invalid("truncated PGM header");
        }
        let nx = parse(tokens[1])?;
        let ny = parse(tokens[2])?;
        let body = &tokens[header..];
        if body.len() != nx * ny {
            return invalid(format!("PGM has {} pixels, expected {}", body.len(), nx * ny));
        }
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Invalid(format!("bad CSV value {t}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        if rows.len() != ny || rows.iter().any(|r| r.len() != nx) {
            return invalid(format!("CSV must have {ny} rows of {nx} values"));
        }
        let mut mask = vec![false; nx * ny];
        let mut values = vec![0.0; nx * ny];
        for row in 0..ny {
            let j = ny - 1 - row;
            for i in 0..nx {
                mask[j * nx + i] = parse(body[row * nx + i])? != 0;
                values[j * nx + i] = rows[row][i];
            }
        }
        Self::new(dx, nx, ny, [0.0, 0.0], mask, values)
    }
}

/// Planar domains used by the fixture library, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk { radius: f64 },
    Rectangle { width: f64, height: f64 },
    /// Square of side `side` with the upper-right quadrant removed.
    LShape { side: f64 },
}

impl Shape {
    pub fn unit_disk() -> Self {
        Shape::Disk { radius: 1.0 }
    }

    pub fn disk_with_area(area: f64) -> Self {
        Shape::Disk { radius: (area / std::f64::consts::PI).sqrt() }
    }

    pub fn square_with_area(area: f64) -> Self {
        let s = area.sqrt();
        Shape::Rectangle { width: s, height: s }
    }

    /// Rectangle with `width / height = aspect`.
    pub fn rectangle_with_area(area: f64, aspect: f64) -> Self {
        let h = (area / aspect).sqrt();
        Shape::Rectangle { width: aspect * h, height: h }
    }

    pub fn l_shape_with_area(area: f64) -> Self {
        Shape::LShape { side: (4.0 * area / 3.0).sqrt() }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => std::f64::consts::PI * radius * radius,
            Shape::Rectangle { width, height } => width * height,
            Shape::LShape { side } => 0.75 * side * side,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disk { radius } => x.hypot(y) < radius,
            Shape::Rectangle { width, height } => x.abs() < width / 2.0 && y.abs() < height / 2.0,
            Shape::LShape { side } => {
                let h = side / 2.0;
                x.abs() < h && y.abs() < h && !(x > 0.0 && y > 0.0)
            }
        }
    }

    fn half_extent(&self) -> [f64; 2] {
        match *self {
            Shape::Disk { radius } => [radius, radius],
            Shape::Rectangle { width, height } => [width / 2.0, height / 2.0],
            Shape::LShape { side } => [side / 2.0, side / 2.0],
        }
    }

    /// Rasterizes the shape: a cell is inside when its centre is. The box
    /// carries at least one layer of outside cells on every side and the grid
    /// is symmetric about the origin.
    pub fn rasterize(&self, dx: f64) -> Result<ScalarField> {
        if !(dx > 0.0) {
            return invalid(format!("grid spacing must be positive, got {dx}"));
        }
        let ext = self.half_extent();
        let half_x = (ext[0] / dx).ceil() as usize + 1;
        let half_y = (ext[1] / dx).ceil() as usize + 1;
        let nx = 2 * half_x;
        let ny = 2 * half_y;
        let origin = [-(half_x as f64) * dx, -(half_y as f64) * dx];
        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let x = origin[0] + (i as f64 + 0.5) * dx;
                let y = origin[1] + (j as f64 + 0.5) * dx;
                mask[j * nx + i] = self.contains(x, y);
            }
        }
        ScalarField::zeros(dx, nx, ny, origin, mask)
    }
}

/// Named domain of the fixture library; all have area π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    Disk,
    Square,
    LShape,
    Rect2,
    Rect4,
    Rect8,
    Rect16,
}

impl Fixture {
    pub const ALL: [Fixture; 7] = [
        Fixture::Disk,
        Fixture::Square,
        Fixture::LShape,
        Fixture::Rect2,
        Fixture::Rect4,
        Fixture::Rect8,
        Fixture::Rect16,
    ];

    pub fn shape(&self) -> Shape {
        let a = std::f64::consts::PI;
        match self {
            Fixture::Disk => Shape::disk_with_area(a),
            Fixture::Square => Shape::square_with_area(a),
            Fixture::LShape => Shape::l_shape_with_area(a),
            Fixture::Rect2 => Shape::rectangle_with_area(a, 2.0),
            Fixture::Rect4 => Shape::rectangle_with_area(a, 4.0),
            Fixture::Rect8 => Shape::rectangle_with_area(a, 8.0),
            Fixture::Rect16 => Shape::rectangle_with_area(a, 16.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Fixture::Disk => "disk",
            Fixture::Square => "square",
            Fixture::LShape => "l_shape",
            Fixture::Rect2 => "rect2",
            Fixture::Rect4 => "rect4",
            Fixture::Rect8 => "rect8",
            Fixture::Rect16 => "rect16",
        }
    }

    pub fn aspect(&self) -> Option<f64> {
        match self {
            Fixture::Rect2 => Some(2.0),
            Fixture::Rect4 => Some(4.0),
            Fixture::Rect8 => Some(8.0),
            Fixture::Rect16 => Some(16.0),
            Fixture::Square => Some(1.0),
            _ => None,
        }
    }

    pub fn mask(&self, dx: f64) -> Result<ScalarField> {
        self.shape().rasterize(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_measure_converges() {
        let f = Shape::unit_disk().rasterize(1.0 / 128.0).unwrap();
        assert!((f.measure() - PI).abs() < 2e-3);
        let c = f.centroid();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn fixtures_have_area_pi() {
        for fx in Fixture::ALL {
            assert!((fx.shape().area() - PI).abs() < 1e-12, "{}", fx.name());
            let m = fx.mask(1.0 / 64.0).unwrap();
            assert!((m.measure() - PI).abs() / PI < 0.03, "{} {}", fx.name(), m.measure());
        }
    }

    #[test]
    fn padding_layer_present() {
        let f = Fixture::Square.mask(0.1).unwrap();
        for i in 0..f.nx() {
            assert!(!f.is_masked(f.index(i, 0)));
            assert!(!f.is_masked(f.index(i, f.ny() - 1)));
        }
        for j in 0..f.ny() {
            assert!(!f.is_masked(f.index(0, j)));
            assert!(!f.is_masked(f.index(f.nx() - 1, j)));
        }
    }

    #[test]
    fn asymmetry_separates_disk_from_square() {
        let d = Fixture::Disk.mask(1.0 / 64.0).unwrap();
        let s = Fixture::Square.mask(1.0 / 64.0).unwrap();
        assert!(d.disk_asymmetry() < 0.02);
        assert!(s.disk_asymmetry() > 0.1);
    }

    #[test]
    fn json_round_trip() {
        let f = Shape::unit_disk().rasterize(0.25).unwrap();
        let f = f.from_fn(|x, y| 1.0 - x.hypot(y)).unwrap();
        let g = ScalarField::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn pgm_csv_reading() {
        let pgm = "P1\n3 2\n0 1 1\n1 1 0\n";
        let csv = "0,2,3\n4,5,0\n";
        let f = ScalarField::from_pgm_csv(pgm, csv, 0.5).unwrap();
        assert_eq!(f.masked_count(), 4);
        // bottom row of the grid is the last image row
        assert_eq!(f.get(0, 0), 4.0);
        assert_eq!(f.get(2, 1), 3.0);
        assert!((f.measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            ScalarField::zeros(0.1, 2, 1, [0.0; 2], vec![false, false]),
            Err(Error::EmptyDomain)
        ));
        assert!(ScalarField::zeros(-1.0, 1, 1, [0.0; 2], vec![true]).is_err());
        assert!(ScalarField::from_json(r#"{"dx":1,"nx":1,"ny":1,"mask":[2],"values":[0]}"#).is_err());
    }
}
