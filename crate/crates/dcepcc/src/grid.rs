//! Regular grids of conic scores for contour plots.

use std::fmt::Write as _;

use dcepcc_core::data::Standardizer;
use dcepcc_core::model::{ClassifierHead, ConicHead, Model};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Grid over the head's feature space; the network is bypassed.
    Feature,
    /// Grid over raw inputs, passed through the standardizer and network.
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub class: usize,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bounds: [f64; 4],
    pub resolution: usize,
    pub space: Space,
    /// Coordinates spanned by the grid; required when the space has more
    /// than two dimensions.
    pub axes: Option<(usize, usize)>,
}

/// CSV text `x,y,g,inside` with one row per cell center, row-major in `y`
/// then `x`. Coordinates off the two axes are held at the class center in
/// feature space and at the training mean in input space.
pub fn grid_csv(model: &Model<ConicHead>, standardizer: Option<&Standardizer>, spec: &GridSpec) -> CliResult<String> {
    let head = &model.head;
    if spec.class >= head.num_classes() {
        return Err(CliError::Usage(format!("class {} out of range (model has {})", spec.class, head.num_classes())));
    }
    if spec.resolution == 0 {
        return Err(CliError::Usage("resolution must be ≥ 1".into()));
    }
    let [x0, x1, y0, y1] = spec.bounds;
    if !(spec.bounds.iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1) {
        return Err(CliError::Usage("bounds must be finite with min < max".into()));
    }
    let (dim, base) = match spec.space {
        Space::Feature => (head.feature_dim(), head.center(spec.class).to_vec()),
        Space::Input => {
            let d = model.net.input_dim();
            (d, standardizer.map(|s| s.mean.clone()).unwrap_or_else(|| vec![0.0; d]))
        }
    };
    let (ax, ay) = match spec.axes {
        Some((a, b)) if a < dim && b < dim && a != b => (a, b),
        Some((a, b)) => return Err(CliError::Usage(format!("axes {a},{b} invalid for dimension {dim}"))),
        None if dim == 2 => (0, 1),
        None => return Err(CliError::Usage(format!("space has dimension {dim}; select two coordinates with --axes"))),
    };

    let r = spec.resolution;
    let mut out = String::from("x,y,g,inside\n");
    let mut point = base;
    for j in 0..r {
        let y = y0 + (j as f64 + 0.5) * (y1 - y0) / r as f64;
        for i in 0..r {
            let x = x0 + (i as f64 + 0.5) * (x1 - x0) / r as f64;
            point[ax] = x;
            point[ay] = y;
            let g = match spec.space {
                Space::Feature => head.score(spec.class, &point),
                Space::Input => {
                    let z = match standardizer {
                        Some(s) => s.apply_row(&point)?,
                        None => point.clone(),
                    };
                    model.scores(&z)?[spec.class]
                }
            };
            writeln!(out, "{x},{y},{g},{}", u8::from(g >= 0.0)).expect("write to string");
        }
    }
    Ok(out)
}
