//! The diffusion switch: an extended Heaviside with H(0) = 0, or its C^1
//! cubic regularization with transition width 1/n. Either way the switch
//! vanishes exactly at contact, which is what freezes contacted nodes.

use crate::error::{Error, Result};
use crate::grid::Field;

/// Which switch the scheme applies to u - u^c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchVariant {
    Exact,
    /// Cubic ramp on [0, 1/n]; n >= 1.
    Smoothed {
        n: u32,
    },
}

impl std::fmt::Display for SwitchVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SwitchVariant::Exact => write!(f, "exact"),
            SwitchVariant::Smoothed { n } => write!(f, "eta:{n}"),
        }
    }
}

/// Extended Heaviside: 1 for r > 0, 0 for r <= 0. Strict at the origin,
/// with no floating-point tolerance; the clip makes contact exact in
/// machine numbers, so equality really means "switched off".
#[inline]
pub fn heaviside_exact(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// C^1 ramp: 0 below 0, `-2n^3 r^3 + 3n^2 r^2` on [0, 1/n], 1 above.
pub fn eta(r: f64, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!(
            "smoothing parameter must be >= 1, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(if r <= 0.0 {
        0.0
    } else if r > 1.0 / nf {
        1.0
    } else {
        (-2.0 * nf * nf * nf * r + 3.0 * nf * nf) * r * r
    })
}

/// Pointwise switch of u - u^c; boundary entries are fixed to 0 so the
/// implicit system keeps identity rows there.
pub fn switch_field(u: &Field, uc: &Field, variant: SwitchVariant) -> Result<Field> {
    u.same_grid(uc)?;
    let grid = *u.grid();
    let mut z = Field::zeros(&grid);
    for i in 0..grid.node_count() {
        if !grid.is_interior(i) {
            continue;
        }
        let r = u.values()[i] - uc.values()[i];
        z.values_mut()[i] = match variant {
            SwitchVariant::Exact => heaviside_exact(r),
            SwitchVariant::Smoothed { n } => eta(r, n)?,
        };
    }
    Ok(z)
}
