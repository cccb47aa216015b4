//! Affine image augmentation.
//!
//! Transforms act on Cartesian pixel coordinates whose origin is the image
//! center `((W-1)/2, (H-1)/2)`, with x growing to the right (columns) and y
//! growing upward (decreasing row index). A positive rotation angle therefore
//! turns the picture counter-clockwise as displayed, and rotation, scaling and
//! shear are all about the center pixel without any translation term.
//!
//! [`warp`] resamples by inverse mapping with bilinear interpolation;
//! samples falling outside the source contribute the fill value.

use alloc::format;
use alloc::vec::Vec;

use crate::rng::{self, Rng};
use crate::{Error, Result, Tensor};

const SINGULAR_EPS: f64 = 1e-12;
/// Source coordinates this close to an integer are snapped onto it.
const SNAP_EPS: f64 = 1e-9;

/// Linear map plus translation: `p ↦ m·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl Default for AffineTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineTransform {
    pub const IDENTITY: Self = Self {
        m: [[1.0, 0.0], [0.0, 1.0]],
        t: [0.0, 0.0],
    };

    pub fn linear(m: [[f64; 2]; 2]) -> Self {
        Self { m, t: [0.0, 0.0] }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * p[0] + self.m[0][1] * p[1] + self.t[0],
            self.m[1][0] * p[0] + self.m[1][1] * p[1] + self.t[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_invertible(&self) -> bool {
        libm::fabs(self.det()) > SINGULAR_EPS
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(libm::fabs(det) > SINGULAR_EPS) {
            return Err(Error::Argument(format!(
                "affine transform is not invertible (det = {det:e})"
            )));
        }
        let [[a, b], [c, d]] = self.m;
        let m = [[d / det, -b / det], [-c / det, a / det]];
        let t = [
            -(m[0][0] * self.t[0] + m[0][1] * self.t[1]),
            -(m[1][0] * self.t[0] + m[1][1] * self.t[1]),
        ];
        Ok(Self { m, t })
    }

    /// Largest absolute entry difference over `m` and `t`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max(libm::fabs(self.m[i][j] - other.m[i][j]));
            }
            d = d.max(libm::fabs(self.t[i] - other.t[i]));
        }
        d
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be finite, got {v}")))
    }
}

/// Rotation by `alpha` radians about the image center.
pub fn affine_rotation(alpha: f64) -> Result<AffineTransform> {
    check_finite("rotation angle", alpha)?;
    let (s, c) = libm::sincos(alpha);
    Ok(AffineTransform::linear([[c, -s], [s, c]]))
}

/// Independent scaling of the x and y axes about the image center.
pub fn affine_scale(sx: f64, sy: f64) -> Result<AffineTransform> {
    check_finite("x scale", sx)?;
    check_finite("y scale", sy)?;
    if sx == 0.0 || sy == 0.0 {
        return Err(Error::Argument(format!(
            "scale factors must be nonzero, got ({sx}, {sy})"
        )));
    }
    Ok(AffineTransform::linear([[sx, 0.0], [0.0, sy]]))
}

/// Shear with x coefficient `hx` and y coefficient `hy`.
pub fn affine_shear(hx: f64, hy: f64) -> Result<AffineTransform> {
    check_finite("x shear", hx)?;
    check_finite("y shear", hy)?;
    let xf = AffineTransform::linear([[1.0, hx], [hy, 1.0]]);
    if !xf.is_invertible() {
        return Err(Error::Argument(format!(
            "shear ({hx}, {hy}) is singular: hx·hy = 1"
        )));
    }
    Ok(xf)
}

/// Translation by `(dx, dy)` pixels (x right, y up).
pub fn affine_translate(dx: f64, dy: f64) -> Result<AffineTransform> {
    check_finite("x offset", dx)?;
    check_finite("y offset", dy)?;
    Ok(AffineTransform {
        m: AffineTransform::IDENTITY.m,
        t: [dx, dy],
    })
}

/// The transform that applies `b` first, then `a`.
pub fn compose(a: &AffineTransform, b: &AffineTransform) -> AffineTransform {
    let mut m = [[0.0; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j];
        }
    }
    let bt = a.apply(b.t);
    AffineTransform { m, t: bt }
}

fn image_dims(img: &Tensor) -> Result<(usize, usize, usize)> {
    match *img.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(Error::Shape(format!(
            "expected an H×W×C image, got shape {s:?}"
        ))),
    }
}

fn snap(v: f64) -> f64 {
    let r = libm::round(v);
    if libm::fabs(v - r) < SNAP_EPS {
        r
    } else {
        v
    }
}

/// Resamples `img` so that output pixel `p` takes the source value at
/// `xf⁻¹(p)`. Output shape equals input shape.
pub fn warp(img: &Tensor, xf: &AffineTransform, fill: f64) -> Result<Tensor> {
    let (h, w, c) = image_dims(img)?;
    let inv = xf.inverse()?;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let src = img.data();
    let mut out = Vec::with_capacity(src.len());
    let texel = |r: isize, col: isize, ch: usize| -> f64 {
        if r < 0 || col < 0 || r as usize >= h || col as usize >= w {
            fill
        } else {
            src[(r as usize * w + col as usize) * c + ch]
        }
    };
    for row in 0..h {
        for col in 0..w {
            let p = [col as f64 - cx, cy - row as f64];
            let q = inv.apply(p);
            let sc = snap(q[0] + cx);
            let sr = snap(cy - q[1]);
            let c0 = libm::floor(sc);
            let r0 = libm::floor(sr);
            let fx = sc - c0;
            let fy = sr - r0;
            // Far outside the source every tap is fill.
            if !(c0 > -2.0 && r0 > -2.0 && c0 < w as f64 + 1.0 && r0 < h as f64 + 1.0) {
                out.extend(core::iter::repeat_n(fill, c));
                continue;
            }
            let (c0, r0) = (c0 as isize, r0 as isize);
            let w00 = (1.0 - fx) * (1.0 - fy);
            let w01 = fx * (1.0 - fy);
            let w10 = (1.0 - fx) * fy;
            let w11 = fx * fy;
            for ch in 0..c {
                let v00 = texel(r0, c0, ch);
                let v01 = texel(r0, c0 + 1, ch);
                let v10 = texel(r0 + 1, c0, ch);
                let v11 = texel(r0 + 1, c0 + 1, ch);
                let v = w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11;
                let lo = v00.min(v01).min(v10).min(v11);
                let hi = v00.max(v01).max(v10).max(v11);
                out.push(v.clamp(lo, hi));
            }
        }
    }
    Tensor::from_vec(img.shape(), out)
}

/// Mirrors columns: column `j` moves to `W-1-j`.
pub fn flip_horizontal(img: &Tensor) -> Result<Tensor> {
    let (h, w, c) = image_dims(img)?;
    let src = img.data();
    let mut out = Vec::with_capacity(src.len());
    for row in 0..h {
        for col in (0..w).rev() {
            let at = (row * w + col) * c;
            out.extend_from_slice(&src[at..at + c]);
        }
    }
    Tensor::from_vec(img.shape(), out)
}

/// Multiplies every value by `factor` and clamps to `[0, 1]`.
pub fn adjust_brightness(img: &Tensor, factor: f64) -> Result<Tensor> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Argument(format!(
            "brightness factor must be positive and finite, got {factor}"
        )));
    }
    Ok(img.map(|v| (v * factor).clamp(0.0, 1.0)))
}

/// Parameter ranges for [`random_augment`].
///
/// `width_shift` is in pixels, `height_shift` is a fraction of the image
/// height, `rotation_max_deg` bounds a symmetric angle range in degrees, and
/// `zoom` factors below one magnify the picture.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub width_shift: (f64, f64),
    pub height_shift: (f64, f64),
    pub allow_hflip: bool,
    pub rotation_max_deg: f64,
    pub brightness: (f64, f64),
    pub zoom: (f64, f64),
    pub fill_value: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            width_shift: (-200.0, 200.0),
            height_shift: (-0.5, 0.5),
            allow_hflip: true,
            rotation_max_deg: 90.0,
            brightness: (0.2, 1.0),
            zoom: (0.5, 1.0),
            fill_value: 0.0,
            seed: 0,
        }
    }
}

/// The six single-operation recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    HorizontalShift,
    VerticalShift,
    HorizontalFlip,
    Rotation,
    Brightness,
    Zoom,
}

impl Recipe {
    pub const ALL: [Recipe; 6] = [
        Recipe::HorizontalShift,
        Recipe::VerticalShift,
        Recipe::HorizontalFlip,
        Recipe::Rotation,
        Recipe::Brightness,
        Recipe::Zoom,
    ];
}

impl AugmentConfig {
    /// Every range collapsed onto its neutral value; augmenting is a no-op.
    pub fn identity() -> Self {
        Self {
            width_shift: (0.0, 0.0),
            height_shift: (0.0, 0.0),
            allow_hflip: false,
            rotation_max_deg: 0.0,
            brightness: (1.0, 1.0),
            zoom: (1.0, 1.0),
            fill_value: 0.0,
            seed: 0,
        }
    }

    /// Only the given operation enabled, at its default range.
    pub fn recipe(recipe: Recipe) -> Self {
        let d = Self::default();
        let mut cfg = Self::identity();
        match recipe {
            Recipe::HorizontalShift => cfg.width_shift = d.width_shift,
            Recipe::VerticalShift => cfg.height_shift = d.height_shift,
            Recipe::HorizontalFlip => cfg.allow_hflip = true,
            Recipe::Rotation => cfg.rotation_max_deg = d.rotation_max_deg,
            Recipe::Brightness => cfg.brightness = d.brightness,
            Recipe::Zoom => cfg.zoom = d.zoom,
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("width_shift", self.width_shift),
            ("height_shift", self.height_shift),
            ("brightness", self.brightness),
            ("zoom", self.zoom),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Argument(format!(
                    "{name} range must be finite and ordered, got [{lo}, {hi}]"
                )));
            }
        }
        for (name, (lo, _)) in [("brightness", self.brightness), ("zoom", self.zoom)] {
            if lo <= 0.0 {
                return Err(Error::Argument(format!(
                    "{name} range must be strictly positive, got lower bound {lo}"
                )));
            }
        }
        if !(self.rotation_max_deg.is_finite() && self.rotation_max_deg >= 0.0) {
            return Err(Error::Argument(format!(
                "rotation_max_deg must be finite and nonnegative, got {}",
                self.rotation_max_deg
            )));
        }
        check_finite("fill value", self.fill_value)
    }
}

/// Parameters drawn by one [`random_augment`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub dx: f64,
    pub dy: f64,
    pub hflip: bool,
    pub angle_deg: f64,
    pub zoom: f64,
    pub brightness: f64,
}

impl AugmentDraw {
    /// Samples, in order: horizontal shift, vertical shift, flip coin,
    /// rotation angle, zoom factor, brightness factor. Shifts are clipped to
    /// the image extent.
    pub fn sample(cfg: &AugmentConfig, height: usize, width: usize, rng: &mut Rng) -> Self {
        let (w, h) = (width as f64, height as f64);
        let dx = rng::uniform(rng, cfg.width_shift.0, cfg.width_shift.1).clamp(-w, w);
        let dy = (rng::uniform(rng, cfg.height_shift.0, cfg.height_shift.1) * h).clamp(-h, h);
        let hflip = rng::coin(rng) && cfg.allow_hflip;
        let angle_deg = rng::uniform(rng, -cfg.rotation_max_deg, cfg.rotation_max_deg);
        let zoom = rng::uniform(rng, cfg.zoom.0, cfg.zoom.1);
        let brightness = rng::uniform(rng, cfg.brightness.0, cfg.brightness.1);
        Self {
            dx,
            dy,
            hflip,
            angle_deg,
            zoom,
            brightness,
        }
    }

    /// Flip, then zoom, then rotate, then shift, as a single transform.
    pub fn transform(&self) -> Result<AffineTransform> {
        let flip = if self.hflip {
            affine_scale(-1.0, 1.0)?
        } else {
            AffineTransform::IDENTITY
        };
        let zoom = affine_scale(1.0 / self.zoom, 1.0 / self.zoom)?;
        let rot = affine_rotation(self.angle_deg.to_radians())?;
        let shift = affine_translate(self.dx, self.dy)?;
        Ok(compose(&shift, &compose(&rot, &compose(&zoom, &flip))))
    }
}

/// Draws one random variant of `img` with a single warp followed by the
/// brightness change. Output shape equals input shape.
pub fn random_augment(img: &Tensor, cfg: &AugmentConfig, rng: &mut Rng) -> Result<Tensor> {
    let (h, w, _) = image_dims(img)?;
    cfg.validate()?;
    let draw = AugmentDraw::sample(cfg, h, w, rng);
    let warped = warp(img, &draw.transform()?, cfg.fill_value)?;
    adjust_brightness(&warped, draw.brightness)
}
