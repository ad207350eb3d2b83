//! Radial kernels with closed-form first-argument gradients.
//!
//! Every family here is a function of the squared distance `s = |x - y|^2`, so
//! evaluation and gradient share one distance computation:
//! `grad_x k(x, y) = factor(s) * (x - y)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::points::check_point;
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Matern32,
    #[serde(rename = "imq")]
    InverseMultiquadric,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::InverseMultiquadric => "imq",
        }
    }
}

/// A stationary kernel with lengthscale `l`.
///
/// * Gaussian: `exp(-r^2 / (2 l^2))`
/// * Matern-3/2: `(1 + sqrt(3) r / l) exp(-sqrt(3) r / l)`
/// * inverse multiquadric: `(c^2 + r^2 / l^2)^(-1/2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel<T> {
    family: KernelFamily,
    lengthscale: T,
    offset: T,
}

impl<T: Scalar> Kernel<T> {
    pub fn gaussian(lengthscale: T) -> Result<Self> {
        Self::build(KernelFamily::Gaussian, lengthscale, T::one())
    }

    pub fn matern32(lengthscale: T) -> Result<Self> {
        Self::build(KernelFamily::Matern32, lengthscale, T::one())
    }

    pub fn inverse_multiquadric(lengthscale: T, offset: T) -> Result<Self> {
        Self::build(KernelFamily::InverseMultiquadric, lengthscale, offset)
    }

    fn build(family: KernelFamily, lengthscale: T, offset: T) -> Result<Self> {
        if !(lengthscale > T::zero()) || !lengthscale.is_finite() {
            return Err(invalid("lengthscale", format!("must be positive, got {lengthscale}")));
        }
        if !(offset > T::zero()) || !offset.is_finite() {
            return Err(invalid("offset", format!("must be positive, got {offset}")));
        }
        Ok(Self {
            family,
            lengthscale,
            offset,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> T {
        self.lengthscale
    }

    /// IMQ offset `c`; 1 for the other families.
    pub fn offset(&self) -> T {
        self.offset
    }

    /// Kernel value as a function of squared distance.
    #[inline]
    pub fn value_sq(&self, sq: T) -> T {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::Gaussian => (-sq / (l2 + l2)).exp(),
            KernelFamily::Matern32 => {
                let s = T::of(3.0).sqrt() * sq.sqrt() / self.lengthscale;
                (T::one() + s) * (-s).exp()
            }
            KernelFamily::InverseMultiquadric => (self.offset * self.offset + sq / l2).sqrt().recip(),
        }
    }

    /// Kernel value and gradient factor `f` with `grad_x k = f * (x - y)`.
    #[inline]
    pub fn value_and_factor_sq(&self, sq: T) -> (T, T) {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::Gaussian => {
                let k = (-sq / (l2 + l2)).exp();
                (k, -k / l2)
            }
            KernelFamily::Matern32 => {
                // r = 0 takes the analytic limit; the factor is smooth there.
                let s = T::of(3.0).sqrt() * sq.sqrt() / self.lengthscale;
                let e = (-s).exp();
                ((T::one() + s) * e, -T::of(3.0) / l2 * e)
            }
            KernelFamily::InverseMultiquadric => {
                let base = self.offset * self.offset + sq / l2;
                let k = base.sqrt().recip();
                (k, -k * k * k / l2)
            }
        }
    }

    /// `k(x, y)` without input validation.
    #[inline]
    pub fn eval_raw(&self, x: &[T], y: &[T]) -> T {
        self.value_sq(sq_dist(x, y))
    }

    /// Adds `scale * grad_x k(x, y)` to `out`, returning `k(x, y)`.
    #[inline]
    pub fn add_grad1_raw(&self, x: &[T], y: &[T], scale: T, out: &mut [T]) -> T {
        let (k, f) = self.value_and_factor_sq(sq_dist(x, y));
        let f = f * scale;
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = *o + f * (*a - *b);
        }
        k
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        check_point(x, x.len())?;
        check_point(y, x.len())?;
        Ok(self.eval_raw(x, y))
    }

    /// Gradient of `k(x, y)` with respect to `x`.
    pub fn grad1(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        check_point(x, x.len())?;
        check_point(y, x.len())?;
        let mut out = vec![T::zero(); x.len()];
        self.add_grad1_raw(x, y, T::one(), &mut out);
        Ok(out)
    }

    /// Uniform bound on `k(x,x)`, the mixed second partials and the mixed fourth
    /// partials along the diagonal.
    ///
    /// For a radial profile `g(s)` of the squared distance the diagonal values are
    /// `g(0)`, `2|g'(0)| / l^2` and `12 |g''(0)| / l^4` (the `r = l` fourth partial
    /// dominates the `r != l` one). Matern-3/2 has no fourth derivative at the
    /// diagonal; its bound covers the value and the second partials only.
    pub fn kappa_bound(&self) -> T {
        let l2 = self.lengthscale * self.lengthscale;
        let l4 = l2 * l2;
        match self.family {
            KernelFamily::Gaussian => T::one().max(l2.recip()).max(T::of(3.0) / l4),
            KernelFamily::Matern32 => T::one().max(T::of(3.0) / l2),
            KernelFamily::InverseMultiquadric => {
                let c = self.offset;
                c.recip()
                    .max((c * c * c * l2).recip())
                    .max(T::of(9.0) / (c.powi(5) * l4))
            }
        }
    }

    /// `sup_{x,y} |d k(x, y) / d x_l|`, the first-derivative bound.
    pub fn first_derivative_bound(&self) -> T {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::Gaussian => (-T::of(0.5)).exp() / l,
            KernelFamily::Matern32 => T::of(3.0).sqrt() / (l * T::of(1.0).exp()),
            KernelFamily::InverseMultiquadric => {
                let c = self.offset;
                let u = c / T::of(2.0).sqrt();
                u / (l * (c * c + u * u).powf(T::of(1.5)))
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Kernel<U> {
        Kernel {
            family: self.family,
            lengthscale: U::of(self.lengthscale.to_f64_lossy()),
            offset: U::of(self.offset.to_f64_lossy()),
        }
    }
}

impl<T: Scalar> fmt::Display for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::InverseMultiquadric => {
                write!(f, "imq:ℓ={},c={}", self.lengthscale, self.offset)
            }
            fam => write!(f, "{}:ℓ={}", fam.name(), self.lengthscale),
        }
    }
}

/// Parsed kernel specification string, e.g. `gaussian:ℓ=1` or
/// `imq:ℓ=0.5,c=2,centered`. `l=` and `lengthscale=` are accepted for `ℓ=`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kernel: Kernel<f64>,
    pub centered: bool,
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let perr = |reason: String| Error::Parse {
            what: "kernel spec",
            reason,
        };
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| perr(format!("`{s}` has no `family:` prefix")))?;
        let mut lengthscale = None;
        let mut offset = None;
        let mut centered = false;
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "centered" {
                centered = true;
                continue;
            }
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| perr(format!("expected key=value, got `{part}`")))?;
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| perr(format!("`{val}` is not a number")))?;
            match key.trim() {
                "ℓ" | "l" | "lengthscale" => lengthscale = Some(v),
                "c" => offset = Some(v),
                other => return Err(perr(format!("unknown key `{other}`"))),
            }
        }
        let l = lengthscale.ok_or_else(|| perr("missing lengthscale `ℓ=`".into()))?;
        let kernel = match family.trim() {
            "gaussian" => Kernel::gaussian(l)?,
            "matern32" => Kernel::matern32(l)?,
            "imq" => {
                let c = offset.ok_or_else(|| perr("imq requires `c=`".into()))?;
                Kernel::inverse_multiquadric(l, c)?
            }
            other => {
                return Err(perr(format!(
                    "unknown family `{other}` (expected gaussian, matern32, imq)"
                )))
            }
        };
        if offset.is_some() && kernel.family != KernelFamily::InverseMultiquadric {
            return Err(perr("`c=` only applies to imq".into()));
        }
        Ok(Self { kernel, centered })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kernel)?;
        if self.centered {
            write!(f, ",centered")?;
        }
        Ok(())
    }
}
