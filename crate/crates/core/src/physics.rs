//! Converter parameters and closed-form modulation-depth formulas.
//!
//! A received microwave field `E_w(t) = |E_w| sin(ω_w t + b)` perturbs the
//! permittivity of the waveguide section inside each modulating element.
//! A photon entering an element of width `W` at time `t` leaves with the
//! phase `k_op W + δθ sin(ω_w t + φ + b)` where
//!
//! ```text
//! δθ = -(ω_op ε_op r33 γ / ω_w) sin(ω_w √ε_op W / 2c) |E_w|
//! φ  =  ω_w √ε_op W / 2c
//! ```
//!
//! The optimum width maximises `|sin(ω_w √ε_op W / 2c)|`, i.e. the optical
//! transit through one element lasts half a microwave period:
//! `W_o = π c / (ω_w √ε_op)`. At twice that width the depth vanishes.
//! Elements repeated at `D_o = 2 W_o` see the field at the same microwave
//! phase and their depths add: `δθ_N = N δθ`.
//!
//! Note that the widely quoted `W_o = π c / (2 ω_w √ε_op)` is off by a factor
//! of two; it contradicts both the 2.9 mm width quoted for 30 GHz and the
//! `π/2`, `3π/2` section offsets of the two-section cascade. Everything here
//! uses the self-consistent `W_o = π c / (ω_w √ε_op)`, `D_o = 2 W_o`.

use std::f64::consts::{PI, TAU};

use crate::error::{check_finite, check_positive, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Congruent LiNbO3 Pockels coefficient r33 (m/V).
pub const DEFAULT_R33: f64 = 30.8e-12;

/// Carrier ratios below this trigger a warning; the sideband picture assumes `ω_op ≫ ω_w`.
pub const MIN_CARRIER_RATIO: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    eps_op: f64,
    r33: f64,
}

impl MaterialParams {
    pub fn new(eps_op: f64, r33: f64) -> Result<Self> {
        check_finite("eps_op", eps_op)?;
        if eps_op <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "eps_op",
                constraint: format!("must be > 1, got {eps_op}"),
            });
        }
        check_positive("r33", r33)?;
        Ok(Self { eps_op, r33 })
    }

    /// Builds the material from a refractive index, `ε_op = n_op²`.
    pub fn from_index(n_op: f64, r33: f64) -> Result<Self> {
        check_finite("n_op", n_op)?;
        Self::new(n_op * n_op, r33)
    }

    pub fn eps_op(&self) -> f64 {
        self.eps_op
    }

    pub fn r33(&self) -> f64 {
        self.r33
    }

    pub fn n_op(&self) -> f64 {
        self.eps_op.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carriers {
    f_w: f64,
    lambda_op: f64,
}

impl Carriers {
    pub fn new(f_w: f64, lambda_op: f64) -> Result<Self> {
        check_positive("f_w", f_w)?;
        check_positive("lambda_op", lambda_op)?;
        let carriers = Self { f_w, lambda_op };
        let ratio = carriers.carrier_ratio();
        if ratio <= MIN_CARRIER_RATIO {
            log::warn!("optical/microwave carrier ratio {ratio:.1} is not >> 1");
        }
        Ok(carriers)
    }

    pub fn f_w(&self) -> f64 {
        self.f_w
    }

    pub fn lambda_op(&self) -> f64 {
        self.lambda_op
    }

    pub fn omega_w(&self) -> f64 {
        TAU * self.f_w
    }

    pub fn omega_op(&self) -> f64 {
        TAU * SPEED_OF_LIGHT / self.lambda_op
    }

    /// Microwave period `2π/ω_w` (s).
    pub fn microwave_period(&self) -> f64 {
        1.0 / self.f_w
    }

    /// Optical phase constant in the waveguide (rad/m).
    pub fn k_op(&self, mat: &MaterialParams) -> f64 {
        mat.n_op() * self.omega_op() / SPEED_OF_LIGHT
    }

    pub fn carrier_ratio(&self) -> f64 {
        self.omega_op() / self.omega_w()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    width: f64,
    period: f64,
    count: usize,
    gamma: f64,
}

impl Geometry {
    pub fn new(width: f64, period: f64, count: usize, gamma: f64) -> Result<Self> {
        check_positive("W", width)?;
        check_finite("D", period)?;
        if period < width {
            return Err(Error::InvalidParameter {
                name: "D",
                constraint: format!("must be >= W = {width}, got {period}"),
            });
        }
        if count == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                constraint: "must be >= 1".into(),
            });
        }
        check_positive("gamma", gamma)?;
        Ok(Self {
            width,
            period,
            count,
            gamma,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Unmodulated waveguide length between consecutive elements, `D - W`.
    pub fn gap(&self) -> f64 {
        self.period - self.width
    }

    /// Same geometry with a new element width; the period grows to `width` if needed.
    pub fn with_width(self, width: f64) -> Result<Self> {
        Self::new(width, self.period.max(width), self.count, self.gamma)
    }

    pub fn with_count(self, count: usize) -> Result<Self> {
        Self::new(self.width, self.period, count, self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrowaveDrive {
    field: f64,
    symbol_phase: f64,
}

impl MicrowaveDrive {
    pub fn new(field: f64, symbol_phase: f64) -> Result<Self> {
        check_finite("E_w", field)?;
        if field < 0.0 {
            return Err(Error::InvalidParameter {
                name: "E_w",
                constraint: format!("must be >= 0, got {field}"),
            });
        }
        check_finite("b", symbol_phase)?;
        Ok(Self {
            field,
            symbol_phase: normalize_angle(symbol_phase),
        })
    }

    /// Field strength `|E_w|` (V/m).
    pub fn field(&self) -> f64 {
        self.field
    }

    /// Symbol phase `b` in `[0, 2π)`.
    pub fn symbol_phase(&self) -> f64 {
        self.symbol_phase
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_to_pi(theta: f64) -> f64 {
    let r = normalize_angle(theta);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// All depth and phase quantities of one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthResult {
    /// Single-element depth δθ (rad, signed).
    pub delta_theta: f64,
    /// Single-element offset φ (rad).
    pub phi: f64,
    /// Array depth δθ_N (rad, signed).
    pub delta_theta_n: f64,
    /// Array offset φ_N (rad).
    pub phi_n: f64,
    /// Propagation phase χ (rad).
    pub chi: f64,
    /// Microwave angular frequency the phases refer to (rad/s).
    pub omega_w: f64,
}

impl DepthResult {
    /// Encoded phase `θ(t) = δθ_N sin(ω_w t + φ_N + b)`.
    pub fn modulated_phase(&self, t: f64, b: f64) -> f64 {
        self.delta_theta_n * (self.omega_w * t + self.phi_n + b).sin()
    }
}

/// Single-element modulation depth δθ.
pub fn modulation_depth(mat: &MaterialParams, car: &Carriers, geo: &Geometry, drive: &MicrowaveDrive) -> f64 {
    let prefactor = car.omega_op() * mat.eps_op() * mat.r33() * geo.gamma() / car.omega_w();
    -prefactor * half_transit_phase(mat, car, geo.width()).sin() * drive.field()
}

/// `ω_w √ε_op L / 2c`, half the microwave phase elapsed while light crosses `L`.
pub(crate) fn half_transit_phase(mat: &MaterialParams, car: &Carriers, length: f64) -> f64 {
    car.omega_w() * mat.n_op() * length / (2.0 * SPEED_OF_LIGHT)
}

/// Element width giving the largest `|δθ|`.
pub fn optimum_element_width(mat: &MaterialParams, car: &Carriers) -> f64 {
    PI * SPEED_OF_LIGHT / (car.omega_w() * mat.n_op())
}

/// Array periodicity making the inter-element transit one microwave period.
pub fn optimum_array_periodicity(mat: &MaterialParams, car: &Carriers) -> f64 {
    2.0 * optimum_element_width(mat, car)
}

/// Optical transit time over a length of waveguide.
pub fn transit_time(mat: &MaterialParams, length: f64) -> f64 {
    length * mat.n_op() / SPEED_OF_LIGHT
}

/// `sin(N x) / sin(x)` including its removable singularities at `x = mπ`.
///
/// The argument is reduced to `x = mπ + ε` so that the ratio becomes
/// `(-1)^{m(N-1)} sin(Nε)/sin(ε)`, which is smooth at `ε = 0` with value `N`.
pub fn dirichlet_ratio(count: usize, x: f64) -> f64 {
    let m = (x / PI).round();
    let eps = x - m * PI;
    let n = count as f64;
    let core = if eps == 0.0 { n } else { (n * eps).sin() / eps.sin() };
    let odd = (m as i64).rem_euclid(2) == 1 && (count - 1) % 2 == 1;
    if odd {
        -core
    } else {
        core
    }
}

/// Depth and offset of the whole array.
///
/// `Σ_n δθ sin(u + φ + (n-1)Δ) = δθ [sin(NΔ/2)/sin(Δ/2)] sin(u + φ + (N-1)Δ/2)`
/// with `Δ = ω_w √ε_op D / c`.
pub fn array_modulation_depth(
    mat: &MaterialParams,
    car: &Carriers,
    geo: &Geometry,
    drive: &MicrowaveDrive,
) -> DepthResult {
    let delta_theta = modulation_depth(mat, car, geo, drive);
    let phi = half_transit_phase(mat, car, geo.width());
    let half_step = half_transit_phase(mat, car, geo.period());
    let n = geo.count();
    DepthResult {
        delta_theta,
        phi,
        delta_theta_n: delta_theta * dirichlet_ratio(n, half_step),
        phi_n: phi + (n - 1) as f64 * half_step,
        chi: propagation_phase(mat, car, geo),
        omega_w: car.omega_w(),
    }
}

/// Offset phase φ_n of element `n` (1-based).
pub fn element_offset_phase(car: &Carriers, mat: &MaterialParams, geo: &Geometry, n: usize) -> Result<f64> {
    if n == 0 || n > geo.count() {
        return Err(Error::IndexOutOfRange {
            index: n,
            count: geo.count(),
        });
    }
    Ok(half_transit_phase(mat, car, geo.width()) + (n - 1) as f64 * 2.0 * half_transit_phase(mat, car, geo.period()))
}

/// Free-function form of [`DepthResult::modulated_phase`].
pub fn modulated_phase(depth: &DepthResult, t: f64, b: f64) -> f64 {
    depth.modulated_phase(t, b)
}

/// χ = (N-1) k_op D + k_op W.
pub fn propagation_phase(mat: &MaterialParams, car: &Carriers, geo: &Geometry) -> f64 {
    let k = car.k_op(mat);
    (geo.count() - 1) as f64 * k * geo.period() + k * geo.width()
}

/// A complete converter: material, carriers, geometry and microwave drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterDesign {
    pub material: MaterialParams,
    pub carriers: Carriers,
    pub geometry: Geometry,
    pub drive: MicrowaveDrive,
}

impl ConverterDesign {
    pub fn new(material: MaterialParams, carriers: Carriers, geometry: Geometry, drive: MicrowaveDrive) -> Self {
        Self {
            material,
            carriers,
            geometry,
            drive,
        }
    }

    /// An `N`-element array at optimum width and periodicity.
    pub fn optimum(
        material: MaterialParams,
        carriers: Carriers,
        count: usize,
        gamma: f64,
        drive: MicrowaveDrive,
    ) -> Result<Self> {
        let w = optimum_element_width(&material, &carriers);
        let d = optimum_array_periodicity(&material, &carriers);
        let geometry = Geometry::new(w, d, count, gamma)?;
        Ok(Self::new(material, carriers, geometry, drive))
    }

    /// The 30 GHz / 1555 nm LiNbO3 converter with γ = 6500 and |E_w| = 50 V/m.
    pub fn reference(count: usize) -> Self {
        let material = MaterialParams::from_index(1.734, DEFAULT_R33).expect("valid material");
        let carriers = Carriers::new(30e9, 1555e-9).expect("valid carriers");
        let drive = MicrowaveDrive::new(50.0, 0.0).expect("valid drive");
        Self::optimum(material, carriers, count, 6500.0, drive).expect("valid geometry")
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn with_drive(mut self, drive: MicrowaveDrive) -> Self {
        self.drive = drive;
        self
    }

    pub fn delta_theta(&self) -> f64 {
        modulation_depth(&self.material, &self.carriers, &self.geometry, &self.drive)
    }

    pub fn depth(&self) -> DepthResult {
        array_modulation_depth(&self.material, &self.carriers, &self.geometry, &self.drive)
    }

    pub fn optimum_width(&self) -> f64 {
        optimum_element_width(&self.material, &self.carriers)
    }

    pub fn optimum_period(&self) -> f64 {
        optimum_array_periodicity(&self.material, &self.carriers)
    }

    pub fn k_op(&self) -> f64 {
        self.carriers.k_op(&self.material)
    }

    pub fn chi(&self) -> f64 {
        propagation_phase(&self.material, &self.carriers, &self.geometry)
    }

    pub fn element_offset(&self, n: usize) -> Result<f64> {
        element_offset_phase(&self.carriers, &self.material, &self.geometry, n)
    }

    /// Depth of a modulated section of arbitrary width under this drive.
    pub fn section_depth(&self, width: f64) -> f64 {
        let prefactor = self.carriers.omega_op() * self.material.eps_op() * self.material.r33() * self.geometry.gamma()
            / self.carriers.omega_w();
        -prefactor * half_transit_phase(&self.material, &self.carriers, width).sin() * self.drive.field()
    }

    /// Offset phase of a section spanning `[start, start + width]` along the waveguide.
    pub fn section_offset(&self, start: f64, width: f64) -> f64 {
        half_transit_phase(&self.material, &self.carriers, 2.0 * start + width)
    }

    /// True when W and D sit at their optima to the given relative tolerance.
    pub fn is_optimum(&self, rel_tol: f64) -> bool {
        let w_o = self.optimum_width();
        let d_o = self.optimum_period();
        let geo = &self.geometry;
        ((geo.width() - w_o) / w_o).abs() <= rel_tol
            && (geo.count() == 1 || ((geo.period() - d_o) / d_o).abs() <= rel_tol)
    }
}
