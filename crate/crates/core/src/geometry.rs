//! Deployment geometry: layout construction from the printed deployment
//! distances, per-element and aggregate panel path gains, the large-panel
//! asymptotic gain and an adaptive quadrature oracle for it.
//!
//! Convention: all gains are dimensionless power gains (received power
//! fraction). The per-element gain for user `k` via element `n` is
//!
//! ```text
//! rho_n^k = A a b lambda^2 cos^3(alpha_n) / (64 pi^3 l_n^2 (d_n^k)^2)
//! ```
//!
//! where `l_n` is the element-BS distance, `d_n^k` the element-user distance
//! and `alpha_n` the incidence angle from the panel normal toward the BS.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, RisError};

pub type Point3 = Vector3<f64>;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A full deployment: BS, users, panel placement and the carrier/antenna
/// constants every gain formula needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub bs_position: Point3,
    pub user_positions: Vec<Point3>,
    pub ris_center: Point3,
    /// Unit normal of the panel plane, pointing toward the served side.
    pub ris_plane_normal: Point3,
    pub wavelength: f64,
    /// BS antenna gain, linear scale.
    pub antenna_gain: f64,
    pub num_antennas: usize,
    pub num_users: usize,
}

impl Scenario {
    pub fn new(
        bs_position: Point3,
        user_positions: Vec<Point3>,
        ris_center: Point3,
        ris_plane_normal: Point3,
        wavelength: f64,
        antenna_gain: f64,
        num_antennas: usize,
    ) -> Result<Self> {
        let num_users = user_positions.len();
        if num_users == 0 {
            return Err(RisError::InvalidConfig("need at least one user".into()));
        }
        if num_antennas < num_users {
            return Err(RisError::InvalidConfig(format!(
                "BS antennas ({num_antennas}) must be at least the user count ({num_users})"
            )));
        }
        if !(wavelength > 0.0) || !(antenna_gain > 0.0) {
            return Err(RisError::InvalidConfig(
                "wavelength and antenna gain must be positive".into(),
            ));
        }
        let n = ris_plane_normal
            .try_normalize(1e-12)
            .ok_or_else(|| RisError::InvalidConfig("RIS plane normal must be nonzero".into()))?;
        let scen = Self {
            bs_position,
            user_positions,
            ris_center,
            ris_plane_normal: n,
            wavelength,
            antenna_gain,
            num_antennas,
            num_users,
        };
        if scen.bs_plane_distance() <= 0.0 {
            return Err(RisError::InfeasibleGeometry(
                "BS is behind the RIS plane".into(),
            ));
        }
        for (k, z) in scen.user_plane_distances().into_iter().enumerate() {
            if z <= 0.0 {
                return Err(RisError::InfeasibleGeometry(format!(
                    "user {k} is behind the RIS plane"
                )));
            }
        }
        Ok(scen)
    }

    /// Perpendicular distance of the BS from the panel plane (z0).
    pub fn bs_plane_distance(&self) -> f64 {
        self.ris_plane_normal.dot(&(self.bs_position - self.ris_center))
    }

    /// Perpendicular distances of each user from the panel plane (zk).
    pub fn user_plane_distances(&self) -> Vec<f64> {
        self.user_positions
            .iter()
            .map(|u| self.ris_plane_normal.dot(&(u - self.ris_center)))
            .collect()
    }
}

/// Printed deployment distances behind the coordinate realization: BS-RIS
/// distance, BS-area distance, RIS-area gap, square side, mount heights.
#[derive(Debug, Clone)]
pub struct LayoutParams {
    pub bs_ris_distance: f64,
    pub bs_area_distance: f64,
    pub ris_area_gap: f64,
    pub area_side: f64,
    pub bs_height: f64,
    pub ris_height: f64,
    pub num_users: usize,
    pub user_seed: u64,
}

/// Per-element phase shifts of the panel.
#[derive(Debug, Clone)]
pub enum PhaseConfig {
    AllZero,
    UniformRandom { seed: u64 },
    Explicit(Vec<f64>),
}

/// The reflecting panel: element count and size, common reflection amplitude
/// and the phase configuration. Element `n` applies `gamma * exp(-j theta_n)`.
#[derive(Debug, Clone)]
pub struct RisPanel {
    pub num_elements: u64,
    pub element_width: f64,
    pub element_height: f64,
    pub reflection_amplitude: f64,
    pub phase_config: PhaseConfig,
}

impl RisPanel {
    pub fn new(
        num_elements: u64,
        element_width: f64,
        element_height: f64,
        reflection_amplitude: f64,
        phase_config: PhaseConfig,
    ) -> Result<Self> {
        if num_elements == 0 {
            return Err(RisError::InvalidConfig("panel needs at least one element".into()));
        }
        if !(element_width > 0.0) || !(element_height > 0.0) {
            return Err(RisError::InvalidConfig("element dimensions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&reflection_amplitude) {
            return Err(RisError::InvalidConfig(format!(
                "reflection amplitude {reflection_amplitude} outside [0, 1]"
            )));
        }
        if let PhaseConfig::Explicit(thetas) = &phase_config {
            if thetas.len() as u64 != num_elements {
                return Err(RisError::InvalidConfig(format!(
                    "explicit phase list has {} entries for {} elements",
                    thetas.len(),
                    num_elements
                )));
            }
        }
        Ok(Self {
            num_elements,
            element_width,
            element_height,
            reflection_amplitude,
            phase_config,
        })
    }

    /// Streams the per-element phases in element order.
    pub fn phases(&self) -> PhaseIter<'_> {
        match &self.phase_config {
            PhaseConfig::AllZero => PhaseIter::Zero {
                remaining: self.num_elements,
            },
            PhaseConfig::UniformRandom { seed } => PhaseIter::Random {
                rng: ChaCha8Rng::seed_from_u64(*seed),
                remaining: self.num_elements,
            },
            PhaseConfig::Explicit(thetas) => PhaseIter::List {
                thetas,
                next: 0,
            },
        }
    }
}

/// Iterator over panel phases; uniform-random phases are reproduced from the
/// stored seed so the stream never needs materializing.
pub enum PhaseIter<'a> {
    Zero { remaining: u64 },
    Random { rng: ChaCha8Rng, remaining: u64 },
    List { thetas: &'a [f64], next: usize },
}

impl Iterator for PhaseIter<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        match self {
            PhaseIter::Zero { remaining } => {
                if *remaining == 0 {
                    None
                } else {
                    *remaining -= 1;
                    Some(0.0)
                }
            }
            PhaseIter::Random { rng, remaining } => {
                if *remaining == 0 {
                    None
                } else {
                    *remaining -= 1;
                    Some(rng.random_range(0.0..std::f64::consts::TAU))
                }
            }
            PhaseIter::List { thetas, next } => {
                let t = thetas.get(*next).copied();
                *next += 1;
                t
            }
        }
    }
}

/// Panel gains for one deployment: per-user aggregate (sum of element gains),
/// its per-element average, and the infinite-panel limit.
#[derive(Debug, Clone)]
pub struct GainProfile {
    pub per_user_aggregate: Vec<f64>,
    pub per_user_average: Vec<f64>,
    pub asymptotic_limit: Vec<f64>,
}

/// Places BS, RIS and users from the printed distances.
///
/// The user square is centered at the horizontal origin at ground height.
/// The panel is mounted vertically at the square's near side plus the gap,
/// normal pointing at the square. The BS position solves the two
/// horizontal-distance constraints (distance to the RIS and to the square
/// center) by circle intersection; the positive-y branch is returned.
pub fn build_layout(
    params: &LayoutParams,
    frequency_hz: f64,
    antenna_gain: f64,
    num_antennas: usize,
) -> Result<Scenario> {
    if !(params.bs_ris_distance > 0.0)
        || !(params.bs_area_distance > 0.0)
        || !(params.ris_area_gap > 0.0)
        || !(params.area_side > 0.0)
    {
        return Err(RisError::InfeasibleGeometry(
            "all layout distances must be positive".into(),
        ));
    }
    if !(frequency_hz > 0.0) {
        return Err(RisError::InvalidConfig("carrier frequency must be positive".into()));
    }

    let half = params.area_side / 2.0;
    // RIS center sits the gap beyond the square's near side, on the x axis.
    let ris_x = -(half + params.ris_area_gap);
    let ris_center = Point3::new(ris_x, 0.0, params.ris_height);
    let normal = Point3::new(1.0, 0.0, 0.0);

    // Horizontal BS position: intersect the circle of radius D_B around the
    // RIS with the circle of radius D around the square center.
    let dx = -ris_x; // distance between the two circle centers, > 0
    let d_b = params.bs_ris_distance;
    let d = params.bs_area_distance;
    let bs_x = (d_b * d_b - d * d - dx * dx) / (2.0 * dx);
    let y_sq = d * d - bs_x * bs_x;
    if y_sq < 0.0 {
        return Err(RisError::InfeasibleGeometry(format!(
            "no BS position is {d_b} m from the RIS and {d} m from the area center \
             (centers {dx} m apart)"
        )));
    }
    let bs_position = Point3::new(bs_x, y_sq.sqrt(), params.bs_height);

    // Users: uniform in the square, ground height; x then y per user.
    let mut rng = ChaCha8Rng::seed_from_u64(params.user_seed);
    let users: Vec<Point3> = (0..params.num_users)
        .map(|_| {
            let x = rng.random_range(-half..half);
            let y = rng.random_range(-half..half);
            Point3::new(x, y, 0.0)
        })
        .collect();

    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    Scenario::new(
        bs_position,
        users,
        ris_center,
        normal,
        wavelength,
        antenna_gain,
        num_antennas,
    )
}

/// Most-square factorization r*c = n with r <= c.
pub fn most_square_factors(n: u64) -> (u64, u64) {
    let mut r = (n as f64).sqrt().floor() as u64;
    while r > 1 && n % r != 0 {
        r -= 1;
    }
    (r.max(1), n / r.max(1))
}

/// Orthonormal in-plane basis (u, v) for a plane with the given unit normal.
/// For a vertical panel (horizontal normal) u is horizontal and v vertical.
fn plane_basis(normal: &Point3) -> (Point3, Point3) {
    let helper = if normal.z.abs() < 0.9 {
        Point3::new(0.0, 0.0, 1.0)
    } else {
        Point3::new(1.0, 0.0, 0.0)
    };
    let u = helper.cross(normal).normalize();
    let v = normal.cross(&u);
    (u, v)
}

/// Element centers on a centered r x c lattice with pitch (width, height);
/// row-major in (row, column) order. The centroid equals `center` exactly.
pub fn element_positions(panel: &RisPanel, center: &Point3, normal: &Point3) -> Vec<Point3> {
    let mut out = Vec::with_capacity(panel.num_elements as usize);
    for_each_element_position(panel, center, normal, |p| out.push(p));
    out
}

/// Streaming form of [`element_positions`]; visits elements in the same
/// row-major order without materializing them.
pub fn for_each_element_position<F: FnMut(Point3)>(
    panel: &RisPanel,
    center: &Point3,
    normal: &Point3,
    mut f: F,
) {
    let (rows, cols) = most_square_factors(panel.num_elements);
    let (u, v) = plane_basis(normal);
    let du = u * panel.element_width;
    let dv = v * panel.element_height;
    let origin = center - du * ((cols - 1) as f64 / 2.0) - dv * ((rows - 1) as f64 / 2.0);
    for i in 0..rows {
        let row_start = origin + dv * i as f64;
        for j in 0..cols {
            f(row_start + du * j as f64);
        }
    }
}

/// Power gain via one element: `A a b lambda^2 cos^3(alpha) / (64 pi^3 l^2 d^2)`.
/// `alpha` is the incidence angle at the element, measured from the plane
/// normal toward the BS.
pub fn path_gain(
    element: &Point3,
    bs: &Point3,
    user: &Point3,
    normal: &Point3,
    panel: &RisPanel,
    wavelength: f64,
    antenna_gain: f64,
) -> Result<f64> {
    let to_bs = bs - element;
    let to_user = user - element;
    let l2 = to_bs.norm_squared();
    let d2 = to_user.norm_squared();
    if l2 == 0.0 || d2 == 0.0 {
        return Err(RisError::Domain(
            "BS or user coincides with a panel element".into(),
        ));
    }
    let cos_alpha = normal.dot(&to_bs) / l2.sqrt();
    if cos_alpha <= 0.0 {
        return Err(RisError::Domain(
            "BS is behind the RIS plane (incidence angle at or past 90 degrees)".into(),
        ));
    }
    if normal.dot(&to_user) <= 0.0 {
        return Err(RisError::Domain("user is behind the RIS plane".into()));
    }
    let ab = panel.element_width * panel.element_height;
    let numer = antenna_gain * ab * wavelength * wavelength * cos_alpha.powi(3);
    let denom = 64.0 * std::f64::consts::PI.powi(3) * l2 * d2;
    Ok(numer / denom)
}

/// Aggregate panel gain for every user: sum of per-element gains, streamed
/// over the lattice so panels of 1e8+ elements never materialize.
///
/// Parallel reduction is over fixed-size element chunks folded in chunk
/// order, so the result is bit-identical for any worker count.
pub fn aggregate_gain(scenario: &Scenario, panel: &RisPanel) -> Result<GainProfile> {
    let k = scenario.num_users;
    let n = panel.num_elements;
    let (rows, cols) = most_square_factors(n);
    debug_assert_eq!(rows * cols, n);
    let (u, v) = plane_basis(&scenario.ris_plane_normal);
    let du = u * panel.element_width;
    let dv = v * panel.element_height;
    let origin = scenario.ris_center
        - du * ((cols - 1) as f64 / 2.0)
        - dv * ((rows - 1) as f64 / 2.0);

    let z0 = scenario.bs_plane_distance();
    if z0 <= 0.0 {
        return Err(RisError::Domain("BS is behind the RIS plane".into()));
    }
    let zs = scenario.user_plane_distances();
    if let Some(kk) = zs.iter().position(|z| *z <= 0.0) {
        return Err(RisError::Domain(format!("user {kk} is behind the RIS plane")));
    }

    let ab = panel.element_width * panel.element_height;
    let front = scenario.antenna_gain * ab * scenario.wavelength * scenario.wavelength
        / (64.0 * std::f64::consts::PI.powi(3));
    let bs = scenario.bs_position;
    let users = &scenario.user_positions;

    // Each chunk is a fixed run of element indices; partial sums are folded
    // in chunk order afterwards.
    const CHUNK: u64 = 1 << 16;
    let num_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..num_chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * CHUNK;
            let stop = (start + CHUNK).min(n);
            let mut acc = vec![0.0f64; k];
            for idx in start..stop {
                let (i, j) = (idx / cols, idx % cols);
                let e = origin + dv * i as f64 + du * j as f64;
                let to_bs = bs - e;
                let l2 = to_bs.norm_squared();
                let cos_alpha = z0 / l2.sqrt();
                let w = front * cos_alpha.powi(3) / l2;
                for (a, user) in acc.iter_mut().zip(users) {
                    let d2 = (user - e).norm_squared();
                    *a += w / d2;
                }
            }
            acc
        })
        .collect();

    let mut aggregate = vec![0.0f64; k];
    for p in &partials {
        for (a, x) in aggregate.iter_mut().zip(p) {
            *a += x;
        }
    }

    let asymptotic: Vec<f64> = zs
        .iter()
        .map(|zk| asymptotic_gain(z0, *zk, scenario.wavelength, scenario.antenna_gain))
        .collect::<Result<_>>()?;
    let average = aggregate.iter().map(|a| a / n as f64).collect();
    Ok(GainProfile {
        per_user_aggregate: aggregate,
        per_user_average: average,
        asymptotic_limit: asymptotic,
    })
}

/// Infinite-panel aggregate gain, as printed: `2 A z0^3 lambda^2 / (5 pi^2 (z0+zk)^5)`.
///
/// The independent quadrature oracle evaluates to half this value; both are
/// exposed and the ratio is reported by the validation suite.
pub fn asymptotic_gain(z0: f64, zk: f64, wavelength: f64, antenna_gain: f64) -> Result<f64> {
    if !(z0 > 0.0) || !(zk > 0.0) {
        return Err(RisError::Domain(format!(
            "perpendicular distances must be positive (z0 = {z0}, zk = {zk})"
        )));
    }
    let s = z0 + zk;
    Ok(2.0 * antenna_gain * z0.powi(3) * wavelength * wavelength
        / (5.0 * std::f64::consts::PI.powi(2) * s.powi(5)))
}

/// Numerically integrates the per-area gain density over the square panel
/// `[-w, w]^2`. The BS sits at in-plane offset `-x0` and perpendicular
/// distance `z0`, the user at `+x0` and `zk`.
///
/// With `use_midpoint_approx` the density is the midpoint form
/// `A z0^3 lambda^2 / (64 pi^3 (x^2 + y^2 + ((z0+zk)/2)^2)^{7/2})`;
/// otherwise the exact form `A z0^3 lambda^2 / (64 pi^3 d^2 l^5)`.
///
/// Uniform m x m cells with a 4x4 Gauss-Legendre rule per cell, m doubling
/// until the relative change is below 1e-6.
pub fn quadrature_gain(
    z0: f64,
    zk: f64,
    x0: f64,
    wavelength: f64,
    antenna_gain: f64,
    panel_halfwidth: f64,
    use_midpoint_approx: bool,
) -> Result<f64> {
    if !(z0 > 0.0) || !(zk > 0.0) {
        return Err(RisError::Domain(format!(
            "perpendicular distances must be positive (z0 = {z0}, zk = {zk})"
        )));
    }
    if panel_halfwidth < 0.0 {
        return Err(RisError::Domain("panel halfwidth must be nonnegative".into()));
    }
    if panel_halfwidth == 0.0 {
        return Ok(0.0);
    }

    let front = antenna_gain * z0.powi(3) * wavelength * wavelength
        / (64.0 * std::f64::consts::PI.powi(3));
    let density = |x: f64, y: f64| -> f64 {
        if use_midpoint_approx {
            let c = (z0 + zk) / 2.0;
            let r2 = x * x + y * y + c * c;
            front / (r2 * r2 * r2 * r2.sqrt())
        } else {
            let l2 = (x + x0) * (x + x0) + y * y + z0 * z0;
            let d2 = (x - x0) * (x - x0) + y * y + zk * zk;
            front / (d2 * l2 * l2 * l2.sqrt())
        }
    };

    // 4-point Gauss-Legendre nodes and weights on [-1, 1].
    const GL_X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_26,
        0.339_981_043_584_856_26,
        0.861_136_311_594_052_6,
    ];
    const GL_W: [f64; 4] = [
        0.347_854_845_137_453_85,
        0.652_145_154_862_546_2,
        0.652_145_154_862_546_2,
        0.347_854_845_137_453_85,
    ];

    let w = panel_halfwidth;
    let integrate = |m: u64| -> f64 {
        let h = 2.0 * w / m as f64;
        let cells: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|iy| {
                let yc = -w + (iy as f64 + 0.5) * h;
                let mut s = 0.0;
                for ix in 0..m {
                    let xc = -w + (ix as f64 + 0.5) * h;
                    for (gx, wx) in GL_X.iter().zip(&GL_W) {
                        for (gy, wy) in GL_X.iter().zip(&GL_W) {
                            s += wx * wy * density(xc + gx * h / 2.0, yc + gy * h / 2.0);
                        }
                    }
                }
                s * h * h / 4.0
            })
            .collect();
        cells.iter().sum()
    };

    let mut m: u64 = 8;
    let mut prev = integrate(m);
    let mut refinements = 0;
    loop {
        m *= 2;
        refinements += 1;
        let cur = integrate(m);
        let change = if cur == 0.0 {
            (cur - prev).abs()
        } else {
            ((cur - prev) / cur).abs()
        };
        if change < 1e-6 {
            return Ok(cur);
        }
        if m >= 4096 {
            return Err(RisError::NonConvergence {
                refinements,
                last_change: change,
            });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_panel(n: u64) -> RisPanel {
        RisPanel::new(n, 0.02, 0.02, 1.0, PhaseConfig::AllZero).unwrap()
    }

    #[test]
    fn most_square_examples() {
        assert_eq!(most_square_factors(1), (1, 1));
        assert_eq!(most_square_factors(4), (2, 2));
        assert_eq!(most_square_factors(6), (2, 3));
        assert_eq!(most_square_factors(7), (1, 7));
        assert_eq!(most_square_factors(100_000_000), (10_000, 10_000));
        // Odd powers of two stay within aspect ratio 2.
        assert_eq!(most_square_factors(1 << 15), (128, 256));
    }

    #[test]
    fn element_lattice_centroid_and_offsets() {
        let center = Point3::new(-60.0, 0.0, 25.0);
        let normal = Point3::new(1.0, 0.0, 0.0);
        let single = element_positions(&unit_panel(1), &center, &normal);
        assert_eq!(single.len(), 1);
        assert_relative_eq!((single[0] - center).norm(), 0.0, epsilon = 1e-15);

        let four = element_positions(&unit_panel(4), &center, &normal);
        assert_eq!(four.len(), 4);
        for p in &four {
            let off = p - center;
            assert_relative_eq!(off.x, 0.0, epsilon = 1e-12);
            assert_relative_eq!(off.y.abs(), 0.01, epsilon = 1e-12);
            assert_relative_eq!(off.z.abs(), 0.01, epsilon = 1e-12);
        }

        let six = element_positions(&unit_panel(6), &center, &normal);
        let centroid = six.iter().sum::<Point3>() / 6.0;
        assert!((centroid - center).norm() < 1e-9 * 0.02);
    }

    #[test]
    fn phase_iter_kinds() {
        let zero = unit_panel(3);
        assert_eq!(zero.phases().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);

        let explicit = RisPanel::new(
            2,
            0.02,
            0.02,
            1.0,
            PhaseConfig::Explicit(vec![0.5, 1.5]),
        )
        .unwrap();
        assert_eq!(explicit.phases().collect::<Vec<_>>(), vec![0.5, 1.5]);

        let random = RisPanel::new(
            4,
            0.02,
            0.02,
            1.0,
            PhaseConfig::UniformRandom { seed: 9 },
        )
        .unwrap();
        let a: Vec<f64> = random.phases().collect();
        let b: Vec<f64> = random.phases().collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| (0.0..std::f64::consts::TAU).contains(t)));
    }

    #[test]
    fn panel_validation() {
        assert!(RisPanel::new(0, 0.02, 0.02, 1.0, PhaseConfig::AllZero).is_err());
        assert!(RisPanel::new(2, 0.02, 0.02, 1.5, PhaseConfig::AllZero).is_err());
        assert!(RisPanel::new(2, 0.02, 0.02, 1.0, PhaseConfig::Explicit(vec![0.0])).is_err());
    }
}
