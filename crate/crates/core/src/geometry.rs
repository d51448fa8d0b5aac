//! Network layout: access-point grid, array orientation, device drops and
//! per-link distance/azimuth.
//!
//! APs sit at the centers of a balanced `r × c` partition of the `l × l`
//! square, with `r` the largest divisor of `Q` not exceeding `√Q` (rows run
//! along `y`, columns along `x`). Every ULA faces `+y`. Azimuths are measured
//! in the horizontal plane, counter-clockwise positive from the boresight, and
//! lie in `(−π, π]`. These placement and orientation rules are modeling
//! choices of this crate.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::Rng;

/// Point in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Unit direction in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heading<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Heading<T> {
    pub fn plus_y() -> Self {
        Self {
            x: T::zero(),
            y: T::one(),
        }
    }
}

/// Deployment constants shared by every realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deployment<T> {
    pub side_length_m: T,
    pub ap_height_m: T,
    pub ue_height_m: T,
}

impl<T: Real> Default for Deployment<T> {
    fn default() -> Self {
        Self {
            side_length_m: T::lit(100.0),
            ap_height_m: T::lit(12.0),
            ue_height_m: T::lit(1.5),
        }
    }
}

impl<T: Real> Deployment<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_length_m >= T::zero()) {
            return Err(Error::Config(format!(
                "side length must be nonnegative, got {}",
                self.side_length_m
            )));
        }
        if !(self.ap_height_m.is_finite() && self.ue_height_m.is_finite()) {
            return Err(Error::Config("heights must be finite".into()));
        }
        Ok(())
    }
}

/// One AP: position and ULA boresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessPoint<T> {
    pub position: Point3<T>,
    pub boresight: Heading<T>,
}

/// Complete layout of one network realization.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry<T> {
    side_length_m: T,
    aps: Vec<AccessPoint<T>>,
    devices: Vec<Point3<T>>,
    antennas_per_ap: usize,
}

impl<T: Real> NetworkGeometry<T> {
    /// Checks the heights, the square bounds and `M = Q·S`.
    pub fn new(
        deployment: &Deployment<T>,
        aps: Vec<AccessPoint<T>>,
        devices: Vec<Point3<T>>,
        antennas_per_ap: usize,
    ) -> Result<Self> {
        deployment.validate()?;
        if aps.is_empty() {
            return Err(Error::Config("at least one AP is required".into()));
        }
        if antennas_per_ap == 0 {
            return Err(Error::Config("antennas per AP must be positive".into()));
        }
        let l = deployment.side_length_m;
        let inside = |x: T, y: T| x >= T::zero() && x <= l && y >= T::zero() && y <= l;
        for (i, ap) in aps.iter().enumerate() {
            if ap.position.z != deployment.ap_height_m || !inside(ap.position.x, ap.position.y) {
                return Err(Error::Config(format!("AP {i} lies outside the deployment")));
            }
        }
        for (i, d) in devices.iter().enumerate() {
            if d.z != deployment.ue_height_m || !inside(d.x, d.y) {
                return Err(Error::Config(format!("device {i} lies outside the deployment")));
            }
        }
        Ok(Self {
            side_length_m: l,
            aps,
            devices,
            antennas_per_ap,
        })
    }

    /// Grid APs plus `k` uniformly dropped devices.
    pub fn sample<R: Rng + ?Sized>(
        deployment: &Deployment<T>,
        q: usize,
        s: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let aps = place_aps(q, deployment)?;
        let devices = place_devices(k, deployment, rng)?;
        Self::new(deployment, aps, devices, s)
    }

    pub fn side_length_m(&self) -> T {
        self.side_length_m
    }

    pub fn aps(&self) -> &[AccessPoint<T>] {
        &self.aps
    }

    pub fn devices(&self) -> &[Point3<T>] {
        &self.devices
    }

    pub fn num_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn antennas_per_ap(&self) -> usize {
        self.antennas_per_ap
    }

    pub fn total_antennas(&self) -> usize {
        self.aps.len() * self.antennas_per_ap
    }

    /// Replace the device set, keeping the AP layout.
    pub fn with_devices(&self, devices: Vec<Point3<T>>) -> Self {
        Self {
            devices,
            ..self.clone()
        }
    }
}

/// Largest divisor of `q` that does not exceed `√q`.
fn grid_rows(q: usize) -> usize {
    (1..=q)
        .take_while(|r| r * r <= q)
        .filter(|r| q % r == 0)
        .last()
        .unwrap_or(1)
}

/// Centers of the balanced grid partition, row-major from the `y = 0` edge.
pub fn place_aps<T: Real>(q: usize, deployment: &Deployment<T>) -> Result<Vec<AccessPoint<T>>> {
    if q == 0 {
        return Err(Error::Config("number of APs must be positive".into()));
    }
    let rows = grid_rows(q);
    let cols = q / rows;
    let l = deployment.side_length_m;
    let half = T::lit(0.5);
    let mut aps = Vec::with_capacity(q);
    for r in 0..rows {
        let y = l * (T::from_usize_lossy(r) + half) / T::from_usize_lossy(rows);
        for c in 0..cols {
            let x = l * (T::from_usize_lossy(c) + half) / T::from_usize_lossy(cols);
            aps.push(AccessPoint {
                position: Point3::new(x, y, deployment.ap_height_m),
                boresight: Heading::plus_y(),
            });
        }
    }
    Ok(aps)
}

/// `k` devices with `x, y ~ U[0, l]` at the UE height. `x` is drawn before `y`
/// for each device, devices in order.
pub fn place_devices<T: Real, R: Rng + ?Sized>(
    k: usize,
    deployment: &Deployment<T>,
    rng: &mut R,
) -> Result<Vec<Point3<T>>> {
    if k == 0 {
        return Err(Error::Config("number of devices must be positive".into()));
    }
    let l = deployment.side_length_m;
    Ok((0..k)
        .map(|_| {
            let x = l * T::unit_uniform(rng);
            let y = l * T::unit_uniform(rng);
            Point3::new(x, y, deployment.ue_height_m)
        })
        .collect())
}

/// Distance and boresight-relative azimuth between a device and an AP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link<T> {
    pub distance_m: T,
    pub azimuth_rad: T,
}

pub fn link_between<T: Real>(device: &Point3<T>, ap: &AccessPoint<T>) -> Link<T> {
    let distance_m = device.distance(&ap.position);
    let dx = device.x - ap.position.x;
    let dy = device.y - ap.position.y;
    let azimuth_rad = if dx == T::zero() && dy == T::zero() {
        T::zero()
    } else {
        let b = ap.boresight;
        let cross = b.x * dy - b.y * dx;
        let dot = b.x * dx + b.y * dy;
        let a = cross.atan2(dot);
        if a <= -T::pi() {
            T::pi()
        } else {
            a
        }
    };
    Link {
        distance_m,
        azimuth_rad,
    }
}

/// [`link_between`] against the AP at `ap_index`.
pub fn link_geometry<T: Real>(
    device: &Point3<T>,
    ap_index: usize,
    geometry: &NetworkGeometry<T>,
) -> Result<Link<T>> {
    let ap = geometry.aps().get(ap_index).ok_or_else(|| {
        Error::Config(format!(
            "AP index {ap_index} out of range for {} APs",
            geometry.num_aps()
        ))
    })?;
    Ok(link_between(device, ap))
}
