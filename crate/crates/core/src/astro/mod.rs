//! Time-dependent astrodynamics: element sets, propagation, solar ephemeris
//! and reference-frame transforms.

pub mod frames;
pub mod propagate;
pub mod sun;
pub mod tle;

pub use frames::{ecef_to_eci, ecef_to_geodetic, eci_to_ecef, geodetic_to_ecef, gmst, GeodeticPoint};
pub use propagate::{
    build_propagator, propagate, J2Propagator, PropagationError, PropagationModel, Propagator, Sgp4Propagator, StateVector,
};
pub use sun::{sun_direction, OutOfEphemerisRange, SunVector};
pub use tle::{parse_tle, parse_tle_file, OrbitalElements, TleError};

/// Earth gravitational parameter, km^3/s^2 (WGS-84).
pub const MU_EARTH: f64 = 398_600.4418;
/// WGS-84 equatorial radius, km.
pub const EARTH_EQUATORIAL_RADIUS_KM: f64 = 6378.137;
/// WGS-84 flattening.
pub const EARTH_FLATTENING: f64 = 1.0 / 298.257_223_563;
pub const J2: f64 = 1.082_626_68e-3;
/// Astronomical unit, km.
pub const AU_KM: f64 = 149_597_870.7;
