"""Scene radiometry: reference images, illuminance, and expected photon flux.

A grayscale reference image is interpreted photometrically: pixel value 1.0
("white") corresponds to a configurable reference illuminance at the sensor,
and every other value scales linearly. Illuminance is converted to optical
power on the pixel using the 683 lm/W luminous efficacy of monochromatic
555 nm light, and power to an expected photon rate by dividing by the photon
energy h*c/lambda.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

# CODATA 2018 exact values; fixed so that outputs are bit-reproducible.
PLANCK_CONSTANT = 6.62607015e-34  # J*s
SPEED_OF_LIGHT = 2.99792458e8  # m/s
LUMENS_PER_WATT = 683.0  # luminous efficacy at 555 nm, lm/W

# Rec. 709 luminance weights for RGB -> grayscale.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)


@dataclass(frozen=True)
class SpadConfig:
    """Parameters of a time-resolved SPAD pixel.

    Defaults describe a 5 um pitch, 100% fill-factor array with 50%
    detection efficiency, 50 ns dead time, 0.5% afterpulse probability,
    200 ps timing jitter, and a 100 Hz dark count rate.
    """

    quantum_efficiency: float = 0.5
    dead_time: float = 50e-9
    afterpulse_prob: float = 0.005
    jitter_sigma: float = 200e-12
    dark_count_rate: float = 100.0
    pixel_pitch: float = 5e-6
    fill_factor: float = 1.0
    wavelength: float = 555e-9

    def __post_init__(self):
        if not 0.0 < self.quantum_efficiency <= 1.0:
            raise ConfigurationError(f"quantum_efficiency must be in (0, 1], got {self.quantum_efficiency}")
        if not 0.0 < self.fill_factor <= 1.0:
            raise ConfigurationError(f"fill_factor must be in (0, 1], got {self.fill_factor}")
        if not 0.0 <= self.afterpulse_prob < 1.0:
            raise ConfigurationError(f"afterpulse_prob must be in [0, 1), got {self.afterpulse_prob}")
        if not self.dead_time > 0.0:
            raise ConfigurationError(f"dead_time must be positive, got {self.dead_time}")
        if self.dark_count_rate < 0.0:
            raise ConfigurationError(f"dark_count_rate must be non-negative, got {self.dark_count_rate}")
        if self.jitter_sigma < 0.0:
            raise ConfigurationError(f"jitter_sigma must be non-negative, got {self.jitter_sigma}")
        if not self.wavelength > 0.0:
            raise ConfigurationError(f"wavelength must be positive, got {self.wavelength}")
        if not np.isfinite(self.pixel_area) or self.pixel_area <= 0.0:
            raise ConfigurationError(f"pixel area must be positive, got {self.pixel_area}")

    @property
    def pixel_area(self) -> float:
        """Photosensitive area of one pixel in m^2."""
        return self.pixel_pitch ** 2 * self.fill_factor


@dataclass(frozen=True)
class SceneConfig:
    """Photometric interpretation of a reference image.

    ``reference_lux`` is the illuminance assigned to pixel value 1.0;
    ``exposure`` is the acquisition window in seconds.
    """

    reference_lux: float
    exposure: float = 1e-3

    def __post_init__(self):
        if not self.reference_lux > 0.0:
            raise ConfigurationError(f"reference_lux must be positive, got {self.reference_lux}")
        if not self.exposure > 0.0:
            raise ConfigurationError(f"exposure must be positive, got {self.exposure}")
        if self.exposure < 1e-12:
            raise ConfigurationError("exposure below 1 ps is not representable")


@dataclass(frozen=True)
class ReferenceImage:
    """Normalized grayscale image with values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ConfigurationError(f"image must be 2-D and non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("image contains non-finite values")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ConfigurationError("image values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_raster(cls, raster: np.ndarray) -> "ReferenceImage":
        """Build from a raw raster, normalizing integer encodings by their type maximum."""
        raster = np.asarray(raster)
        if np.issubdtype(raster.dtype, np.integer):
            info = np.iinfo(raster.dtype)
            if info.min < 0:
                raise ConfigurationError(f"signed integer rasters are not supported, got {raster.dtype}")
            return cls(raster.astype(np.float64) / info.max)
        return cls(raster)


@dataclass(frozen=True)
class FluxMap:
    """Per-pixel expected photon rate in photons/second."""

    flux: np.ndarray

    def __post_init__(self):
        flux = np.asarray(self.flux, dtype=np.float64)
        if flux.ndim != 2 or flux.shape[0] < 1 or flux.shape[1] < 1:
            raise ConfigurationError(f"flux map must be 2-D and non-empty, got shape {flux.shape}")
        if not np.all(np.isfinite(flux)) or flux.min() < 0.0:
            raise ConfigurationError("flux values must be finite and non-negative")
        object.__setattr__(self, "flux", flux)

    @property
    def width(self) -> int:
        return self.flux.shape[1]

    @property
    def height(self) -> int:
        return self.flux.shape[0]


def rgb_to_grayscale(rgb: np.ndarray) -> ReferenceImage:
    """Collapse an (H, W, 3) image with channel values in [0, 1] to grayscale.

    Uses the fixed luminance weights (0.2126, 0.7152, 0.0722), which sum
    to 1 so that white maps to exactly 1.0.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ConfigurationError(f"expected an (H, W, 3) array, got shape {rgb.shape}")
    if not np.all(np.isfinite(rgb)) or rgb.min() < 0.0 or rgb.max() > 1.0:
        raise ConfigurationError("channel values must lie in [0, 1]")
    gray = rgb @ np.asarray(LUMA_WEIGHTS)
    # The dot product can exceed 1.0 by one ulp; fold that back into range.
    np.clip(gray, 0.0, 1.0, out=gray)
    return ReferenceImage(gray)


def image_to_lux(image: ReferenceImage, scene: SceneConfig) -> np.ndarray:
    """Per-pixel illuminance map: value 1.0 maps exactly to ``scene.reference_lux``."""
    return image.values * scene.reference_lux


def photon_energy(wavelength: float) -> float:
    """Energy in joules of one photon at the given wavelength in meters."""
    return PLANCK_CONSTANT * SPEED_OF_LIGHT / wavelength


def lux_to_flux(lux_map: np.ndarray, config: SpadConfig) -> FluxMap:
    """Convert an illuminance map to expected photon rates on each pixel.

    Power on the pixel is ``I_W = A_p / 683 * I_lux`` and the photon rate
    is ``I_W / (h*c/lambda)``.
    """
    lux_map = np.asarray(lux_map, dtype=np.float64)
    watts = lux_map * (config.pixel_area / LUMENS_PER_WATT)
    return FluxMap(watts / photon_energy(config.wavelength))


def expected_flux(image: ReferenceImage, scene: SceneConfig, config: SpadConfig) -> FluxMap:
    """Compose ``image_to_lux`` and ``lux_to_flux`` for one reference image."""
    return lux_to_flux(image_to_lux(image, scene), config)
