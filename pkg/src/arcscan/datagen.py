"""Synthetic stand-in for simulated ARS images, and the noise models.

The generator is qualitative.  Each image has a smooth specular lobe on the
pole columns, high-frequency interference texture on the equatorial columns,
multiplicative speckle everywhere, and a per-image random gain.  Speckle is
either i.i.d. gamma per pixel or, with ``speckle_grain > 0``, log-normal with
a Gaussian spatial correlation of that width (same mean and variance).  Deficiency
level modulates the lobe height, the texture strength and the speckle
contrast near the equator, and shifts the expected mean intensity by
``class_effect`` between the first and last class.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import N_CLASSES, SIZE, ArsImage, DeficiencyClass, _LEVELS

POLE_CENTER = (SIZE - 1) / 2.0


@dataclass(frozen=True)
class GenConfig:
    seed: int = 7
    images_per_class: int = 160
    pole_peak: float = 20.0           # lobe height over the floor, class 0
    pole_width: float = 7.0           # lobe std in degrees of alpha
    pole_class_effect: float = 0.7    # fractional lobe loss at the largest deficiency
    equator_texture_freq: float = 20.0  # cycles per 180 degrees
    texture_amplitude: float = 1.0    # texture strength relative to the floor, class 0
    texture_class_effect: float = 2.0  # fractional texture gain at the largest deficiency
    equator_edge: float = 42.0        # |alpha - 89.5| beyond which texture sets in
    speckle_looks: float = 20.0       # gamma shape of speckle (higher = smoother)
    speckle_class_effect: float = 0.6  # fractional loss of looks near the equator
    speckle_grain: float = 2.0        # speckle correlation width in pixels (0 = independent)
    gain_jitter: float = 0.08         # per-image multiplicative gain std
    severity_jitter: float = 0.02     # per-image std of the latent deficiency severity
    floor_jitter: float = 0.05        # per-image std of the diffuse floor, independent of gain
    texture_waves: int = 8            # plane waves summed into the interference texture
    class_effect: float = 0.3         # relative mean intensity shift, class 4 vs class 0
    background_floor: float = 1.0

    def __post_init__(self):
        if self.images_per_class < 2:
            raise ValueError("images_per_class must be >= 2")
        for name in ("pole_peak", "pole_width", "equator_texture_freq", "texture_amplitude",
                     "speckle_looks", "background_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.pole_class_effect < 1:
            raise ValueError("pole_class_effect must be in [0, 1)")
        if not 0 <= self.speckle_class_effect < 1:
            raise ValueError("speckle_class_effect must be in [0, 1)")
        if self.texture_waves < 1:
            raise ValueError("texture_waves must be >= 1")
        if self.speckle_grain < 0:
            raise ValueError("speckle_grain must be >= 0")
        if self.floor_jitter < 0 or self.severity_jitter < 0 or self.gain_jitter < 0 or self.texture_class_effect < 0 or self.class_effect <= -1:
            raise ValueError("invalid class or jitter parameter")

    @classmethod
    def from_mapping(cls, values: dict) -> "GenConfig":
        known = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            if key not in known:
                continue
            kw[key] = int(raw) if key in ("seed", "images_per_class", "texture_waves") else float(raw)
        return cls(**kw)

    def as_dict(self) -> dict:
        return asdict(self)


def _severity(cls: int) -> float:
    return _LEVELS[cls] / _LEVELS[-1]


def _grids():
    rows = np.arange(SIZE, dtype=np.float64)[:, None]
    cols = np.arange(SIZE, dtype=np.float64)[None, :]
    dist = np.abs(cols - POLE_CENTER)
    return rows, cols, dist


def _structure(cfg: GenConfig, cls: int, s: float | None = None):
    """Noise-free lobe and texture envelope for a class (or an explicit severity)."""
    _, _, dist = _grids()
    s = _severity(cls) if s is None else s
    lobe = cfg.pole_peak * (1 - cfg.pole_class_effect * s) * np.exp(-0.5 * (dist / cfg.pole_width) ** 2)
    envelope = 1.0 / (1.0 + np.exp(-(dist - cfg.equator_edge) / 2.0))
    tex_amp = cfg.texture_amplitude * (1 + cfg.texture_class_effect * s)
    looks = cfg.speckle_looks * (1 - cfg.speckle_class_effect * s * envelope)
    return lobe, envelope, tex_amp, np.broadcast_to(looks, (SIZE, SIZE))


def _class_scale(cfg: GenConfig, cls: int) -> float:
    """Gain that sets the expected image mean to base * (1 + class_effect * severity)."""
    def expected_mean(c):
        lobe, env, amp, _ = _structure(cfg, c)
        # texture has unit mean per pixel; speckle and gain have unit mean
        return float(np.mean(cfg.background_floor * (1 + amp * env) + lobe))

    return expected_mean(0) * (1 + cfg.class_effect * _severity(cls)) / expected_mean(cls)


def _texture(rng: np.random.Generator, freq: float, n_waves: int) -> np.ndarray:
    """Non-negative interference pattern with unit mean."""
    rows, cols, _ = _grids()
    field_ = np.zeros((SIZE, SIZE))
    for _ in range(n_waves):
        theta = rng.uniform(0, np.pi)
        f = freq * rng.uniform(0.7, 1.3)
        phase = rng.uniform(0, 2 * np.pi)
        field_ += np.cos(2 * np.pi * f / SIZE * (rows * np.cos(theta) + cols * np.sin(theta)) + phase)
    # square of a sum of unit cosines: mean n_waves / 2 in expectation
    return field_ ** 2 / (n_waves / 2.0)


def _grain_gain(grain: float) -> float:
    """Std of white noise after the grain filter (wrap-around, so stationary)."""
    delta = np.zeros((SIZE, SIZE))
    delta[0, 0] = 1.0
    return float(np.sqrt(np.sum(gaussian_filter(delta, grain, mode="wrap") ** 2)))


def _speckle(rng: np.random.Generator, looks: np.ndarray, grain: float) -> np.ndarray:
    """Unit-mean multiplicative speckle with variance ``1 / looks``."""
    if grain == 0:
        return rng.gamma(looks, 1.0 / looks)
    g = gaussian_filter(rng.standard_normal((SIZE, SIZE)), grain, mode="wrap") / _grain_gain(grain)
    sigma2 = np.log1p(1.0 / looks)
    return np.exp(np.sqrt(sigma2) * g - sigma2 / 2)


def generate_image(cfg: GenConfig, cls: int, index: int) -> np.ndarray:
    """One image; the random stream depends only on (seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    # structure is linear in severity, so zero-mean jitter keeps the class mean
    severity = float(np.clip(_severity(cls) + cfg.severity_jitter * rng.standard_normal(), -0.5, 1.5))
    lobe, env, amp, looks = _structure(cfg, cls, severity)
    gain = max(1.0 + cfg.gain_jitter * rng.standard_normal(), 0.05)
    floor = cfg.background_floor * max(1.0 + cfg.floor_jitter * rng.standard_normal(), 0.05)
    texture = _texture(rng, cfg.equator_texture_freq, cfg.texture_waves)
    speckle = _speckle(rng, looks, cfg.speckle_grain)
    img = (floor * (1 + amp * env * texture) + lobe) * speckle
    return img * gain * _class_scale(cfg, cls)


def generate_dataset(cfg: GenConfig, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """All ``5 * images_per_class`` images, ordered by class.

    Returns ``(images, labels)`` with images of shape (N, 180, 180).
    """
    n = N_CLASSES * cfg.images_per_class
    labels = np.repeat(np.arange(N_CLASSES), cfg.images_per_class)

    def make(i):
        return generate_image(cfg, int(labels[i]), i)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            imgs = list(ex.map(make, range(n)))
    else:
        imgs = [make(i) for i in range(n)]
    return np.stack(imgs), labels


def generate_images(cfg: GenConfig) -> list[ArsImage]:
    images, labels = generate_dataset(cfg)
    return [ArsImage(img, DeficiencyClass(int(lab))) for img, lab in zip(images, labels)]


def _as_array(image) -> np.ndarray:
    return image.pixels if isinstance(image, ArsImage) else np.asarray(image, dtype=np.float64)


def _rewrap(image, pixels):
    if isinstance(image, ArsImage):
        return ArsImage(pixels, image.label)
    return pixels


def add_gaussian_noise(image, snr_db: float, rng_seed):
    """Additive zero-mean Gaussian noise at ``snr_db`` relative to this image's
    mean squared intensity.  Not clipped."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    px = _as_array(image)
    power = np.mean(px ** 2)
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(rng_seed)
    return _rewrap(image, px + sigma * rng.standard_normal(px.shape))


def add_salt_pepper(image, fraction: float, rng_seed):
    """Corrupt exactly ``round(fraction * n_pixels)`` pixels: the first half
    (rounded up) become the image max, the rest the image min.

    Positions are drawn among pixels not already at an extreme, so every
    corrupted pixel actually changes."""
    if not 0 <= fraction < 1:
        raise ValueError("salt-and-pepper fraction must be in [0, 1)")
    px = _as_array(image)
    n = int(round(fraction * px.size))
    out = px.copy()
    if n:
        lo, hi = px.min(), px.max()
        flat_in = px.reshape(-1)
        interior = np.flatnonzero((flat_in != lo) & (flat_in != hi))
        if n > interior.size:
            raise ValueError(f"cannot corrupt {n} pixels: only {interior.size} are not already extreme")
        rng = np.random.default_rng(rng_seed)
        pos = interior[rng.choice(interior.size, size=n, replace=False)]
        n_salt = (n + 1) // 2
        flat = out.reshape(-1)
        flat[pos[:n_salt]] = hi
        flat[pos[n_salt:]] = lo
    return _rewrap(image, out)


@dataclass(frozen=True)
class NoiseSpec:
    gaussian_snr_db: float | None = None
    salt_pepper_fraction: float | None = None

    def __post_init__(self):
        if self.gaussian_snr_db is not None and not np.isfinite(self.gaussian_snr_db):
            raise ValueError("SNR must be finite")
        if self.salt_pepper_fraction is not None and not 0 <= self.salt_pepper_fraction < 1:
            raise ValueError("salt-and-pepper fraction must be in [0, 1)")

    @property
    def is_clean(self) -> bool:
        return self.gaussian_snr_db is None and not self.salt_pepper_fraction

    @property
    def tag(self) -> str:
        parts = []
        if self.gaussian_snr_db is not None:
            parts.append(f"gauss{self.gaussian_snr_db:g}dB")
        if self.salt_pepper_fraction:
            parts.append(f"sp{self.salt_pepper_fraction:g}")
        return "+".join(parts) or "clean"

    @classmethod
    def parse(cls, text: str | None) -> "NoiseSpec":
        """``clean``, ``gauss:30``, ``sp:0.1`` or ``gauss:20+sp:0.1``."""
        if text is None or text.strip() in ("", "clean", "none"):
            return cls()
        snr = sp = None
        for part in text.split("+"):
            kind, _, val = part.strip().partition(":")
            if kind == "gauss":
                snr = float(val)
            elif kind == "sp":
                sp = float(val)
            else:
                raise ValueError(f"unknown noise kind {kind!r}")
        return cls(snr, sp)


def apply_noise(images: np.ndarray, noise: NoiseSpec, seed) -> np.ndarray:
    """Noise applied per image with independent streams keyed by (seed, index)."""
    if noise.is_clean:
        return images
    out = np.empty_like(images, dtype=np.float64)
    base = np.atleast_1d(np.asarray(seed, dtype=np.uint64)).tolist()
    for i, img in enumerate(images):
        px = img
        if noise.gaussian_snr_db is not None:
            px = add_gaussian_noise(px, noise.gaussian_snr_db, np.random.SeedSequence(base + [i, 1]))
        if noise.salt_pepper_fraction:
            px = add_salt_pepper(px, noise.salt_pepper_fraction, np.random.SeedSequence(base + [i, 2]))
        out[i] = px
    return out
