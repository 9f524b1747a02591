"""Synthetic IQ signal generation: modulation, pulse shaping, channel, datasets.

An instance is built in three independent stages: a symbol realization drawn
from the scheme's bit source, a deterministic modulator with pulse shaping,
and a channel that applies phase/frequency offset, optional flat fading, and
SNR-calibrated complex white noise. Every instance owns a counter-based RNG
stream keyed by (master_seed, instance_id), so any single instance can be
regenerated without replaying the ones before it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DatasetManifest, SignalDataset

DEFAULT_SPS = 8
DEFAULT_ROLLOFF = 0.35
RRC_SPAN_SYMBOLS = 8
GFSK_BT = 0.3
CPM_MOD_INDEX = 0.5


class UnknownSchemeError(KeyError):
    """Requested modulation scheme is not in the registry."""


@dataclass(frozen=True)
class ModulationScheme:
    """One entry of the scheme registry.

    Linear schemes carry a Gray-coded constellation indexed by the symbol's
    bit group read MSB-first; continuous-phase schemes carry a modulation
    index and, for Gaussian-filtered variants, a bandwidth-time product.
    """

    name: str
    bits_per_symbol: int
    constellation: np.ndarray | None  # complex128, unit mean power; None for CPM
    mod_index: float | None = None
    gauss_bt: float | None = None

    @property
    def is_linear(self) -> bool:
        return self.constellation is not None


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _gray_axis_levels(nbits: int) -> np.ndarray:
    # Position k on the axis gets Gray code _gray(k), so neighbours differ
    # in one bit; returns table[code] = level with levels -(2^n-1)..(2^n-1).
    m = 1 << nbits
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    table = np.empty(m)
    for k in range(m):
        table[_gray(k)] = levels[k]
    return table


def _psk_table(nbits: int) -> np.ndarray:
    m = 1 << nbits
    table = np.empty(m, dtype=np.complex128)
    for k in range(m):
        table[_gray(k)] = np.exp(2j * np.pi * k / m)
    return table


def _qam_table(nbits_per_axis: int) -> np.ndarray:
    axis = _gray_axis_levels(nbits_per_axis)
    m_axis = 1 << nbits_per_axis
    table = np.empty(m_axis * m_axis, dtype=np.complex128)
    for ci in range(m_axis):
        for cq in range(m_axis):
            # First bit group drives I, second drives Q.
            table[(ci << nbits_per_axis) | cq] = axis[ci] + 1j * axis[cq]
    return table / np.sqrt(np.mean(np.abs(table) ** 2))


def _pam_table(nbits: int) -> np.ndarray:
    axis = _gray_axis_levels(nbits).astype(np.complex128)
    return axis / np.sqrt(np.mean(np.abs(axis) ** 2))


def _build_registry() -> dict[str, ModulationScheme]:
    bpsk = np.array([1.0 + 0j, -1.0 + 0j])
    # QPSK: first bit flips I, second flips Q; (1,0) -> (-1+1j)/sqrt(2).
    qpsk = np.array([(1 - 2 * ((i >> 1) & 1)) + 1j * (1 - 2 * (i & 1))
                     for i in range(4)]) / np.sqrt(2)
    schemes = [
        ModulationScheme("BPSK", 1, bpsk),
        ModulationScheme("QPSK", 2, qpsk),
        ModulationScheme("PSK8", 3, _psk_table(3)),
        ModulationScheme("QAM16", 4, _qam_table(2)),
        ModulationScheme("QAM64", 6, _qam_table(3)),
        ModulationScheme("PAM4", 2, _pam_table(2)),
        ModulationScheme("GFSK", 1, None, mod_index=CPM_MOD_INDEX, gauss_bt=GFSK_BT),
        ModulationScheme("CPFSK", 1, None, mod_index=CPM_MOD_INDEX),
    ]
    return {s.name: s for s in schemes}


SCHEMES: dict[str, ModulationScheme] = _build_registry()
ALL_SCHEME_NAMES: tuple[str, ...] = tuple(SCHEMES)


def get_scheme(name: str) -> ModulationScheme:
    try:
        return SCHEMES[name]
    except KeyError:
        raise UnknownSchemeError(
            f"unknown scheme {name!r}, known: {sorted(SCHEMES)}") from None


def constellation(name: str) -> np.ndarray:
    """Return a copy of the Gray-coded constellation for a linear scheme."""
    scheme = get_scheme(name)
    if scheme.constellation is None:
        raise ValueError(f"{name} is a continuous-phase scheme with no constellation")
    return scheme.constellation.copy()


def rrc_taps(sps: int, rolloff: float = DEFAULT_ROLLOFF,
             span_symbols: int = RRC_SPAN_SYMBOLS) -> np.ndarray:
    """Root-raised-cosine taps normalized so shaped symbols keep unit power.

    The taps satisfy sum(g^2) == sps, which makes the average power of a
    shaped unit-energy symbol stream equal to the symbol energy.
    """
    if not 0 < rolloff < 1:
        raise ValueError(f"rolloff must be in (0, 1), got {rolloff}")
    n = span_symbols * sps
    t = (np.arange(-n // 2, n // 2 + 1)) / sps
    taps = np.empty(len(t))
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            taps[i] = 1.0 - rolloff + 4 * rolloff / np.pi
        elif abs(abs(ti) - 1.0 / (4 * rolloff)) < 1e-9:
            taps[i] = (rolloff / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * rolloff))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * rolloff)))
        else:
            num = (np.sin(np.pi * ti * (1 - rolloff))
                   + 4 * rolloff * ti * np.cos(np.pi * ti * (1 + rolloff)))
            den = np.pi * ti * (1 - (4 * rolloff * ti) ** 2)
            taps[i] = num / den
    return taps * np.sqrt(sps / np.sum(taps ** 2))


def _bits_to_indices(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    grouped = bits.reshape(-1, bits_per_symbol)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return grouped @ weights


def _gaussian_kernel(bt: float, sps: int) -> np.ndarray:
    # Classic Gaussian frequency pulse for GFSK, truncated to +-2 symbols
    # and normalized to unit area so total phase per symbol is preserved.
    t = np.arange(-2 * sps, 2 * sps + 1) / sps
    sigma = np.sqrt(np.log(2)) / (2 * np.pi * bt)
    kernel = np.exp(-t ** 2 / (2 * sigma ** 2))
    return kernel / kernel.sum()


def modulate(scheme: ModulationScheme | str, bits: np.ndarray,
             sps: int = DEFAULT_SPS, pulse: str = "rrc",
             rolloff: float = DEFAULT_ROLLOFF) -> np.ndarray:
    """Map a bit vector to complex baseband of length num_symbols * sps.

    Args:
        scheme: Registry entry or name.
        bits: 0/1 array; length must be a multiple of bits_per_symbol.
        sps: Samples per symbol.
        pulse: "rrc" or "rect" for linear schemes; ignored for CPM schemes,
            whose pulse shape is fixed by the scheme definition.
        rolloff: RRC roll-off factor.

    Returns:
        complex128 array of exactly len(bits) / bits_per_symbol * sps samples.
    """
    if isinstance(scheme, str):
        scheme = get_scheme(scheme)
    bits = np.asarray(bits)
    if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be a 1-D array of 0/1")
    if len(bits) == 0 or len(bits) % scheme.bits_per_symbol != 0:
        raise ValueError(
            f"bit count {len(bits)} is not a positive multiple of "
            f"bits_per_symbol={scheme.bits_per_symbol} for {scheme.name}")
    if sps < 1:
        raise ValueError(f"sps must be >= 1, got {sps}")
    num_symbols = len(bits) // scheme.bits_per_symbol

    if scheme.is_linear:
        symbols = scheme.constellation[_bits_to_indices(bits, scheme.bits_per_symbol)]
        if pulse == "rect":
            return np.repeat(symbols, sps)
        if pulse == "rrc":
            taps = rrc_taps(sps, rolloff)
            up = np.zeros(num_symbols * sps, dtype=np.complex128)
            up[::sps] = symbols
            full = np.convolve(up, taps)
            half = (len(taps) - 1) // 2
            return full[half:half + num_symbols * sps]
        raise ValueError(f"unknown pulse {pulse!r}, expected 'rrc' or 'rect'")

    # Continuous-phase schemes: bit 0 -> +1, bit 1 -> -1 frequency symbol,
    # phase advances by pi * mod_index per symbol.
    nrz = 1.0 - 2.0 * bits.astype(np.float64)
    freq = np.repeat(nrz, sps)
    if scheme.gauss_bt is not None:
        kernel = _gaussian_kernel(scheme.gauss_bt, sps)
        freq = np.convolve(freq, kernel, mode="same")
    phase = np.pi * scheme.mod_index * np.cumsum(freq) / sps
    return np.exp(1j * phase)


@dataclass(frozen=True)
class ChannelSpec:
    """Impairments applied to a clean baseband signal.

    ``snr_db=None`` is the explicit noise-off switch; noise power is otherwise
    calibrated against the measured power of the impaired-but-clean signal.
    ``freq_offset_cps`` is in cycles per sample.
    """

    snr_db: float | None
    phase_offset_rad: float = 0.0
    freq_offset_cps: float = 0.0
    fading: str = "none"  # "none" or "rayleigh" (single complex tap)


def apply_channel(x: np.ndarray, spec: ChannelSpec,
                  rng: np.random.Generator) -> np.ndarray:
    """Apply fading, frequency offset, phase offset, then calibrated noise."""
    x = np.asarray(x, dtype=np.complex128)
    if not np.isfinite(x.real).all() or not np.isfinite(x.imag).all():
        raise ValueError("channel input contains NaN or Inf")
    if spec.fading not in ("none", "rayleigh"):
        raise ValueError(f"unknown fading mode {spec.fading!r}")
    y = x * np.exp(1j * spec.phase_offset_rad)
    if spec.freq_offset_cps != 0.0:
        y = y * np.exp(2j * np.pi * spec.freq_offset_cps * np.arange(len(y)))
    if spec.fading == "rayleigh":
        tap = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
        y = y * tap
    if spec.snr_db is not None:
        signal_power = np.mean(np.abs(y) ** 2)
        if signal_power == 0:
            raise ValueError("cannot calibrate SNR for an all-zero signal")
        noise_power = signal_power / (10 ** (spec.snr_db / 10))
        noise = np.sqrt(noise_power / 2) * (rng.standard_normal(len(y))
                                            + 1j * rng.standard_normal(len(y)))
        y = y + noise
    return y


def instance_rng(master_seed: int, instance_id: int) -> np.random.Generator:
    """Counter-based per-instance stream; regenerable without replay."""
    key = np.array([master_seed % 2 ** 64, instance_id % 2 ** 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def synth_dataset(schemes: list[str], snr_grid_db: list[int], per_cell: int,
                  instance_len: int = 128, master_seed: int = 0,
                  sps: int = DEFAULT_SPS, pulse: str = "rrc",
                  rolloff: float = DEFAULT_ROLLOFF, random_phase: bool = True,
                  freq_offset_cps: float = 0.0, fading: str = "none",
                  ) -> tuple[SignalDataset, DatasetManifest]:
    """Synthesize a labeled dataset over the (scheme, SNR) grid.

    Each cell receives exactly ``per_cell`` instances. Per instance, the
    stream from (master_seed, instance_id) draws the payload bits, a uniform
    carrier phase when ``random_phase`` (the default channel ambiguity; no
    frequency offset or fading unless requested), any fading tap, and the
    noise. A guard band of extra symbols is modulated and the central
    ``instance_len`` samples kept, so instances sit in the shaping filter's
    steady state.

    Returns:
        (dataset, manifest); labels follow the order of ``schemes``.
    """
    if not schemes:
        raise ValueError("schemes list is empty")
    if len(set(schemes)) != len(schemes):
        raise ValueError(f"duplicate scheme names in {schemes}")
    resolved = [get_scheme(s) for s in schemes]
    snr_grid = [int(s) for s in snr_grid_db]
    if not snr_grid or len(set(snr_grid)) != len(snr_grid):
        raise ValueError(f"SNR grid must be non-empty and distinct, got {snr_grid_db}")
    if per_cell < 1 or instance_len < sps:
        raise ValueError("per_cell must be >= 1 and instance_len >= sps")

    guard = RRC_SPAN_SYMBOLS
    num_symbols = int(np.ceil(instance_len / sps)) + 2 * guard
    total = len(resolved) * len(snr_grid) * per_cell
    samples = np.empty((total, 2, instance_len), dtype=np.float32)
    labels = np.empty(total, dtype=np.int32)
    snr_tags = np.empty(total, dtype=np.int16)

    instance_id = 0
    for cls_idx, scheme in enumerate(resolved):
        for snr in snr_grid:
            for _ in range(per_cell):
                rng = instance_rng(master_seed, instance_id)
                bits = rng.integers(0, 2, num_symbols * scheme.bits_per_symbol)
                clean = modulate(scheme, bits, sps=sps, pulse=pulse, rolloff=rolloff)
                start = (len(clean) - instance_len) // 2
                clean = clean[start:start + instance_len]
                spec = ChannelSpec(
                    snr_db=float(snr),
                    phase_offset_rad=rng.uniform(0, 2 * np.pi) if random_phase else 0.0,
                    freq_offset_cps=freq_offset_cps, fading=fading)
                noisy = apply_channel(clean, spec, rng)
                samples[instance_id, 0] = noisy.real
                samples[instance_id, 1] = noisy.imag
                labels[instance_id] = cls_idx
                snr_tags[instance_id] = snr
                instance_id += 1

    if not np.isfinite(samples).all():
        raise ValueError("synthesized samples contain NaN or Inf")
    manifest = DatasetManifest(num_instances=total, instance_len=instance_len,
                               class_names=tuple(s.name for s in resolved),
                               snr_levels=tuple(sorted(snr_grid)),
                               creation_seed=master_seed)
    dataset = SignalDataset(samples, labels, snr_tags)
    return dataset, manifest
