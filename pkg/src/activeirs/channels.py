"""Scenario geometry, Rayleigh channel generation, and cascaded-link algebra.

Conventions
-----------
Amplitudes carry units of sqrt(watt-gain).  A beam vector ``v`` of length N
holds the conjugates of the per-element reflection/amplification
coefficients, so the cascaded gain seen by device k is ``h_d[k] + v^H q[k]``
with ``q[k][n] = conj(g[n]) * h_r[k][n]``.  The element coefficients
themselves are ``conj(v)``; amplitudes may exceed 1 (amplifying surface).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Scenario",
    "ChannelSet",
    "path_loss",
    "dbm_to_watt",
    "generate_channels",
    "effective_gain",
    "amplification_power",
]

# substream tags for the counter-based generator
_STREAM_G = 0       # IRS -> AP link
_STREAM_HR = 1      # device -> IRS links
_STREAM_HD = 2      # device -> AP links
_STREAM_POS = 3     # device placement


def dbm_to_watt(x_dbm: float) -> float:
    """Convert a dBm power level to watts (e.g. -75 dBm -> 10**-10.5 W)."""
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def path_loss(distance, exponent: float, ref_loss_db: float = 30.0):
    """Linear power gain 10^(-ref_loss_db/10) * distance^(-exponent).

    The model is undefined below the 1 m reference distance; a smaller
    distance raises ValueError.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("path_loss undefined below the 1 m reference distance")
    out = 10.0 ** (-ref_loss_db / 10.0) * d ** (-exponent)
    return float(out) if np.isscalar(distance) else out


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one uplink deployment.

    ``E`` is the per-device energy budget in joules (a scalar is broadcast
    to all K devices).  ``P_r`` is the surface amplification power budget in
    watts; ``sigma2``/``sigma_r2`` are the receiver and surface noise powers
    in watts.
    """

    K: int
    N: int
    T_max: float
    E: tuple = 0.01
    P_r: float = 1e-3
    sigma2: float = dbm_to_watt(-75.0)
    sigma_r2: float = dbm_to_watt(-75.0)
    ap_pos: tuple = (0.0, 0.0, 0.0)
    irs_pos: tuple = (0.0, 0.0, 4.0)
    device_center: tuple = (30.0, 0.0, 4.0)
    device_radius: float = 5.0
    alpha_ris: float = 2.2
    alpha_direct: float = 3.4
    ref_loss_db: float = 30.0

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise ValueError("K and N must be at least 1")
        if self.T_max <= 0:
            raise ValueError("T_max must be positive")
        e = self.E
        if np.isscalar(e):
            e = (float(e),) * self.K
        else:
            e = tuple(float(x) for x in e)
        if len(e) != self.K:
            raise ValueError("E must be scalar or length K")
        if any(x <= 0 for x in e):
            raise ValueError("per-device energies must be positive")
        object.__setattr__(self, "E", e)
        if self.P_r <= 0:
            raise ValueError("P_r must be positive")
        if self.sigma2 <= 0 or self.sigma_r2 < 0:
            raise ValueError("sigma2 must be positive and sigma_r2 nonnegative")
        if self.alpha_ris <= 0 or self.alpha_direct <= 0:
            raise ValueError("path-loss exponents must be positive")
        for name in ("ap_pos", "irs_pos", "device_center"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3:
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)
        if self.device_radius < 0:
            raise ValueError("device_radius must be nonnegative")

    @property
    def energy(self) -> np.ndarray:
        return np.asarray(self.E, dtype=float)

    def with_(self, **kw) -> "Scenario":
        """Copy with replaced fields (re-validated)."""
        if "K" in kw and "E" not in kw and len(set(self.E)) == 1:
            kw["E"] = self.E[0]
        return replace(self, **kw)


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization plus the derived solver matrices.

    All arrays are read-only; a ChannelSet can safely be shared between
    concurrently running solver instances.
    """

    g: np.ndarray          # (N,)  IRS -> AP
    h_r: np.ndarray        # (K, N) device -> IRS
    h_d: np.ndarray        # (K,)  device -> AP
    q: np.ndarray          # (K, N) conj(g) * h_r
    G_diag: np.ndarray     # (N,)  |g|^2
    Hr_diag: np.ndarray    # (K, N) |h_r|^2
    device_pos: np.ndarray = field(default=None, repr=False)  # (K, 3)

    def __post_init__(self):
        for name in ("g", "h_r", "h_d", "q", "G_diag", "Hr_diag", "device_pos"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def K(self) -> int:
        return self.h_r.shape[0]

    @property
    def N(self) -> int:
        return self.g.shape[0]

    def to_csv(self, path_or_buf) -> None:
        """Dump complex entries as rows (link, k, n, re, im) for debugging.

        The AP-IRS link uses k = -1 and the direct link uses n = -1 since
        those indices do not apply.
        """
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, "w", newline="")
            close = True
        else:
            buf = path_or_buf
        try:
            w = csv.writer(buf)
            w.writerow(["link", "k", "n", "re", "im"])
            for n in range(self.N):
                w.writerow(["g", -1, n, repr(float(self.g[n].real)), repr(float(self.g[n].imag))])
            for k in range(self.K):
                for n in range(self.N):
                    z = self.h_r[k, n]
                    w.writerow(["h_r", k, n, repr(float(z.real)), repr(float(z.imag))])
            for k in range(self.K):
                z = self.h_d[k]
                w.writerow(["h_d", k, -1, repr(float(z.real)), repr(float(z.imag))])
        finally:
            if close:
                buf.close()


def _substream(seed: int, link: int, k: int) -> np.random.Generator:
    """Counter-based substream keyed by (seed, link, device).

    Draw order within a stream is element-major, so enlarging K or N leaves
    previously drawn devices/elements untouched.  The scenario enters only
    through deterministic scaling, never the stream key.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), link, k))))


def _cn01(rng: np.random.Generator, n: int) -> np.ndarray:
    # interleaved draws keep the per-element prefix stable when n grows
    z = rng.standard_normal(2 * n)
    return (z[0::2] + 1j * z[1::2]) / np.sqrt(2.0)


def generate_channels(sc: Scenario, seed: int) -> ChannelSet:
    """Draw one Rayleigh-faded realization of all links for the scenario.

    Each entry is sqrt(path_loss) * CN(0,1); devices are placed uniformly on
    a disk of ``device_radius`` around ``device_center`` (inverse-CDF radius
    sampling).  Output is bit-identical for identical (scenario, seed).
    """
    ap = np.asarray(sc.ap_pos)
    irs = np.asarray(sc.irs_pos)
    center = np.asarray(sc.device_center)

    pos = np.empty((sc.K, 3))
    for k in range(sc.K):
        rng = _substream(seed, _STREAM_POS, k)
        u1, u2 = rng.random(2)
        r = sc.device_radius * np.sqrt(u1)
        th = 2.0 * np.pi * u2
        pos[k] = center + np.array([r * np.cos(th), r * np.sin(th), 0.0])

    d_ap_irs = float(np.linalg.norm(ap - irs))
    g = np.sqrt(path_loss(d_ap_irs, sc.alpha_ris, sc.ref_loss_db)) * _cn01(
        _substream(seed, _STREAM_G, 0), sc.N
    )

    h_r = np.empty((sc.K, sc.N), dtype=complex)
    h_d = np.empty(sc.K, dtype=complex)
    for k in range(sc.K):
        d_irs = float(np.linalg.norm(pos[k] - irs))
        d_ap = float(np.linalg.norm(pos[k] - ap))
        h_r[k] = np.sqrt(path_loss(d_irs, sc.alpha_ris, sc.ref_loss_db)) * _cn01(
            _substream(seed, _STREAM_HR, k), sc.N
        )
        h_d[k] = np.sqrt(path_loss(d_ap, sc.alpha_direct, sc.ref_loss_db)) * _cn01(
            _substream(seed, _STREAM_HD, k), 1
        )[0]

    q = np.conj(g)[None, :] * h_r
    return ChannelSet(
        g=g,
        h_r=h_r,
        h_d=h_d,
        q=q,
        G_diag=np.abs(g) ** 2,
        Hr_diag=np.abs(h_r) ** 2,
        device_pos=pos,
    )


def effective_gain(v: np.ndarray, k: int, ch: ChannelSet):
    """Return (signal_gain, irs_noise_gain) for beam v at device k.

    signal_gain = |h_d[k] + v^H q[k]|^2 and irs_noise_gain = sum |v_n|^2 |g_n|^2,
    the squared norm of the amplified surface-noise path to the AP.
    """
    v = np.asarray(v)
    if v.shape != (ch.N,):
        raise ValueError(f"beam vector must have length {ch.N}")
    sig = abs(ch.h_d[k] + np.vdot(v, ch.q[k])) ** 2
    noise = float(np.sum(np.abs(v) ** 2 * ch.G_diag))
    return float(sig), noise


def amplification_power(v: np.ndarray, p: float, k: int, ch: ChannelSet, sigma_r2: float) -> float:
    """Mean power radiated by the surface: p * v^H diag(|h_r|^2) v + sigma_r2 * ||v||^2."""
    v = np.asarray(v)
    a2 = np.abs(v) ** 2
    return float(p * np.sum(a2 * ch.Hr_diag[k]) + sigma_r2 * np.sum(a2))
