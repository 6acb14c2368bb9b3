"""Propagation and small-scale channel model.

Large-scale laws follow the 3GPP urban-macro family: ground users take the
terrestrial UMa line-of-sight probability, dual-slope path loss and shadowing;
aerial users above 22.5 m switch to the aerial UMa variants (height-dependent
LoS probability that saturates at 1 above 100 m, single-slope LoS path loss,
height-dependent shadowing). Small-scale fading is geometric Rician: a fixed
steering-vector outer product plus an i.i.d. Rayleigh remainder, one
independent realization per PRB.
"""

import numpy as np

GUE = "gue"
UAV = "uav"

SPEED_OF_LIGHT = 299792458.0  # m/s

# element pattern constants (parabolic single-element model)
ELEM_MAX_GAIN_DBI = 8.0
ELEM_HPBW_DEG = 65.0       # both planes
ELEM_FLOOR_DB = 30.0       # per-plane and combined attenuation cap

# shadowing standard deviations, dB
SF_STD_GUE_LOS = 4.0
SF_STD_GUE_NLOS = 6.0
SF_STD_UAV_NLOS = 6.0

# Rician K endpoints for aerial LoS links, dB
K_LOS_GROUND_DB = 9.0      # at 1.5 m
K_LOS_TOP_DB = 20.0        # at 300 m
UAV_K_H_REF_LOW = 1.5      # m
UAV_K_H_REF_HIGH = 300.0   # m

AERIAL_H_MIN = 22.5        # m, below this UAVs reuse the terrestrial laws
AERIAL_LOS_CERTAIN_H = 100.0  # m, LoS probability is 1 above this


def los_probability(d2d_m, height_m, kind: str):
    """LoS probability of a link.

    Parameters
    ----------
    d2d_m : array_like
        Ground-plane distance, m.
    height_m : array_like
        User antenna height, m.
    kind : str
        GUE or UAV.

    Returns
    -------
    ndarray of probabilities in [0, 1].
    """
    d = np.asarray(d2d_m, dtype=float)
    h = np.asarray(height_m, dtype=float)
    d, h = np.broadcast_arrays(d, h)
    p = _los_prob_terrestrial(d, h)
    if kind == UAV:
        mid = (h > AERIAL_H_MIN) & (h <= AERIAL_LOS_CERTAIN_H)
        if np.any(mid):
            p = np.where(mid, _los_prob_aerial(d, h), p)
        p = np.where(h > AERIAL_LOS_CERTAIN_H, 1.0, p)
    elif kind != GUE:
        raise ValueError(f"unknown user kind: {kind!r}")
    return p


def _los_prob_terrestrial(d, h):
    with np.errstate(divide="ignore"):
        base = 18.0 / np.where(d > 0, d, np.inf)
    p = base + np.exp(-d / 63.0) * (1.0 - base)
    c = np.zeros_like(h)
    lifted = h > 13.0
    c = np.where(lifted, ((np.clip(h, 13.0, 23.0) - 13.0) / 10.0) ** 1.5, c)
    p = p * (1.0 + c * 1.25 * (d / 100.0) ** 3 * np.exp(-d / 150.0))
    return np.where(d <= 18.0, 1.0, np.clip(p, 0.0, 1.0))


def _los_prob_aerial(d, h):
    # valid for 22.5 < h <= 100
    lh = np.log10(np.clip(h, AERIAL_H_MIN, AERIAL_LOS_CERTAIN_H))
    d1 = np.maximum(460.0 * lh - 700.0, 18.0)
    p1 = 4300.0 * lh - 3800.0
    with np.errstate(divide="ignore"):
        frac = d1 / np.where(d > 0, d, np.inf)
    p = frac + np.exp(-d / p1) * (1.0 - frac)
    return np.where(d <= d1, 1.0, np.clip(p, 0.0, 1.0))


def path_loss_db(d2d_m, height_m, los, kind: str, fc_ghz: float = 2.0, bs_height_m: float = 25.0):
    """Path loss of a link in dB (positive).

    `los` is a boolean array; mixed LoS/NLoS inputs are evaluated elementwise.
    Aerial NLoS is floored at the aerial LoS law so that NLoS is never the
    better channel at equal geometry.
    """
    d2d = np.asarray(d2d_m, dtype=float)
    h = np.asarray(height_m, dtype=float)
    los = np.asarray(los, dtype=bool)
    d2d, h, los = np.broadcast_arrays(d2d, h, los)
    d3d = np.sqrt(d2d**2 + (bs_height_m - h) ** 2)
    d3d = np.maximum(d3d, 1.0)  # guard the log at degenerate geometry

    pl_t = _pl_terrestrial(d2d, d3d, h, los, fc_ghz, bs_height_m)
    if kind == GUE:
        return pl_t
    if kind != UAV:
        raise ValueError(f"unknown user kind: {kind!r}")

    lg_d3 = np.log10(d3d)
    pl_los_a = 28.0 + 22.0 * lg_d3 + 20.0 * np.log10(fc_ghz)
    pl_nlos_a = (-17.5 + (46.0 - 7.0 * np.log10(np.maximum(h, 1.0))) * lg_d3
                 + 20.0 * np.log10(40.0 * np.pi * fc_ghz / 3.0))
    pl_a = np.where(los, pl_los_a, np.maximum(pl_nlos_a, pl_los_a))
    return np.where(h > AERIAL_H_MIN, pl_a, pl_t)


def _pl_terrestrial(d2d, d3d, h_ut, los, fc_ghz, h_bs):
    # dual-slope UMa with effective environment height 1 m
    fc_hz = fc_ghz * 1e9
    d_bp = 4.0 * (h_bs - 1.0) * np.maximum(h_ut - 1.0, 0.05) * fc_hz / SPEED_OF_LIGHT
    lg = np.log10(d3d)
    pl1 = 28.0 + 22.0 * lg + 20.0 * np.log10(fc_ghz)
    pl2 = (28.0 + 40.0 * lg + 20.0 * np.log10(fc_ghz)
           - 9.0 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2))
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    pl_nlos = (13.54 + 39.08 * lg + 20.0 * np.log10(fc_ghz)
               - 0.6 * (np.maximum(h_ut, 1.5) - 1.5))
    return np.where(los, pl_los, np.maximum(pl_nlos, pl_los))


def shadowing_std_db(height_m, los, kind: str):
    """Lognormal shadowing standard deviation in dB."""
    h = np.asarray(height_m, dtype=float)
    los = np.asarray(los, dtype=bool)
    h, los = np.broadcast_arrays(h, los)
    std = np.where(los, SF_STD_GUE_LOS, SF_STD_GUE_NLOS)
    if kind == UAV:
        aerial = h > AERIAL_H_MIN
        std_a = np.where(los, 4.64 * np.exp(-0.0066 * h), SF_STD_UAV_NLOS)
        std = np.where(aerial, std_a, std)
    elif kind != GUE:
        raise ValueError(f"unknown user kind: {kind!r}")
    return std


def sample_shadowing_db(std_db, rng: np.random.Generator):
    """One i.i.d. zero-mean lognormal shadowing draw per entry of std_db."""
    std = np.asarray(std_db, dtype=float)
    return rng.standard_normal(std.shape) * std


def rician_k_linear(height_m, los, kind: str):
    """Rician K factor (linear). NLoS links are pure Rayleigh, K = 0.

    LoS ground links use a fixed K; LoS aerial links interpolate linearly in
    height between the ground value and a stronger high-altitude value.
    """
    h = np.asarray(height_m, dtype=float)
    los = np.asarray(los, dtype=bool)
    h, los = np.broadcast_arrays(h, los)
    if kind == GUE:
        k_db = np.full(h.shape, K_LOS_GROUND_DB)
    elif kind == UAV:
        frac = (np.clip(h, UAV_K_H_REF_LOW, UAV_K_H_REF_HIGH) - UAV_K_H_REF_LOW) / (
            UAV_K_H_REF_HIGH - UAV_K_H_REF_LOW)
        k_db = K_LOS_GROUND_DB + (K_LOS_TOP_DB - K_LOS_GROUND_DB) * frac
    else:
        raise ValueError(f"unknown user kind: {kind!r}")
    return np.where(los, 10.0 ** (k_db / 10.0), 0.0)


def element_gain_db(az_rad, el_rad):
    """Single-element gain, dBi, at local azimuth/elevation off boresight.

    Parabolic pattern in both planes with a common attenuation floor; peak
    ELEM_MAX_GAIN_DBI at boresight, floor-capped ELEM_FLOOR_DB behind.
    """
    az_deg = np.degrees(np.asarray(az_rad, dtype=float))
    el_deg = np.degrees(np.asarray(el_rad, dtype=float))
    att_az = np.minimum(12.0 * (az_deg / ELEM_HPBW_DEG) ** 2, ELEM_FLOOR_DB)
    att_el = np.minimum(12.0 * (el_deg / ELEM_HPBW_DEG) ** 2, ELEM_FLOOR_DB)
    return ELEM_MAX_GAIN_DBI - np.minimum(att_az + att_el, ELEM_FLOOR_DB)


def steering_vector(positions_wl: np.ndarray, az_rad, el_rad):
    """Narrowband steering vector for an array.

    Parameters
    ----------
    positions_wl : (N, 3) array
        Element positions in wavelengths.
    az_rad, el_rad : scalars or broadcastable arrays
        Direction of departure/arrival; azimuth in the x-y plane, elevation
        positive above it.

    Returns
    -------
    complex ndarray with shape broadcast(az, el).shape + (N,), unit modulus
    entries, phase 2*pi*(position . unit_direction).
    """
    az = np.asarray(az_rad, dtype=float)
    el = np.asarray(el_rad, dtype=float)
    az, el = np.broadcast_arrays(az, el)
    ce = np.cos(el)
    u = np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)
    phase = 2.0 * np.pi * (u[..., None, :] * positions_wl).sum(-1)
    return np.exp(1j * phase)


def draw_channel(g_lin: float, k_lin: float, a_bs: np.ndarray, a_ue: np.ndarray,
                 rng: np.random.Generator, n_prb: int = 1) -> np.ndarray:
    """Per-PRB geometric Rician channel matrices.

    H = sqrt(g) * ( sqrt(K/(K+1)) * a_bs a_ue^H + sqrt(1/(K+1)) * W ),
    with W i.i.d. unit complex Gaussian, one independent W per PRB.

    Returns (n_prb, n_bs, n_ue), squeezed to (n_bs, n_ue) when n_prb == 1.
    """
    a_bs = np.asarray(a_bs)
    a_ue = np.asarray(a_ue)
    m, n = a_bs.shape[-1], a_ue.shape[-1]
    los_part = np.sqrt(k_lin / (k_lin + 1.0)) * np.outer(a_bs, a_ue.conj())
    w = (rng.standard_normal((n_prb, m, n)) + 1j * rng.standard_normal((n_prb, m, n))) / np.sqrt(2.0)
    h = np.sqrt(g_lin) * (los_part[None, :, :] + np.sqrt(1.0 / (k_lin + 1.0)) * w)
    return h[0] if n_prb == 1 else h
