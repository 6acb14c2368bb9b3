"""Link-level physical layer: power control, channel estimation, zero forcing.

Channel stacks are row-major: CH[k, :] is the length-M array-side vector of
user k. Precoder columns satisfy conj(CH) @ W = I before power scaling;
combiner rows satisfy V @ CH.T = I before unit-norm scaling. Every routine
accepts leading batch dimensions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError

PRB_BW_HZ = 180e3
THERMAL_NOISE_DBM_PER_HZ = -174.0
PILOT_LEN = 8
DATA_SYMBOL_FRACTION = 6.0 / 14.0   # pilot plus control overhead removed
MAX_SPECTRAL_EFF = 8.0              # bit/s/Hz ceiling of the highest MCS


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x_lin):
    return 10.0 * np.log10(x_lin)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x_w):
    return 10.0 * np.log10(x_w) + 30.0


@dataclass(frozen=True)
class PowerConfig:
    bs_total_dbm: float = 46.0    # whole band, split evenly over PRBs
    ue_pmax_dbm: float = 23.0
    fpc_p0_dbm: float = -85.0
    fpc_alpha: float = 0.8
    nf_bs_db: float = 5.0
    nf_ue_db: float = 9.0

    def bs_per_prb_w(self, n_prb: int) -> float:
        return dbm_to_watt(self.bs_total_dbm) / n_prb

    def noise_dl_w(self) -> float:
        return dbm_to_watt(THERMAL_NOISE_DBM_PER_HZ + lin_to_db(PRB_BW_HZ) + self.nf_ue_db)

    def noise_ul_w(self) -> float:
        return dbm_to_watt(THERMAL_NOISE_DBM_PER_HZ + lin_to_db(PRB_BW_HZ) + self.nf_bs_db)


def uplink_fpc_dbm(coupling_loss_db, cfg: PowerConfig) -> np.ndarray:
    """Fractional pathloss compensation, per PRB, clipped at the device max."""
    p = cfg.fpc_p0_dbm + cfg.fpc_alpha * np.asarray(coupling_loss_db, dtype=float)
    return np.minimum(p, cfg.ue_pmax_dbm)


def cap_total_power_dbm(per_prb_dbm, n_alloc, cfg: PowerConfig) -> np.ndarray:
    """Keep the summed transmit power of n_alloc PRBs under the device max."""
    n = np.maximum(np.asarray(n_alloc, dtype=float), 1.0)
    return np.minimum(np.asarray(per_prb_dbm, dtype=float),
                      cfg.ue_pmax_dbm - 10.0 * np.log10(n))


def _gram(ch):
    return np.einsum("...km,...jm->...kj", ch.conj(), ch)


def _solve_gram(g, rhs):
    """Solve g @ x = rhs with a trace-scaled ridge fallback on rank loss.

    Returns (x, flagged) where flagged marks batch entries that needed the
    fallback; their PRBs are reported, never silently blended in.
    """
    try:
        x = np.linalg.solve(g, rhs)
        bad = ~np.isfinite(x).all(axis=(-2, -1))
    except np.linalg.LinAlgError:
        bad = np.ones(g.shape[:-2], dtype=bool)
        x = np.zeros(np.broadcast_shapes(g.shape[:-1] + rhs.shape[-1:]), dtype=g.dtype)
    if not bad.any():
        return x, bad
    k = g.shape[-1]
    eps = 1e-8 * np.einsum("...kk->...", g).real / k
    ridge = g + (eps[..., None, None] + 1e-30) * np.eye(k, dtype=g.dtype)
    x_fix = np.linalg.solve(ridge, rhs)
    if x.ndim == 0 or x.shape != x_fix.shape:
        x = x_fix
    else:
        x = np.where(bad[..., None, None], x_fix, x)
    if not np.isfinite(x).all():
        raise EstimationError("gram solve failed even with ridge fallback")
    return x, bad


def zf_precoders(ch, per_user_power_w):
    """Zero-forcing precoder columns for the stacked rows ch (..., K, M).

    Column j is scaled to carry per_user_power_w (scalar or (..., K)), so
    conj(ch) @ W is diagonal with positive entries. Returns (W, flagged).
    """
    g = _gram(ch)
    eye = np.broadcast_to(np.eye(g.shape[-1], dtype=ch.dtype), g.shape)
    ginv, flagged = _solve_gram(g, np.ascontiguousarray(eye))
    w = np.einsum("...km,...kj->...mj", ch, ginv)
    norms = np.linalg.norm(w, axis=-2, keepdims=True)
    norms = np.maximum(norms, 1e-30)
    p = np.asarray(per_user_power_w, dtype=float)
    if p.ndim:
        p = p[..., None, :]
    return w / norms * np.sqrt(p), flagged


def zf_combiners(ch):
    """Unit-norm zero-forcing combiner rows for ch (..., K, M).

    Row k applied to a received vector y as (V @ y); V @ ch.T is diagonal
    with positive entries. Returns (V, flagged).
    """
    g = _gram(ch)
    v, flagged = _solve_gram(g, ch.conj())
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(norms, 1e-30), flagged


def project_rows_out(ch, basis):
    """Remove the span of the orthonormal columns basis (..., M, r) from
    every row of ch (..., K, M)."""
    if basis.shape[-1] == 0:
        return ch
    coef = np.einsum("...km,...mr->...kr", ch, basis.conj())
    return ch - np.einsum("...kr,...mr->...km", coef, basis)


def subspace_leakage(ch, basis):
    """Fraction of each row's energy inside the basis span, in [0, 1]."""
    total = np.einsum("...km,...km->...k", ch, ch.conj()).real
    if basis.shape[-1] == 0:
        return np.zeros_like(total)
    coef = np.einsum("...km,...mr->...kr", ch, basis.conj())
    inside = np.einsum("...kr,...kr->...k", coef, coef.conj()).real
    return inside / np.maximum(total, 1e-300)


def covariance_aided_estimate(ch_ls, basis, gate: float = 0.5):
    """Project interference out of LS rows whose in-span energy fraction is
    below the gate; rows dominated by the span are kept untouched so a user
    whose own channel lives there is not erased. Returns (rows, projected)."""
    leak = subspace_leakage(ch_ls, basis)
    proj = project_rows_out(ch_ls, basis)
    keep = leak >= gate
    return np.where(keep[..., None], ch_ls, proj), ~keep


def sample_covariance(snaps):
    """R = mean(y y^H) over snapshot rows snaps (..., n, M)."""
    n = snaps.shape[-2]
    if n == 0:
        raise EstimationError("no snapshots")
    return np.einsum("...nm,...nk->...mk", snaps, snaps.conj()) / n


def interference_subspace(cov, n_dims: int):
    """Orthonormal basis of the n_dims strongest eigenvectors of cov.

    Returns (basis (..., M, n_dims), eigvals (..., n_dims)) ordered by
    decreasing eigenvalue.
    """
    m = cov.shape[-1]
    if not 0 <= n_dims <= m:
        raise EstimationError(f"subspace size {n_dims} out of range for M={m}")
    vals, vecs = np.linalg.eigh(cov)
    sel = np.arange(m - 1, m - 1 - n_dims, -1)
    return vecs[..., sel], vals[..., sel].real


def downlink_sinr(hu, w_cols, cell_of, slot_of, noise_w):
    """Per-active-user downlink SINR.

    hu (C, A, M): channel rows of the A scheduled users towards every cell;
    w_cols (C, M, K): power-scaled precoder columns per cell, zero where a
    slot is idle; cell_of/slot_of (A,): serving cell and slot of each user.
    Interference sums every transmitted column of every cell, the serving
    cell's other layers included.
    """
    amps = np.matmul(hu.conj(), w_cols)                     # (C, A, K)
    p2 = amps.real ** 2 + amps.imag ** 2
    tot = p2.sum(axis=(0, 2))                               # (A,)
    sig = p2[cell_of, np.arange(cell_of.size), slot_of]
    return sig / (tot - sig + noise_w)


def uplink_sinr(hu, v_rows, cell_of, slot_of, p_w, noise_w):
    """Per-active-user uplink SINR at its serving cell's combiner output.

    hu (C, A, M) as in downlink_sinr; v_rows (C, K, M) unit-norm combiner
    rows; p_w (A,) transmit power per PRB of each active user. Every active
    user interferes at every combiner; noise passes with unit gain.
    """
    b = np.matmul(v_rows, hu.transpose(0, 2, 1))            # (C, K, A)
    p2 = (b.real ** 2 + b.imag ** 2) * np.asarray(p_w, dtype=np.float64)
    tot = p2.sum(axis=-1)                                   # (C, K)
    sig = p2[cell_of, slot_of, np.arange(cell_of.size)]
    return sig / (tot[cell_of, slot_of] - sig + noise_w)


def genie_covariance(los_rows, ray_var, tx_power_w, noise_w):
    """Exact received covariance for independent Rician rows (..., J, M).

    Row j contributes p_j (l_j l_j^H + ray_var_j I); the noise floor adds
    noise_w I. ray_var and tx_power_w broadcast against (..., J).
    """
    p = np.asarray(tx_power_w, dtype=float)
    r = np.einsum("...j,...jm,...jk->...mk", p, los_rows, los_rows.conj())
    m = los_rows.shape[-1]
    iso = np.sum(np.broadcast_to(p * np.asarray(ray_var, dtype=float),
                                 los_rows.shape[:-1]), axis=-1)
    eye = np.eye(m, dtype=los_rows.dtype)
    return r + (iso + noise_w)[..., None, None] * eye
