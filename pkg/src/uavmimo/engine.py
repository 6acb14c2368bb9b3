"""Per-drop simulation pipeline.

One drop realizes user positions, LoS states, shadowing, per-PRB fading, CSI
acquisition, precoding/combining and SINR for every configured mode. All
randomness comes from substreams keyed on (master_seed, purpose, drop[, prb]),
so results are independent of worker count and of which modes are enabled.

Channels are kept as effective base-station-side vectors: the user side is a
single antenna, or an analog beam already folded in, so every link is one
length-128 vector per PRB (its column-0 slice doubles as the 16-element
single-RF-chain panel). The LoS part is flat across the band; the Rayleigh
part is redrawn per PRB.
"""

from dataclasses import dataclass

import numpy as np

from .arrays import (BS_DOWNTILT_DEG, mmimo_panel, su_panel, su_panel_weights,
                     su_subset_indices, uav_panel)
from .channel import (GUE, UAV, element_gain_db, los_probability, path_loss_db,
                      rician_k_linear, shadowing_std_db, steering_vector)
from .config import MMIMO_GUESPLIT, MMIMO_NULLS, ScenarioConfig, mode_base, mode_uses_aauav
from .deployment import NetworkLayout, associate, drop_users, link_geometry
from .metrics import per_prb_rate_bps
from .phy import (cap_total_power_dbm, covariance_aided_estimate, dbm_to_watt,
                  downlink_sinr, genie_covariance, interference_subspace,
                  uplink_fpc_dbm, uplink_sinr, zf_combiners, zf_precoders)
from .rng import COV_SNAPSHOTS, EST_NOISE, FADING, LARGE_SCALE, POSITIONS, substream
from .scheduling import (MAX_LAYERS, rotation_schedule, round_robin_schedule,
                         split_schedule)

INDOOR_PENETRATION_DB = 20.0
_INV_SQRT2 = np.float32(1.0 / np.sqrt(2.0))


@dataclass
class ModeDropResult:
    rate_bps: np.ndarray        # (n_users,) summed over allocated PRBs
    n_alloc: np.ndarray         # (n_users,) PRBs scheduled
    mean_sinr_db: np.ndarray    # (n_users,) mean of per-PRB dB values, nan if idle
    gue_sinr_db: np.ndarray     # pooled per-PRB samples, dB
    uav_sinr_db: np.ndarray
    n_regularized: int          # cell-PRB instances that needed the ZF ridge
    sinr_table: np.ndarray = None   # (n_users, n_prb) linear, only when requested


@dataclass
class DropResult:
    drop_idx: int
    is_uav: np.ndarray
    height_m: np.ndarray
    serving_cell: np.ndarray
    n_empty_cells: int
    per_mode: dict


def _complex_noise(rng, shape, dtype=np.complex64):
    flat = rng.standard_normal(shape + (2,), dtype=np.float32)
    return (flat.view(np.complex64).reshape(shape) * _INV_SQRT2).astype(dtype, copy=False)


def _schedule_rule(mode: str) -> str:
    base = mode_base(mode)
    if base == "su":
        return "su"
    if base == MMIMO_GUESPLIT:
        return "split"
    return "rot"


def run_drop(cfg: ScenarioConfig, layout: NetworkLayout, drop_idx: int,
             keep_sinr_table: bool = False) -> DropResult:
    seed = cfg.master_seed
    pos_rng = substream(seed, POSITIONS, drop_idx)
    ls_rng = substream(seed, LARGE_SCALE, drop_idx)
    est_rng = substream(seed, EST_NOISE, drop_idx)

    pop = drop_users(layout, cfg.n_gue, cfg.n_uav, cfg.uav_height_spec,
                     pos_rng, cfg.indoor_ratio)
    geom = link_geometry(layout, pop.xyz, BS_DOWNTILT_DEG)
    n_cells, n_users = geom.d2d_m.shape
    n_prb = cfg.n_prb
    heights = pop.xyz[:, 2]
    is_uav = pop.is_uav
    gm, um = ~is_uav, is_uav

    # --- large-scale state, fixed draw order: LoS, shadowing, phases ---
    plos = np.empty((n_cells, n_users))
    if gm.any():
        plos[:, gm] = los_probability(geom.d2d_m[:, gm], heights[gm], GUE)
    if um.any():
        plos[:, um] = los_probability(geom.d2d_m[:, um], heights[um], UAV)
    los = ls_rng.random((n_cells, n_users)) < plos

    pl = np.empty((n_cells, n_users))
    if gm.any():
        pl[:, gm] = path_loss_db(geom.d2d_m[:, gm], heights[gm], los[:, gm],
                                 GUE, cfg.carrier_ghz, cfg.bs_height_m)
    if um.any():
        pl[:, um] = path_loss_db(geom.d2d_m[:, um], heights[um], los[:, um],
                                 UAV, cfg.carrier_ghz, cfg.bs_height_m)
    pl[:, pop.indoor] += INDOOR_PENETRATION_DB

    sf_std = np.empty((n_cells, n_users))
    if gm.any():
        sf_std[:, gm] = shadowing_std_db(heights[gm], los[:, gm], GUE)
    if um.any():
        sf_std[:, um] = shadowing_std_db(heights[um], los[:, um], UAV)
    shadow = ls_rng.standard_normal((n_cells, n_users)) * sf_std

    g_db = -(pl + shadow) + element_gain_db(geom.bs_az_rad, geom.bs_el_rad)
    g_lin = 10.0 ** (g_db / 10.0)

    k_lin = np.empty((n_cells, n_users))
    if gm.any():
        k_lin[:, gm] = rician_k_linear(heights[gm], los[:, gm], GUE)
    if um.any():
        k_lin[:, um] = rician_k_linear(heights[um], los[:, um], UAV)

    phi = ls_rng.uniform(0.0, 2.0 * np.pi, (n_cells, n_users))
    psi = ls_rng.uniform(0.0, 2.0 * np.pi, (n_cells, n_users))

    # --- LoS vectors on the full panel (pol A block then pol B block) ---
    panel = mmimo_panel()
    n_pos = panel.n_positions
    n_elem = panel.n_elements
    pos64 = panel.positions_wl[:n_pos]
    a_bs = steering_vector(pos64, geom.bs_az_rad, geom.bs_el_rad)

    amp_los = np.sqrt(g_lin * k_lin / (k_lin + 1.0))
    ray_std = np.sqrt(g_lin / (k_lin + 1.0)).astype(np.float32)
    ray_var = (ray_std.astype(np.float64)) ** 2

    los_full = np.empty((n_cells, n_users, n_elem), dtype=np.complex64)
    base_blk = (amp_los * np.exp(1j * phi))[..., None] * a_bs
    los_full[:, :, :n_pos] = base_blk
    los_full[:, :, n_pos:] = base_blk * np.exp(1j * psi)[..., None]
    del base_blk

    # --- association on the mean power of the fixed broadcast beam ---
    su_idx = su_subset_indices()
    w_su = su_panel_weights(su_panel())
    bs_prb_w = cfg.power.bs_per_prb_w(n_prb)
    beam = np.abs(a_bs[:, :, :8] @ w_su[:8]) ** 2
    rsrp_lin = bs_prb_w * g_lin * (k_lin / (k_lin + 1.0) * beam + 1.0 / (k_lin + 1.0))
    serving = associate(10.0 * np.log10(np.maximum(rsrp_lin, 1e-300)))
    pop.serving_cell = serving

    # --- beam-steering UAV variant: LoS rows and link-budget gain ---
    uav_ids = np.flatnonzero(is_uav)
    n_uav_t = uav_ids.size
    aa_col = np.full(n_users, -1)
    want_aa = any(mode_uses_aauav(m) for m in cfg.modes) and n_uav_t > 0
    los_aa = None
    ue_gain_db = np.zeros(n_users)
    if want_aa:
        aa_col[uav_ids] = np.arange(n_uav_t)
        ue_arr = uav_panel()
        a_ue = steering_vector(ue_arr.positions_wl,
                               geom.ue_az_rad[:, uav_ids], geom.ue_el_rad[:, uav_ids])
        w_ue = a_ue[serving[uav_ids], np.arange(n_uav_t)] / np.sqrt(ue_arr.n_elements)
        f_ue = np.einsum("cuk,uk->cu", a_ue.conj(), w_ue)
        los_aa = np.empty((n_cells, n_uav_t, n_elem), dtype=np.complex64)
        blk = (amp_los[:, uav_ids] * np.exp(1j * phi[:, uav_ids]) * f_ue)[..., None] \
            * a_bs[:, uav_ids]
        los_aa[:, :, :n_pos] = blk
        los_aa[:, :, n_pos:] = blk * np.exp(1j * psi[:, uav_ids])[..., None]
        del blk
        ue_gain_db[uav_ids] = 10.0 * np.log10(
            np.maximum(np.abs(f_ue[serving[uav_ids], np.arange(n_uav_t)]) ** 2, 1e-30))

    # --- schedules (shared between plain and aaUAV variants) ---
    order = np.argsort(serving, kind="stable")
    counts = np.bincount(serving, minlength=n_cells)
    cell_users = np.split(order, np.cumsum(counts)[:-1])
    n_empty = int((counts == 0).sum())
    max_layers = min(MAX_LAYERS, cfg.pilot_len)

    rules = {_schedule_rule(m) for m in cfg.modes}
    scheds, allocs = {}, {}
    for rule in rules:
        sched = np.full((n_cells, n_prb, max_layers), -1, dtype=np.int64)
        for c in range(n_cells):
            users = cell_users[c]
            if users.size == 0:
                continue
            if rule == "su":
                loc = round_robin_schedule(users.size, n_prb)
            elif rule == "split":
                g_ids = users[~is_uav[users]]
                v_ids = users[is_uav[users]]
                users = np.concatenate([g_ids, v_ids])
                loc = split_schedule(g_ids.size, v_ids.size, n_prb, max_layers)
            else:
                loc = rotation_schedule(users.size, n_prb, max_layers)
            filled = np.where(loc >= 0, users[np.maximum(loc, 0)], -1)
            sched[c, :, :loc.shape[1]] = filled
        scheds[rule] = sched
        flat = sched[sched >= 0]
        allocs[rule] = np.bincount(flat, minlength=n_users)[:n_users]

    # --- uplink power per (rule, aa) combination ---
    coupling = -(g_db[serving, np.arange(n_users)])
    p_ul = {}
    for mode in cfg.modes:
        key = (_schedule_rule(mode), mode_uses_aauav(mode) and want_aa)
        if key in p_ul:
            continue
        cpl = coupling - ue_gain_db if key[1] else coupling
        per_prb = uplink_fpc_dbm(cpl, cfg.power)
        capped = cap_total_power_dbm(per_prb, allocs[key[0]], cfg.power)
        p_ul[key] = dbm_to_watt(capped)

    noise_dl = cfg.power.noise_dl_w()
    noise_ul = cfg.power.noise_ul_w()

    # --- interference subspace for the null-steering mode ---
    basis = None
    if MMIMO_NULLS in cfg.modes and cfg.n_nulls > 0:
        p_nulls = p_ul[("rot", False)]
        if cfg.cov_mode == "genie":
            frac = allocs["rot"] / n_prb
            wgt = (p_nulls * frac)[None, :] * (serving[None, :] != np.arange(n_cells)[:, None])
            cov = np.empty((n_cells, n_elem, n_elem), dtype=np.complex128)
            for c in range(n_cells):
                cov[c] = genie_covariance(los_full[c].astype(np.complex128),
                                          ray_var[c], wgt[c], noise_ul)
        else:
            cov = _snapshot_covariance(cfg, seed, drop_idx, scheds["rot"], p_nulls,
                                       los_full, ray_var, serving, noise_ul)
        basis, _ = interference_subspace(cov, cfg.n_nulls)
        basis = np.ascontiguousarray(basis)

    # --- per-mode accumulators ---
    acc = {}
    for mode in cfg.modes:
        acc[mode] = {
            "rate": np.zeros(n_users),
            "sdb_sum": np.zeros(n_users),
            "cnt": np.zeros(n_users, dtype=np.int64),
            "gue": [], "uav": [], "nreg": 0,
            "table": np.full((n_users, n_prb), np.nan) if keep_sinr_table else None,
        }

    reuse = cfg.reuse_factor
    group_cells = np.stack([np.arange(g, n_cells, reuse) for g in range(reuse)])
    sqrt_tau = np.sqrt(cfg.pilot_len)
    sigma_ul_amp = np.sqrt(noise_ul)
    eye_rows = np.eye(max_layers, n_elem, dtype=np.complex64)
    w_su64 = w_su.astype(np.complex64)
    direction = cfg.direction

    def gather(users_idx, cells_idx, h_plain, h_aa):
        cb, ub = np.broadcast_arrays(cells_idx, users_idx)
        out = h_plain[cb, ub]
        if h_aa is not None:
            sub = aa_col[ub]
            m = sub >= 0
            if m.any():
                out[m] = h_aa[cb[m], sub[m]]
        return out

    for p in range(n_prb):
        fad_rng = substream(seed, FADING, drop_idx, p)
        z = fad_rng.standard_normal((n_cells, n_users, 2 * n_elem), dtype=np.float32)
        z = z.view(np.complex64).reshape(n_cells, n_users, n_elem)
        np.multiply(z, (ray_std * _INV_SQRT2)[..., None], out=z)
        z += los_full
        h_plain = z
        h_aa = None
        if want_aa:
            z2 = fad_rng.standard_normal((n_cells, n_uav_t, 2 * n_elem), dtype=np.float32)
            z2 = z2.view(np.complex64).reshape(n_cells, n_uav_t, n_elem)
            np.multiply(z2, (ray_std[:, uav_ids] * _INV_SQRT2)[..., None], out=z2)
            z2 += los_aa
            h_aa = z2
        nu = _complex_noise(est_rng, (n_cells, max_layers, n_elem))

        ls_cache, hu_cache, zf_cache = {}, {}, {}
        for mode in cfg.modes:
            rule = _schedule_rule(mode)
            aa = mode_uses_aauav(mode) and want_aa
            haa = h_aa if aa else None
            sched = scheds[rule]
            slots = sched[:, p, :]
            valid = slots >= 0
            cell_of, slot_of = np.nonzero(valid)
            if cell_of.size == 0:
                continue
            users_act = slots[cell_of, slot_of]

            hu_key = (rule, aa)
            if hu_key not in hu_cache:
                hu_cache[hu_key] = gather(users_act[None, :],
                                          np.arange(n_cells)[:, None], h_plain, haa)
            hu = hu_cache[hu_key]

            if mode_base(mode) == "su":
                hu16 = np.ascontiguousarray(hu[:, :, su_idx])
                if direction == "dl":
                    w_cols = np.zeros((n_cells, su_idx.size, 1), dtype=np.complex64)
                    on = valid[:, 0]
                    w_cols[on, :, 0] = w_su64 * np.sqrt(np.float32(bs_prb_w))
                    sinr = downlink_sinr(hu16, w_cols, cell_of, slot_of, noise_dl)
                else:
                    v_rows = np.broadcast_to(w_su64.conj(), (n_cells, 1, su_idx.size))
                    sinr = uplink_sinr(hu16, v_rows, cell_of, slot_of,
                                       p_ul[(rule, aa)][users_act], noise_ul)
            else:
                est_key = (rule, aa)
                if est_key not in ls_cache:
                    ls_cache[est_key] = _ls_estimates(
                        slots, valid, group_cells, p_ul[est_key], nu,
                        sigma_ul_amp, sqrt_tau, eye_rows, h_plain, haa, gather)
                h_est = ls_cache[est_key]
                if mode == MMIMO_NULLS and basis is not None:
                    h_est, _ = covariance_aided_estimate(h_est, basis, cfg.leak_gate)
                zf_key = (mode, direction)
                if zf_key not in zf_cache:
                    kval = valid.sum(axis=1)
                    if direction == "dl":
                        p_user = np.where(valid, bs_prb_w / np.maximum(kval, 1)[:, None], 0.0)
                        w_cols, flagged = zf_precoders(h_est, p_user)
                        zf_cache[zf_key] = (w_cols, int(flagged.sum()))
                    else:
                        v_rows, flagged = zf_combiners(h_est)
                        zf_cache[zf_key] = (v_rows, int(flagged.sum()))
                mat, nflag = zf_cache[zf_key]
                acc[mode]["nreg"] += nflag
                if direction == "dl":
                    sinr = downlink_sinr(hu, mat, cell_of, slot_of, noise_dl)
                else:
                    sinr = uplink_sinr(hu, mat, cell_of, slot_of,
                                       p_ul[(rule, aa)][users_act], noise_ul)

            sinr = np.asarray(sinr, dtype=np.float64)
            a = acc[mode]
            a["rate"][users_act] += per_prb_rate_bps(sinr)
            sdb = 10.0 * np.log10(np.maximum(sinr, 1e-300))
            a["sdb_sum"][users_act] += sdb
            a["cnt"][users_act] += 1
            a["gue"].append(sdb[~is_uav[users_act]])
            a["uav"].append(sdb[is_uav[users_act]])
            if keep_sinr_table:
                a["table"][users_act, p] = sinr

    per_mode = {}
    for mode in cfg.modes:
        a = acc[mode]
        cnt = a["cnt"]
        mean_sdb = np.where(cnt > 0, a["sdb_sum"] / np.maximum(cnt, 1), np.nan)
        per_mode[mode] = ModeDropResult(
            rate_bps=a["rate"],
            n_alloc=allocs[_schedule_rule(mode)].copy(),
            mean_sinr_db=mean_sdb,
            gue_sinr_db=np.concatenate(a["gue"]) if a["gue"] else np.empty(0),
            uav_sinr_db=np.concatenate(a["uav"]) if a["uav"] else np.empty(0),
            n_regularized=a["nreg"],
            sinr_table=a["table"],
        )
    return DropResult(drop_idx, is_uav.copy(), heights.copy(), serving.copy(),
                      n_empty, per_mode)


def _ls_estimates(slots, valid, group_cells, p_w, nu, sigma_amp, sqrt_tau,
                  eye_rows, h_plain, h_aa, gather):
    """Least-squares pilot estimates for every (cell, slot) on one PRB.

    Same-slot users of same-group cells add scaled by the amplitude ratio of
    their pilot powers; observation noise scales with 1/sqrt(tau * p_own).
    Idle slots get orthonormal placeholder rows so downstream solves stay
    well posed; their transmit power is zero everywhere.
    """
    n_cells, n_layers = slots.shape
    n_elem = h_plain.shape[-1]
    ug = slots[group_cells]                      # (G, m, K)
    vg = ug >= 0
    ugc = np.where(vg, ug, 0)
    sqrtp = np.sqrt(p_w)
    wgt = sqrtp[ugc] * vg                        # (G, m, K)

    hg = gather(ugc[:, None, :, :], group_cells[:, :, None, None], h_plain, h_aa)
    total = np.einsum("gjk,gijkm->gikm", wgt.astype(np.complex64), hg)
    m_idx = np.arange(group_cells.shape[1])
    own = hg[:, m_idx, m_idx]                    # (G, m, K, M)
    p_own = wgt                                   # same layout, receiver row
    denom = np.maximum(p_own, 1e-30)
    h_hat = own + (total - (p_own[..., None] * own)) / denom[..., None]
    noise_scale = (sigma_amp / (sqrt_tau * denom)).astype(np.float32)
    h_hat += nu[group_cells] * noise_scale[..., None]
    h_hat = np.where(vg[..., None], h_hat, eye_rows[:n_layers])

    out = np.empty((n_cells, n_layers, n_elem), dtype=np.complex64)
    out[group_cells.ravel()] = h_hat.reshape(-1, n_layers, n_elem)
    return out


def _snapshot_covariance(cfg, seed, drop_idx, sched, p_w, los_full, ray_var,
                         serving, noise_w):
    """Sample covariance of the out-of-cell signal during silent phases.

    Snapshots cycle over PRBs; each snapshot sums the active users' LoS rays
    with random unit-power symbols, while all their diffuse components plus
    thermal noise collapse into one exactly-distributed Gaussian per cell.
    """
    cov_rng = substream(seed, COV_SNAPSHOTS, drop_idx)
    n_cells = los_full.shape[0]
    n_elem = los_full.shape[-1]
    n_prb = cfg.n_prb
    n_snap = cfg.n_cov_snapshots
    counts = n_snap // n_prb + (np.arange(n_prb) < (n_snap % n_prb))
    cov = np.zeros((n_cells, n_elem, n_elem), dtype=np.complex128)
    sqrtp = np.sqrt(p_w)
    cell_range = np.arange(n_cells)
    for p in range(n_prb):
        nt = int(counts[p])
        if nt == 0:
            continue
        slots = sched[:, p, :]
        act = slots[slots >= 0]
        sym = (cov_rng.standard_normal((nt, act.size))
               + 1j * cov_rng.standard_normal((nt, act.size))) / np.sqrt(2.0)
        amp = sym * sqrtp[act]
        los_act = los_full[:, act, :].astype(np.complex128)
        y = np.einsum("ta,cam->ctm", amp, los_act)
        own_cell = serving[act]
        for c in range(n_cells):
            mine = own_cell == c
            if mine.any():
                y[c] -= amp[:, mine] @ los_act[c, mine]
        excl = (own_cell[None, :] != cell_range[:, None])
        wv = (p_w[act] * ray_var[:, act]) * excl
        var = wv @ (np.abs(sym) ** 2).T + noise_w          # (C, nt)
        gn = cov_rng.standard_normal((n_cells, nt, 2 * n_elem))
        gn = gn.view(np.complex128).reshape(n_cells, nt, n_elem)
        y += gn * np.sqrt(var / 2.0)[..., None]
        cov += np.einsum("ctm,ctk->cmk", y, y.conj())
    return cov / n_snap
