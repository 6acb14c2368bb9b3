"""Hexagonal multi-site layout, toroidal wraparound, user drops, association.

Sites sit on a hex lattice with basis u = (isd, 0), v = (isd/2, isd*sqrt(3)/2).
A layout of `n_rings` rings holds 1 + 3*r*(r+1) sites, three sectors each.
Wraparound translates the whole cluster by the cluster lattice vector
(n_rings+1, n_rings) and its six 60-degree rotations; every link uses the
image of the site nearest to the user, which makes the wrapped network
equivalent to an infinite lattice for all in-cluster geometry.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import GUE, UAV
from .errors import ConfigError

SECTOR_AZIMUTHS_DEG = (30.0, 150.0, 270.0)
MIN_DROP_DISTANCE_M = 35.0   # keeps users out of the mast near field
GUE_HEIGHT_M = 1.5


@dataclass(frozen=True)
class NetworkLayout:
    isd_m: float
    bs_height_m: float
    n_rings: int
    site_xy: np.ndarray = field(repr=False)          # (n_sites, 2)
    wrap_offsets: np.ndarray = field(repr=False)     # (7, 2), first row zero

    @property
    def n_sites(self) -> int:
        return self.site_xy.shape[0]

    @property
    def n_cells(self) -> int:
        return 3 * self.n_sites

    def cell_site(self, cell: int) -> int:
        return cell // 3

    @property
    def sector_azimuth_rad(self) -> np.ndarray:
        az = np.radians(SECTOR_AZIMUTHS_DEG)
        return np.tile(az, self.n_sites)


def build_layout(n_rings: int = 2, isd_m: float = 500.0, bs_height_m: float = 25.0) -> NetworkLayout:
    if n_rings < 0:
        raise ConfigError("n_rings must be >= 0")
    u = np.array([isd_m, 0.0])
    v = np.array([isd_m / 2.0, isd_m * np.sqrt(3.0) / 2.0])

    coords = [(q, r) for q in range(-n_rings, n_rings + 1)
              for r in range(-n_rings, n_rings + 1)
              if max(abs(q), abs(r), abs(q + r)) <= n_rings]
    xy = np.array([q * u + r * v for q, r in coords])
    order = np.lexsort((np.round(np.arctan2(xy[:, 1], xy[:, 0]), 9),
                        np.round(np.hypot(xy[:, 0], xy[:, 1]), 6)))
    xy = xy[order]

    # cluster translation (i, j) = (n_rings + 1, n_rings) and its 60-degree rotations
    i, j = n_rings + 1, n_rings
    img_coeffs = [(i, j), (-j, i + j), (-i - j, i), (-i, -j), (j, -i - j), (i + j, -i)]
    offsets = np.vstack([np.zeros(2)] + [a * u + b * v for a, b in img_coeffs])
    return NetworkLayout(isd_m, bs_height_m, n_rings, xy, offsets)


def wrapped_site_positions(layout: NetworkLayout, user_xy: np.ndarray):
    """Per (site, user), the position of the site image nearest to the user.

    Returns (n_sites, n_users, 2). Sector orientation is unaffected by the
    translation, only the link geometry moves.
    """
    cand = layout.site_xy[:, None, None, :] + layout.wrap_offsets[None, :, None, :]
    delta = user_xy[None, None, :, :] - cand                       # (s, 7, u, 2)
    best = np.argmin((delta ** 2).sum(-1), axis=1)                 # (s, u)
    s_idx = np.arange(layout.n_sites)[:, None]
    return cand[s_idx, best, np.arange(user_xy.shape[0])[None, :], :]


@dataclass
class UserPopulation:
    xyz: np.ndarray                 # (n, 3)
    is_uav: np.ndarray              # (n,) bool
    indoor: np.ndarray              # (n,) bool, always False for UAVs
    home_cell: np.ndarray           # (n,) sector the user was dropped in
    serving_cell: np.ndarray        # (n,) filled by associate()

    @property
    def n_users(self) -> int:
        return self.xyz.shape[0]

    def kind(self, idx: int) -> str:
        return UAV if self.is_uav[idx] else GUE


def _sector_triangles(layout: NetworkLayout, cell: int):
    # sector area = the 120-degree wedge of the site hexagon around the
    # boresight, i.e. two equilateral triangles with the site as one vertex
    site = layout.site_xy[layout.cell_site(cell)]
    az = layout.sector_azimuth_rad[cell]
    r = layout.isd_m / np.sqrt(3.0)
    corners = [az - np.pi / 3.0, az, az + np.pi / 3.0]
    pts = [site + r * np.array([np.cos(a), np.sin(a)]) for a in corners]
    return [(site, pts[0], pts[1]), (site, pts[1], pts[2])]


def _sample_in_sector(layout: NetworkLayout, cell: int, n: int, rng: np.random.Generator):
    tris = _sector_triangles(layout, cell)
    site = layout.site_xy[layout.cell_site(cell)]
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        need = n - filled
        pick = rng.integers(0, 2, size=need)
        r1 = np.sqrt(rng.random(need))
        r2 = rng.random(need)
        pts = np.empty((need, 2))
        for t in (0, 1):
            m = pick == t
            a, b, c = tris[t]
            pts[m] = ((1 - r1[m])[:, None] * a
                      + (r1[m] * (1 - r2[m]))[:, None] * b
                      + (r1[m] * r2[m])[:, None] * c)
        ok = np.hypot(*(pts - site).T) >= MIN_DROP_DISTANCE_M
        take = pts[ok]
        out[filled:filled + take.shape[0]] = take
        filled += take.shape[0]
    return out


def draw_uav_heights(spec, n: int, rng: np.random.Generator) -> np.ndarray:
    """spec is ("fixed", h) or ("uniform", lo, hi), heights in meters."""
    if spec[0] == "fixed":
        return np.full(n, float(spec[1]))
    if spec[0] == "uniform":
        lo, hi = float(spec[1]), float(spec[2])
        return rng.uniform(lo, hi, size=n)
    raise ConfigError(f"unknown uav height spec: {spec!r}")


def drop_users(layout: NetworkLayout, n_gue: int, n_uav: int, uav_height_spec,
               rng: np.random.Generator, indoor_ratio: float = 0.8) -> UserPopulation:
    """Drop n_gue + n_uav users uniformly in every sector.

    GUEs sit at 1.5 m, a fixed fraction of them indoors; UAV heights follow
    uav_height_spec. Users are ordered cell-major, GUEs before UAVs.
    """
    if n_gue < 0 or n_uav < 0:
        raise ConfigError("user counts must be non-negative")
    per_cell = n_gue + n_uav
    n_total = per_cell * layout.n_cells
    xyz = np.zeros((n_total, 3))
    is_uav = np.zeros(n_total, dtype=bool)
    indoor = np.zeros(n_total, dtype=bool)
    home = np.zeros(n_total, dtype=np.int64)
    for cell in range(layout.n_cells):
        lo = cell * per_cell
        xy = _sample_in_sector(layout, cell, per_cell, rng)
        xyz[lo:lo + per_cell, :2] = xy
        xyz[lo:lo + n_gue, 2] = GUE_HEIGHT_M
        if n_uav:
            xyz[lo + n_gue:lo + per_cell, 2] = draw_uav_heights(uav_height_spec, n_uav, rng)
            is_uav[lo + n_gue:lo + per_cell] = True
        indoor[lo:lo + n_gue] = rng.random(n_gue) < indoor_ratio
        home[lo:lo + per_cell] = cell
    return UserPopulation(xyz, is_uav, indoor, home, serving_cell=home.copy())


@dataclass(frozen=True)
class LinkGeometry:
    """Per (cell, user) geometry against the nearest wraparound image."""
    d2d_m: np.ndarray
    d3d_m: np.ndarray
    bs_az_rad: np.ndarray     # departure azimuth in the downtilted sector frame
    bs_el_rad: np.ndarray     # departure elevation in the downtilted sector frame
    ue_az_rad: np.ndarray     # arrival azimuth at the user, global frame
    ue_el_rad: np.ndarray     # arrival elevation at the user, global frame


def link_geometry(layout: NetworkLayout, xyz: np.ndarray, downtilt_deg: float) -> LinkGeometry:
    n_u = xyz.shape[0]
    img = wrapped_site_positions(layout, xyz[:, :2])               # (s, u, 2)
    disp = np.empty((layout.n_sites, n_u, 3))
    disp[:, :, :2] = xyz[None, :, :2] - img
    disp[:, :, 2] = xyz[None, :, 2] - layout.bs_height_m
    d3d_site = np.linalg.norm(disp, axis=-1)
    np.maximum(d3d_site, 1e-9, out=d3d_site)
    dhat_site = disp / d3d_site[..., None]

    rep = np.repeat(np.arange(layout.n_sites), 3)
    dhat = dhat_site[rep]                                          # (cells, u, 3)
    d3d = d3d_site[rep]
    d2d = np.hypot(disp[rep, :, 0], disp[rep, :, 1])

    tilt = np.radians(downtilt_deg)
    az = layout.sector_azimuth_rad
    ct, st = np.cos(tilt), np.sin(tilt)
    ca, sa = np.cos(az), np.sin(az)
    x_hat = np.stack([ct * ca, ct * sa, -st * np.ones_like(ca)], axis=-1)
    y_hat = np.stack([-sa, ca, np.zeros_like(ca)], axis=-1)
    z_hat = np.stack([st * ca, st * sa, ct * np.ones_like(ca)], axis=-1)

    ux = np.einsum("cuk,ck->cu", dhat, x_hat)
    uy = np.einsum("cuk,ck->cu", dhat, y_hat)
    uz = np.einsum("cuk,ck->cu", dhat, z_hat)
    bs_az = np.arctan2(uy, ux)
    bs_el = np.arcsin(np.clip(uz, -1.0, 1.0))

    ue_az = np.arctan2(-dhat[..., 1], -dhat[..., 0])
    ue_el = np.arcsin(np.clip(-dhat[..., 2], -1.0, 1.0))
    return LinkGeometry(d2d, d3d, bs_az, bs_el, ue_az, ue_el)


def associate(rsrp_dbm: np.ndarray) -> np.ndarray:
    """Serving cell per user: argmax of the (n_cells, n_users) RSRP table.

    Ties resolve to the lowest cell index. A global power offset common to
    all sectors cannot change the result.
    """
    if rsrp_dbm.ndim != 2 or rsrp_dbm.shape[0] == 0:
        raise ConfigError("rsrp table must be (n_cells, n_users) with n_cells >= 1")
    return np.argmax(rsrp_dbm, axis=0)
