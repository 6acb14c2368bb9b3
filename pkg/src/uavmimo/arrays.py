"""Antenna array definitions and analog-domain weights.

All geometry is expressed in the array's own frame: x along boresight, y to
the side, z up, element positions in wavelengths. Cross-polarized panels are
modeled as two co-located element sets (pol A then pol B in element order);
fading across the sets is independent and no cross-pol leakage is modeled.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import steering_vector

BS_PANEL_ROWS = 8        # vertical elements per column
BS_PANEL_COLS = 8        # horizontal columns of the full panel
ELEMENT_SPACING_WL = 0.5
BS_DOWNTILT_DEG = 12.0   # mechanical


@dataclass(frozen=True)
class ArrayConfig:
    """Physical array description used by the channel and phy layers."""

    name: str
    positions_wl: np.ndarray = field(repr=False)  # (n_elements, 3), array frame
    n_rf_chains: int
    patterned: bool          # parabolic element pattern if True, omni if False
    downtilt_deg: float = 0.0
    n_pol: int = 1

    @property
    def n_elements(self) -> int:
        return self.positions_wl.shape[0]

    @property
    def n_positions(self) -> int:
        return self.n_elements // self.n_pol


def _panel_positions(n_cols: int, n_rows: int) -> np.ndarray:
    # column-major: index = col * n_rows + row, so column 0 is elements 0..n_rows-1
    cols, rows = np.meshgrid(np.arange(n_cols), np.arange(n_rows), indexing="ij")
    pos = np.zeros((n_cols * n_rows, 3))
    pos[:, 1] = cols.ravel() * ELEMENT_SPACING_WL
    pos[:, 2] = rows.ravel() * ELEMENT_SPACING_WL
    return pos


def su_panel() -> ArrayConfig:
    """Single column of 8 cross-pol element pairs feeding one RF chain."""
    pos = _panel_positions(1, BS_PANEL_ROWS)
    return ArrayConfig("su_panel", np.vstack([pos, pos]), n_rf_chains=1,
                       patterned=True, downtilt_deg=BS_DOWNTILT_DEG, n_pol=2)


def mmimo_panel() -> ArrayConfig:
    """8x8 cross-pol panel, every element on its own RF chain."""
    pos = _panel_positions(BS_PANEL_COLS, BS_PANEL_ROWS)
    return ArrayConfig("mmimo_panel", np.vstack([pos, pos]), n_rf_chains=2 * pos.shape[0],
                       patterned=True, downtilt_deg=BS_DOWNTILT_DEG, n_pol=2)


def su_subset_indices() -> np.ndarray:
    """Indices of the SU column's elements within the full mMIMO panel.

    Lets the engine draw one 128-element channel per link and reuse its
    column-0 slice for the single-RF-chain mode.
    """
    pol_a = np.arange(BS_PANEL_ROWS)
    pol_b = pol_a + BS_PANEL_ROWS * BS_PANEL_COLS
    return np.concatenate([pol_a, pol_b])


def uav_panel() -> ArrayConfig:
    """2x2 omni array carried by a beam-steering UAV, one RF chain."""
    xs, ys = np.meshgrid(np.arange(2), np.arange(2), indexing="ij")
    pos = np.zeros((4, 3))
    pos[:, 0] = xs.ravel() * ELEMENT_SPACING_WL
    pos[:, 1] = ys.ravel() * ELEMENT_SPACING_WL
    return ArrayConfig("uav_panel", pos, n_rf_chains=1, patterned=False)


def single_omni(name: str = "omni") -> ArrayConfig:
    """Plain single omni element (GUEs and non-steering UAVs)."""
    return ArrayConfig(name, np.zeros((1, 3)), n_rf_chains=1, patterned=False)


def su_panel_weights(cfg: ArrayConfig) -> np.ndarray:
    """Fixed analog combining of the SU column.

    Equal amplitude, equal phase across the vertical column of one
    polarization branch; the vector spans all elements and is unit norm, so
    the coherent gain over a single element is 10*log10(n_positions).
    """
    if cfg.n_rf_chains != 1:
        raise ValueError("fixed panel combining only applies to single-chain arrays")
    w = np.zeros(cfg.n_elements, dtype=complex)
    w[: cfg.n_positions] = 1.0 / np.sqrt(cfg.n_positions)
    return w


def uav_steer_weights(cfg: ArrayConfig, az_rad: float, el_rad: float) -> np.ndarray:
    """Analog beam of the UAV array matched to one direction.

    Unit norm; applied as H @ w the beam realizes the full array gain
    10*log10(n_elements) toward (az, el) and no more in any direction.
    """
    a = steering_vector(cfg.positions_wl, az_rad, el_rad)
    return a / np.linalg.norm(a)


def effective_channel(h: np.ndarray, tx_weights=None, rx_weights=None):
    """Reduce an element-level channel by analog weights on either end.

    Returns rx_weights^H @ h @ tx_weights, with identity for a missing side.
    A (16, 1) channel with weights on both ends reduces to a complex scalar.
    """
    out = np.asarray(h)
    if rx_weights is not None:
        out = np.asarray(rx_weights).conj().T @ out
    if tx_weights is not None:
        out = out @ np.asarray(tx_weights)
    if out.ndim == 0 or out.size == 1:
        return complex(out.reshape(()))
    return out
