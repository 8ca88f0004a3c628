"""Fisher information and CRLB of the target position under TS errors.

The mean received block at sensing receiver b stacks per-subcarrier signals
H_{a,b,s} v_{a,s} rotated by the TS phasor of the (a, b) pair, where
v_{a,s} = sum_k w_{a,k} c_{s,k}. Only the sensing channel depends on the
target position, so each FIM entry is a per-subcarrier sum of real parts of
inner products of signal derivatives; the block-diagonal subcarrier
structure is never materialized.

Because every derivative enters the mean signal linearly in the phasor,
each FIM entry is a Hermitian quadratic form in the per-receiver phasor
block. That quadratic structure gives both a cheap objective for the
worst-case solver and a closed-form Euclidean gradient; central finite
differences over the real and imaginary phasor parts define the reference
semantics of that gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import MaLayout, steering_angle_deriv, steering_rx, steering_tx
from .scenario import Geometry, Scenario


class SingularFimError(ArithmeticError):
    """Raised when a gradient is requested at a singular Fisher matrix."""


def phasor_from_ts(ts_errors: np.ndarray, freq_grid: np.ndarray) -> np.ndarray:
    """Unit-modulus TS phasors exp(-j*2*pi*f_s*ts) as an (A, B, S) array."""
    ts = np.asarray(ts_errors, dtype=float)
    f = np.asarray(freq_grid, dtype=float)
    return np.exp(-2j * np.pi * f[None, None, :] * ts[:, :, None])


def stacked_tx(beams_a: np.ndarray, symbols: np.ndarray,
               phasor_ab: np.ndarray) -> np.ndarray:
    """Stacked transmit block of one (a, b) pair: S blocks of length N_t.

    Block s equals (sum_k w_{a,k} c_{s,k}) * phasor_ab[s].
    """
    beams_a = np.asarray(beams_a)
    symbols = np.asarray(symbols)
    phasor_ab = np.asarray(phasor_ab)
    if symbols.shape[1] != beams_a.shape[0]:
        raise ValueError(
            f"symbol block has {symbols.shape[1]} users, beams have "
            f"{beams_a.shape[0]}")
    if symbols.shape[0] != phasor_ab.shape[0]:
        raise ValueError("phasor length must match the symbol block length")
    per_sub = symbols @ beams_a            # (S, N_t)
    return (per_sub * phasor_ab[:, None]).reshape(-1)


@dataclass
class FimResult:
    """Per-receiver 2x2 position Fisher matrices and CRLB traces."""

    matrices: np.ndarray   # (B, 2, 2) real symmetric
    traces: np.ndarray     # (B,) trace of the inverse, +inf when singular
    singular: np.ndarray   # (B,) bool
    total: float           # sum of traces


def trace_inverse_2x2(mats: np.ndarray) -> np.ndarray:
    """tr(F^-1) for a stack of 2x2 matrices via the closed C/D form."""
    mats = np.asarray(mats, dtype=float)
    num = mats[..., 0, 0] + mats[..., 1, 1]
    det = (mats[..., 0, 0] * mats[..., 1, 1]
           - mats[..., 0, 1] * mats[..., 1, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(det > 0, num / np.where(det == 0, 1.0, det), np.inf)
    return out


class CrlbModel:
    """Precomputed CRLB machinery for fixed geometry, layout and beams.

    The per-receiver signal-derivative tensors depend on everything except
    the TS phasor, so the worst-case solver reuses one model across all its
    objective and gradient evaluations.
    """

    def __init__(self, scenario: Scenario, layout: MaLayout,
                 beams: np.ndarray, geometry: Geometry | None = None,
                 paper_noise_exponent: bool = False):
        cfg = scenario.config
        geo = scenario.geometry if geometry is None else geometry
        freq = scenario.freq_grid
        A, B, S = cfg.num_tx_aps, cfg.num_rx_aps, cfg.num_freq_samples
        sigma2 = scenario.noise_power
        # Per-sample Gaussian likelihood normalization by default; the
        # sigma^(2S) variant is kept as a fidelity switch.
        self.noise_factor = 2.0 / (sigma2 ** S if paper_noise_exponent
                                   else sigma2)
        self.shape = (A, B, S)

        beams = np.asarray(beams)
        v = np.einsum("akn,sk->asn", beams, scenario.symbols)  # (A, S, N_t)

        (dtau_dx, dtau_dy, dang_tx_dx, dang_rx_dx,
         dang_tx_dy, dang_rx_dy) = _target_derivs(geo)

        steer_tx_all = np.exp(-2j * np.pi * layout.tx
                              * np.sin(geo.angle_tx)[:, None])   # (A, N_t)
        dsteer_tx = ((-2j * np.pi * layout.tx * np.cos(geo.angle_tx)[:, None])
                     * steer_tx_all)                             # (A, N_t)
        proj = np.einsum("an,asn->as", np.conj(steer_tx_all), v)   # (A, S)
        dproj_dx = (np.einsum("an,asn->as", np.conj(dsteer_tx), v)
                    * dang_tx_dx[:, None])
        dproj_dy = (np.einsum("an,asn->as", np.conj(dsteer_tx), v)
                    * dang_tx_dy[:, None])

        # u[b, i, a, s, :] is the derivative of the subcarrier-s mean signal
        # contribution of AP a at receiver b, in target coordinate i, before
        # the TS phasor is applied.
        self.deriv_signals = np.zeros((B, 2, A, S, cfg.num_rx_mas),
                                      dtype=complex)
        two_pi_f = 2.0 * np.pi * freq
        for b in range(B):
            g_rx = steering_rx(layout.rx[b], geo.angle_rx[b])
            dg_rx_base = steering_angle_deriv(layout.rx[b], geo.angle_rx[b])
            phase = np.exp(-2j * np.pi * freq[None, :]
                           * geo.delay_round[:, b][:, None])     # (A, S)
            refl = scenario.reflectivity[:, b][:, None]
            for i, (dtau, dproj, dang_rx) in enumerate((
                    (dtau_dx[:, b], dproj_dx, dang_rx_dx[b]),
                    (dtau_dy[:, b], dproj_dy, dang_rx_dy[b]))):
                coef_g = refl * phase * (
                    -1j * two_pi_f[None, :] * dtau[:, None] * proj + dproj)
                coef_dg = refl * phase * proj
                self.deriv_signals[b, i] = (
                    coef_g[:, :, None] * g_rx[None, None, :]
                    + coef_dg[:, :, None] * (dg_rx_base * dang_rx)[None, None, :])

        # Hermitian kernels of the quadratic forms: one (A, A) matrix per
        # (receiver, coordinate pair, subcarrier).
        self.kernels = np.einsum("bipsn,bjqsn->bijspq",
                                 np.conj(self.deriv_signals),
                                 self.deriv_signals)

    def fim_matrices(self, phasor: np.ndarray) -> np.ndarray:
        """(B, 2, 2) Fisher matrices at the given (A, B, S) phasor."""
        theta = np.asarray(phasor)
        raw = np.einsum("bijspq,pbs,qbs->bij", self.kernels,
                        np.conj(theta), theta)
        F = self.noise_factor * np.real(raw)
        # Enforce exact symmetry (the off-diagonal entries are equal real
        # parts of conjugate quantities).
        F[:, 1, 0] = F[:, 0, 1] = 0.5 * (F[:, 0, 1] + F[:, 1, 0])
        return F

    def receiver_trace(self, b: int, theta_b: np.ndarray) -> float:
        """CRLB trace of receiver `b` given only its (A, S) phasor block."""
        raw = np.einsum("ijspq,ps,qs->ij", self.kernels[b],
                        np.conj(theta_b), theta_b)
        F = self.noise_factor * np.real(raw)
        num = F[0, 0] + F[1, 1]
        det = F[0, 0] * F[1, 1] - 0.25 * (F[0, 1] + F[1, 0]) ** 2
        if not np.isfinite(det) or det <= 0:
            return np.inf
        return float(num / det)

    def result(self, phasor: np.ndarray) -> FimResult:
        F = self.fim_matrices(phasor)
        det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
        singular = ~(det > 0) | ~np.isfinite(det)
        traces = trace_inverse_2x2(F)
        traces = np.where(singular, np.inf, traces)
        total = float(np.sum(traces)) if not np.any(singular) else np.inf
        return FimResult(matrices=F, traces=traces,
                         singular=singular, total=total)

    def total(self, phasor: np.ndarray) -> float:
        return self.result(phasor).total

    def grad(self, phasor: np.ndarray) -> np.ndarray:
        """Euclidean gradient of the total CRLB trace in the phasor.

        Convention: entry j equals dL/dRe(phasor_j) + 1j*dL/dIm(phasor_j).
        """
        theta = np.asarray(phasor)
        A, B, S = self.shape
        grad = np.zeros((A, B, S), dtype=complex)
        for b in range(B):
            theta_b = theta[:, b, :]                     # (A, S)
            M = self.kernels[b]                          # (2, 2, S, A, A)
            if not np.any(M):
                continue  # zero signal: constant objective, zero gradient
            t1 = np.einsum("ijspq,qs->ijps", M, theta_b)
            t2 = np.einsum("ijsqp,qs->ijps", np.conj(M), theta_b)
            gF = self.noise_factor * (t1 + t2)           # (2, 2, A, S)
            raw = np.einsum("ijspq,ps,qs->ij", M, np.conj(theta_b), theta_b)
            F = self.noise_factor * np.real(raw)
            f01 = 0.5 * (F[0, 1] + F[1, 0])
            C = F[0, 0] + F[1, 1]
            D = F[0, 0] * F[1, 1] - f01 * f01
            if not np.isfinite(D) or D <= 0:
                raise SingularFimError(
                    f"Fisher matrix of receiver {b} is singular (det={D})")
            gC = gF[0, 0] + gF[1, 1]
            g01 = 0.5 * (gF[0, 1] + gF[1, 0])
            gD = F[1, 1] * gF[0, 0] + F[0, 0] * gF[1, 1] - 2.0 * f01 * g01
            grad[:, b, :] = (gC * D - C * gD) / (D * D)
        return grad

    def grad_ts(self, ts_errors: np.ndarray, freq_grid: np.ndarray):
        """Objective value and gradient in the physical TS errors (A, B)."""
        theta = phasor_from_ts(ts_errors, freq_grid)
        value = self.total(theta)
        g = self.grad(theta)
        dtheta_dts = -2j * np.pi * np.asarray(freq_grid)[None, None, :] * theta
        g_ts = np.sum(np.real(np.conj(g) * dtheta_dts), axis=2)
        return value, g_ts


def _target_derivs(geo: Geometry):
    from .channel import angle_delay_derivs

    return angle_delay_derivs(geo.target, geo.tx_ap_pos, geo.rx_ap_pos)


def fim(scenario: Scenario, layout: MaLayout, beams: np.ndarray,
        phasor: np.ndarray, geometry: Geometry | None = None,
        paper_noise_exponent: bool = False) -> FimResult:
    """Per-receiver position FIM and CRLB traces at the given TS phasor."""
    model = CrlbModel(scenario, layout, beams, geometry=geometry,
                      paper_noise_exponent=paper_noise_exponent)
    return model.result(phasor)


def crlb_total(fims) -> float:
    """Sum of per-receiver CRLB traces; +inf sentinel when any is singular."""
    if isinstance(fims, FimResult):
        return fims.total
    traces = trace_inverse_2x2(np.asarray(fims, dtype=float))
    return float(np.sum(traces))


def grad_crlb_wrt_phasor(scenario: Scenario, layout: MaLayout,
                         beams: np.ndarray, phasor: np.ndarray,
                         geometry: Geometry | None = None) -> np.ndarray:
    """Euclidean gradient of the total CRLB trace, shape (A, B, S)."""
    model = CrlbModel(scenario, layout, beams, geometry=geometry)
    return model.grad(phasor)
