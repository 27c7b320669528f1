"""Incompressible 2-D Navier-Stokes on a periodic box via Chorin projection.

One step: advance velocity explicitly with conservative spectral advection,
spectral diffusion, and the steady sinusoidal forcing; solve the pressure
Poisson equation spectrally; project to divergence-free.  The projection is
exact to roundoff, so the discrete divergence stays at machine precision.

The DA state is the concatenation (u, v, p) of length 3 n^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Array, BlowupError, ConfigurationError, RngStream, TransitionModel


@dataclass(frozen=True)
class NSConfig:
    grid: int = 256
    length: float = 2.0
    viscosity: float = 1e-3
    density: float = 1.0
    dt: float = 1e-4
    steps_per_da: int = 100
    forcing_amplitude: float = 0.05
    forcing_mode: int = 8
    gp_lengthscale: float = 0.2
    gp_modes: int = 8

    def __post_init__(self):
        if self.grid < 8 or (self.grid & (self.grid - 1)) != 0:
            raise ConfigurationError("grid must be a power of two >= 8")
        if self.viscosity <= 0:
            raise ConfigurationError("viscosity must be > 0")

    @property
    def state_dim(self) -> int:
        return 3 * self.grid * self.grid


@dataclass(frozen=True)
class NSWorkspace:
    ikx: Array        # spectral d/dx on rfft2 layout (Nyquist zeroed)
    iky: Array        # spectral d/dy (Nyquist zeroed)
    k_sq: Array       # full |k|^2 for diffusion
    k_sq_proj: Array  # |k_eff|^2 consistent with ikx/iky, for the Poisson solve
    dealias: Array
    forcing_x: Array  # physical-space body force on the x-velocity


def make_workspace(cfg: NSConfig) -> NSWorkspace:
    n, L = cfg.grid, cfg.length
    kx = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
    ky = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    # odd derivatives of the Nyquist mode are ill-defined on an even real
    # grid; zero them so gradient and divergence stay exact adjoints and the
    # projection removes all resolvable divergence
    kx_eff = kx.copy()
    kx_eff[n // 2] = 0.0
    ky_eff = ky.copy()
    ky_eff[-1] = 0.0
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    KXe, KYe = np.meshgrid(kx_eff, ky_eff, indexing="ij")
    cutoff = n // 3
    mx = np.abs(np.fft.fftfreq(n) * n) > cutoff
    my = np.arange(n // 2 + 1) > cutoff
    dealias = np.where(mx[:, None] | my[None, :], 0.0, 1.0)
    # f(x) = [A sin(2 pi m x2 / L), 0]; x2 is the second grid coordinate
    x2 = L * np.arange(n) / n
    forcing_x = np.tile(cfg.forcing_amplitude
                        * np.sin(2.0 * np.pi * cfg.forcing_mode * x2 / L), (n, 1))
    return NSWorkspace(ikx=1j * KXe, iky=1j * KYe, k_sq=KX**2 + KY**2,
                       k_sq_proj=KXe**2 + KYe**2, dealias=dealias, forcing_x=forcing_x)


def _ddx(ws, f_hat):
    return ws.ikx * f_hat


def _ddy(ws, f_hat):
    return ws.iky * f_hat


def ns_step(cfg: NSConfig, ws: NSWorkspace, u: Array, v: Array, p: Array):
    """One projection step; returns the new (u, v, p) fields."""
    n = cfg.grid
    rfft2, irfft2 = np.fft.rfft2, np.fft.irfft2
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        u_hat, v_hat = rfft2(u), rfft2(v)

        # conservative advection div(w w), dealiased
        uu = ws.dealias * rfft2(u * u)
        uv = ws.dealias * rfft2(u * v)
        vv = ws.dealias * rfft2(v * v)
        adv_u = irfft2(_ddx(ws, uu) + _ddy(ws, uv), s=(n, n))
        adv_v = irfft2(_ddx(ws, uv) + _ddy(ws, vv), s=(n, n))

        lap_u = irfft2(-ws.k_sq * u_hat, s=(n, n))
        lap_v = irfft2(-ws.k_sq * v_hat, s=(n, n))

        u_star = u + cfg.dt * (-adv_u + cfg.viscosity * lap_u
                               + ws.forcing_x / cfg.density)
        v_star = v + cfg.dt * (-adv_v + cfg.viscosity * lap_v)

        # pressure Poisson: lap p = (rho/dt) div(u*), solved spectrally
        div_hat = _ddx(ws, rfft2(u_star)) + _ddy(ws, rfft2(v_star))
        p_hat = np.where(ws.k_sq_proj > 0,
                         -cfg.density / cfg.dt * div_hat / np.where(ws.k_sq_proj > 0, ws.k_sq_proj, 1.0),
                         0.0)
        p_new = irfft2(p_hat, s=(n, n))

        u_new = u_star - cfg.dt / cfg.density * irfft2(_ddx(ws, p_hat), s=(n, n))
        v_new = v_star - cfg.dt / cfg.density * irfft2(_ddy(ws, p_hat), s=(n, n))
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise BlowupError("NS step went non-finite")
    return u_new, v_new, p_new


def max_divergence(cfg: NSConfig, ws: NSWorkspace, u: Array, v: Array) -> float:
    div = np.fft.irfft2(_ddx(ws, np.fft.rfft2(u)) + _ddy(ws, np.fft.rfft2(v)),
                        s=(cfg.grid, cfg.grid))
    return float(np.abs(div).max())


def gp_initial_condition(cfg: NSConfig, rng: RngStream):
    """Draw (u0, v0) from a squared-exponential GP via regular Fourier features.

    Frequencies sit on the regular grid (2 pi / L) (i, j) over a non-redundant
    half-plane; weights are N(0, diag(s(omega))) with the squared-exponential
    spectral density s(omega) = exp(-2 pi^2 l^2 |omega|^2).  Pressure starts
    at zero.
    """
    n, L, ell = cfg.grid, cfg.length, cfg.gp_lengthscale
    kmax = cfg.gp_modes
    freqs = []
    for i in range(0, kmax + 1):
        for j in range(-kmax, kmax + 1):
            if i == 0 and j < 0:
                continue
            freqs.append((i / L, j / L))
    xi = np.asarray(freqs)                         # (M, 2) cycle frequencies m / L
    omega = 2.0 * np.pi * xi                       # angular frequencies for the features
    dens = np.exp(-2.0 * np.pi**2 * ell**2 * np.sum(xi**2, axis=1))
    g = rng.generator()
    coords = L * np.arange(n) / n
    X1, X2 = np.meshgrid(coords, coords, indexing="ij")
    phase = omega[:, 0][:, None, None] * X1[None] + omega[:, 1][:, None, None] * X2[None]
    cos_f, sin_f = np.cos(phase), np.sin(phase)
    fields = []
    for _ in range(2):
        w_cos = np.sqrt(dens) * g.standard_normal(dens.size)
        w_sin = np.sqrt(dens) * g.standard_normal(dens.size)
        fields.append(np.tensordot(w_cos, cos_f, axes=1)
                      + np.tensordot(w_sin, sin_f, axes=1))
    return fields[0], fields[1]


def pack_state(u: Array, v: Array, p: Array) -> Array:
    return np.concatenate([u.ravel(), v.ravel(), p.ravel()])


def unpack_state(cfg: NSConfig, x: Array):
    n = cfg.grid
    if x.shape != (3 * n * n,):
        raise ConfigurationError(f"NS state must have length {3 * n * n}, got {x.shape}")
    u = x[: n * n].reshape(n, n)
    v = x[n * n: 2 * n * n].reshape(n, n)
    p = x[2 * n * n:].reshape(n, n)
    return u, v, p


def initial_state(cfg: NSConfig, rng: RngStream) -> Array:
    u, v = gp_initial_condition(cfg, rng)
    return pack_state(u, v, np.zeros_like(u))


def transition_model(cfg: NSConfig, ws: NSWorkspace, model_noise_std: float = 0.0,
                     n_solver_steps: int | None = None) -> TransitionModel:
    steps = n_solver_steps or cfg.steps_per_da

    def advance(x: Array) -> Array:
        u, v, p = unpack_state(cfg, x)
        for _ in range(steps):
            u, v, p = ns_step(cfg, ws, u, v, p)
        return pack_state(u, v, p)

    return TransitionModel(step=advance, model_noise_std=model_noise_std)
