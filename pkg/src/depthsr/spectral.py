"""Differentiable 2-D discrete Fourier transform and polar decomposition.

Convention: the forward transform is unnormalized and the inverse carries
the 1/(H*W) factor, so `idft2(dft2(x)) == x` and Parseval reads
``sum(x**2) == sum(|S|**2) / (H*W)``.  Transforms act independently on
every (batch, channel) plane.  The numeric kernel is numpy's FFT, which
handles arbitrary extents; gradients are the exact adjoint maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _note_kink, _result, _tracing, cos, mul, sin

# Below this amplitude the polar decomposition gradient is forced to zero,
# sidestepping the atan2 singularity at the origin.
EPS_AMPLITUDE = 1e-8


def _wrap_margin(rd, md):
    """Distance from the phase-wrap discontinuity {imag = 0, real < 0}.

    Spectra of real images carry identically-zero imaginary parts in their
    self-conjugate bins; those bins only jump if the real part crosses
    zero, so their margin is |real| rather than |imag|.
    """
    neg = rd < 0.0
    pinned = neg & (np.abs(md) <= 1e-12 * (1.0 + np.abs(rd)))
    moving = neg & ~pinned
    margin = np.inf
    if moving.any():
        margin = np.abs(md[moving]).min()
    if pinned.any():
        margin = min(margin, np.abs(rd[pinned]).min())
    return margin


@dataclass
class ComplexSpectrum:
    """Cartesian frequency-domain representation of a real image stack."""

    real: Tensor
    imag: Tensor

    def __post_init__(self):
        if self.real.data.shape != self.imag.data.shape:
            raise ValueError("ComplexSpectrum: real/imag shape mismatch")


@dataclass
class AmplitudePhase:
    """Polar frequency-domain representation: amplitude >= 0, phase in (-pi, pi]."""

    amplitude: Tensor
    phase: Tensor

    def __post_init__(self):
        if self.amplitude.data.shape != self.phase.data.shape:
            raise ValueError("AmplitudePhase: amplitude/phase shape mismatch")


def dft2(t):
    """Unnormalized forward transform of each (n, c) plane."""
    h, w = t.data.shape[-2:]
    spec = np.fft.fft2(t.data, axes=(-2, -1))
    scale = float(h * w)
    real = _result(
        spec.real, (t,),
        lambda g: (np.fft.ifft2(g, axes=(-2, -1)).real * scale,))
    imag = _result(
        spec.imag, (t,),
        lambda g: (np.fft.ifft2(1j * g, axes=(-2, -1)).real * scale,))
    return ComplexSpectrum(real, imag)


def idft2(s):
    """1/(H*W)-normalized inverse transform; returns the real part.

    Any imaginary residue (nonzero for asymmetric spectra) is discarded.
    """
    h, w = s.real.data.shape[-2:]
    scale = 1.0 / float(h * w)
    out = np.fft.ifft2(s.real.data + 1j * s.imag.data, axes=(-2, -1)).real

    def vjp(g):
        spec = np.fft.fft2(g, axes=(-2, -1))
        return (spec.real * scale, spec.imag * scale)

    return _result(out, (s.real, s.imag), vjp)


def decompose(s):
    """Split a spectrum into amplitude and phase tensors.

    Gradients of both outputs vanish wherever the amplitude falls below
    EPS_AMPLITUDE.
    """
    rd, md = s.real.data, s.imag.data
    amp = np.hypot(rd, md)
    pha = np.arctan2(md, rd)
    # arctan2 may return exactly -pi on signed-zero inputs; fold into (-pi, pi]
    pha = np.where(pha <= -np.pi, np.pi, pha)
    if _tracing() and amp.size:
        _note_kink("amplitude_floor", amp.min())
        _note_kink("phase_wrap", _wrap_margin(rd, md))
    live = amp >= EPS_AMPLITUDE
    safe_amp = np.where(live, amp, 1.0)
    safe_sq = np.where(live, amp * amp, 1.0)

    def vjp_amp(g):
        ga = np.where(live, g / safe_amp, 0.0)
        return (ga * rd, ga * md)

    def vjp_pha(g):
        gp = np.where(live, g / safe_sq, 0.0)
        return (-gp * md, gp * rd)

    amplitude = _result(amp, (s.real, s.imag), vjp_amp)
    phase = _result(pha, (s.real, s.imag), vjp_pha)
    return AmplitudePhase(amplitude, phase)


def compose(ap):
    """Rebuild a Cartesian spectrum from amplitude and phase."""
    real = mul(ap.amplitude, cos(ap.phase))
    imag = mul(ap.amplitude, sin(ap.phase))
    return ComplexSpectrum(real, imag)
