"""Dérivées spectrales sur une cellule périodique et champs aléatoires à bande limitée."""

import numpy as np


def fft_wavenumbers(n, period):
    """Nombres d'onde angulaires (rad/longueur) pour n points sur une période."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)


def _broadcast(k, ndim, axis):
    shape = [1] * ndim
    shape[axis] = k.size
    return k.reshape(shape)


def periodic_derivative(values, axis, period, order=1):
    """Dérivée d'ordre `order` le long d'un axe périodique, par FFT.

    Pour les ordres impairs le mode de Nyquist est annulé, ce qui garde
    l'opérateur discret anti-hermitien.
    """
    n = values.shape[axis]
    k = fft_wavenumbers(n, period)
    if order % 2 == 1 and n % 2 == 0:
        k = k.copy()
        k[n // 2] = 0.0
    factor = _broadcast((1j * k) ** order, values.ndim, axis)
    return np.fft.ifft(factor * np.fft.fft(values, axis=axis), axis=axis)


def band_limited_field(shape, rng, max_mode=4, complex_valued=True):
    """Champ aléatoire dont seuls les modes |m| ≤ max_mode sont non nuls."""
    n_s, n_phi = shape
    if 2 * max_mode + 1 > min(n_s, n_phi):
        raise ValueError(f"max_mode={max_mode} trop grand pour la grille {shape}")
    coeffs = np.zeros(shape, dtype=complex)
    modes = np.arange(-max_mode, max_mode + 1)
    block = rng.standard_normal((modes.size, modes.size))
    if complex_valued:
        block = block + 1j * rng.standard_normal((modes.size, modes.size))
    coeffs[np.ix_(modes % n_s, modes % n_phi)] = block
    values = np.fft.ifft2(coeffs) * (n_s * n_phi)
    return values if complex_valued else values.real
