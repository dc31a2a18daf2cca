"""FFT entry points with the worker count capped by ``DIFFTOMO_THREADS``."""
import os

import scipy.fft as _sfft


def workers() -> int:
    value = os.environ.get("DIFFTOMO_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def fft2(x, axes=(-2, -1)):
    return _sfft.fft2(x, axes=axes, workers=workers())


def ifft2(x, axes=(-2, -1)):
    return _sfft.ifft2(x, axes=axes, workers=workers())


def fftn(x, axes=None):
    return _sfft.fftn(x, axes=axes, workers=workers())


def ifftn(x, axes=None):
    return _sfft.ifftn(x, axes=axes, workers=workers())


def fft(x, axis=-1):
    return _sfft.fft(x, axis=axis, workers=workers())


def ifft(x, axis=-1):
    return _sfft.ifft(x, axis=axis, workers=workers())
