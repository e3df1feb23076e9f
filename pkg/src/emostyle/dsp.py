"""
Signal-processing kernel: STFT/ISTFT, mel filterbank, log-mel spectrograms,
MFCCs, Griffin-Lim inversion and simple frame features.

Matrices are laid out ``[bins x frames]``, frames increasing left to right.
Frames are not centred: frame ``t`` starts at sample ``t * hop_len`` and the
last frame is the last one that fits entirely inside the clip, so

    n_frames = 1 + (len(samples) - window_len) // hop_len
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.signal

from emostyle.errors import (
    BadBand,
    ClipTooShort,
    NegativeFrequency,
    ParamMismatch,
    TooManyCoeffs,
)

SAMPLE_RATE = 16000
WINDOW_LEN = 400  # 25 ms
HOP_LEN = 160  # 10 ms
FFT_LEN = 512
N_MELS = 40
FLOOR_DB = -80.0
PEAK = 0.95


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class StftParams:
    window_len: int = WINDOW_LEN
    hop_len: int = HOP_LEN
    fft_len: int = FFT_LEN

    def __post_init__(self):
        if not 0 < self.hop_len <= self.window_len <= self.fft_len:
            raise ValueError(
                "need 0 < hop_len <= window_len <= fft_len, got "
                f"{self.hop_len}, {self.window_len}, {self.fft_len}"
            )
        if self.fft_len & (self.fft_len - 1):
            raise ValueError(f"fft_len must be a power of two, got {self.fft_len}")

    @property
    def window(self):
        # periodic Hann
        return scipy.signal.get_window("hann", self.window_len, fftbins=True)

    @property
    def n_bins(self):
        return self.fft_len // 2 + 1

    def n_frames(self, n_samples):
        if n_samples < self.window_len:
            raise ClipTooShort(
                f"clip has {n_samples} samples, need at least {self.window_len}"
            )
        return 1 + (n_samples - self.window_len) // self.hop_len

    def n_samples(self, n_frames):
        """Length of the signal spanned by ``n_frames`` frames."""
        return (n_frames - 1) * self.hop_len + self.window_len


@dataclass
class MelSpectrogram:
    data: np.ndarray
    n_mels: int
    params: StftParams = field(default_factory=StftParams)
    sample_rate: int = SAMPLE_RATE
    f_min: float = 0.0
    f_max: float = None

    def __post_init__(self):
        if self.f_max is None:
            self.f_max = self.sample_rate / 2

    @property
    def n_frames(self):
        return self.data.shape[1]


@dataclass
class MfccMatrix:
    data: np.ndarray
    n_coeffs: int


def stft(clip, params=None):
    """Complex STFT of shape ``[fft_len // 2 + 1, n_frames]``."""
    params = params or StftParams()
    x = clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, np.float64)
    n_frames = params.n_frames(x.size)
    frames = np.lib.stride_tricks.sliding_window_view(x, params.window_len)
    frames = frames[:: params.hop_len][:n_frames] * params.window
    return np.fft.rfft(frames, n=params.fft_len, axis=1).T


def istft(spec, params=None, length=None, sample_rate=SAMPLE_RATE):
    """Least-squares inverse of :func:`stft` (windowed overlap-add).

    Each frame is inverse transformed, multiplied by the analysis window and
    overlap-added; the sum is divided by the overlapped squared window. Samples
    that no window covers come out as zero. ``length`` pads or truncates.
    """
    params = params or StftParams()
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[0] != params.n_bins or spec.shape[1] < 1:
        raise ParamMismatch(
            f"expected spectrogram of shape ({params.n_bins}, n_frames), got {spec.shape}"
        )
    n_frames = spec.shape[1]
    w = params.window
    frames = np.fft.irfft(spec.T, n=params.fft_len, axis=1)[:, : params.window_len] * w
    n = params.n_samples(n_frames)
    out = np.zeros(n)
    norm = np.zeros(n)
    for t in range(n_frames):
        start = t * params.hop_len
        out[start : start + params.window_len] += frames[t]
        norm[start : start + params.window_len] += w * w
    covered = norm > 1e-12
    out[covered] /= norm[covered]
    out[~covered] = 0.0
    if length is not None:
        out = out[:length] if out.size >= length else np.pad(out, (0, length - out.size))
    return AudioClip(out, sample_rate)


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise NegativeFrequency(f"frequency must be non-negative, got {f}")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise NegativeFrequency(f"mel value must be non-negative, got {m}")
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def mel_centers(n_mels, f_min, f_max):
    """Peak frequencies (Hz) of the ``n_mels`` triangular filters."""
    pts = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    return pts[1:-1]


def mel_filterbank(n_mels=N_MELS, fft_len=FFT_LEN, sample_rate=SAMPLE_RATE, f_min=0.0, f_max=None):
    """Triangular HTK-mel filterbank of shape ``[n_mels, fft_len // 2 + 1]``.

    Filters have unit peak (no area normalisation) and are evaluated at the
    exact FFT bin frequencies, so adjacent triangles sum to one between peaks.
    """
    nyquist = sample_rate / 2
    if f_max is None:
        f_max = nyquist
    if n_mels < 1:
        raise ValueError(f"n_mels must be >= 1, got {n_mels}")
    if f_max > nyquist:
        raise BadBand(f"f_max {f_max} Hz exceeds Nyquist {nyquist} Hz")
    if not 0 <= f_min < f_max:
        raise BadBand(f"need 0 <= f_min < f_max, got {f_min}, {f_max}")

    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    freqs = np.arange(fft_len // 2 + 1) * sample_rate / fft_len
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.max(axis=1) <= 0)
    if empty.size:
        raise BadBand(
            f"mel filters {empty.tolist()} cover no FFT bin; use fewer mels or a larger fft_len"
        )
    return fb


def amplitude_to_db(mag, floor_db=FLOOR_DB):
    """20*log10 relative to the maximum, clipped below at ``floor_db``."""
    mag = np.asarray(mag, dtype=np.float64)
    ref = mag.max() if mag.size else 0.0
    if ref <= 0:
        return np.full(mag.shape, float(floor_db))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / ref)
    return np.maximum(db, floor_db)


def db_to_amplitude(db):
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 20.0)


def mel_spectrogram(clip, n_mels=N_MELS, params=None, f_min=0.0, f_max=None, floor_db=FLOOR_DB):
    params = params or StftParams()
    mag = np.abs(stft(clip, params))
    fb = mel_filterbank(n_mels, params.fft_len, clip.sample_rate, f_min, f_max)
    data = amplitude_to_db(fb @ mag, floor_db)
    return MelSpectrogram(data, n_mels, params, clip.sample_rate, f_min, f_max)


def mfcc(spec, n_coeffs=N_MELS):
    """Orthonormal DCT-II over the mel axis, first ``n_coeffs`` rows kept."""
    data = spec.data if isinstance(spec, MelSpectrogram) else np.asarray(spec)
    n_mels = data.shape[0]
    if n_coeffs > n_mels:
        raise TooManyCoeffs(f"n_coeffs={n_coeffs} exceeds n_mels={n_mels}")
    coeffs = scipy.fft.dct(data, type=2, norm="ortho", axis=0)[:n_coeffs]
    return MfccMatrix(coeffs, n_coeffs)


def mel_to_linear(spec):
    """Map a dB mel spectrogram back to non-negative linear FFT magnitudes."""
    fb = mel_filterbank(spec.n_mels, spec.params.fft_len, spec.sample_rate, spec.f_min, spec.f_max)
    return np.maximum(np.linalg.pinv(fb) @ db_to_amplitude(spec.data), 0.0)


def _full_spectrum_norm(z, fft_len):
    # one-sided bins other than DC/Nyquist stand for two full-spectrum bins
    weights = np.full(z.shape[0], 2.0)
    weights[0] = 1.0
    if fft_len % 2 == 0:
        weights[-1] = 1.0
    return float(np.sqrt(np.sum(weights[:, None] * np.abs(z) ** 2)))


def griffin_lim_trace(spec, iterations=32, seed=0, params=None, sample_rate=SAMPLE_RATE, init="zero"):
    """Griffin-Lim returning ``(clip, errors)``.

    ``errors[k]`` is the full-spectrum distance between ``|STFT(x_k)|`` and
    the target magnitude after iteration ``k + 1``. Because the inverse STFT
    is the exact least-squares projection in that norm, the sequence is
    non-increasing. ``init="zero"`` (default) starts from zero phase and
    ignores ``seed``; ``init="random"`` draws uniform phases from ``seed``.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if isinstance(spec, MelSpectrogram):
        params, sample_rate = spec.params, spec.sample_rate
        mag = mel_to_linear(spec)
    else:
        params = params or StftParams()
        mag = np.asarray(spec, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[0] != params.n_bins:
        raise ParamMismatch(f"magnitude shape {mag.shape} incompatible with fft_len {params.fft_len}")

    if init == "zero":
        phase = np.ones(mag.shape, dtype=np.complex128)
    elif init == "random":
        rng = np.random.default_rng(seed)
        phase = np.exp(2j * np.pi * rng.random(mag.shape))
    else:
        raise ValueError(f"unknown init {init!r}")

    n = params.n_samples(mag.shape[1])
    errors = []
    for _ in range(iterations):
        x = istft(mag * phase, params, length=n).samples
        rebuilt = stft(x, params)
        errors.append(_full_spectrum_norm(np.abs(rebuilt) - mag, params.fft_len))
        phase = np.exp(1j * np.angle(rebuilt))

    return AudioClip(peak_normalize(x), sample_rate), errors


def griffin_lim(spec, iterations=32, seed=0, params=None, sample_rate=SAMPLE_RATE, init="zero"):
    return griffin_lim_trace(spec, iterations, seed, params, sample_rate, init)[0]


def peak_normalize(samples, peak=PEAK):
    samples = np.asarray(samples, dtype=np.float64)
    top = np.max(np.abs(samples)) if samples.size else 0.0
    if top == 0:
        return samples.copy()
    return samples * (peak / top)


def _frames(x, frame_len, hop_len):
    if x.size < frame_len:
        raise ClipTooShort(f"clip has {x.size} samples, need at least {frame_len}")
    view = np.lib.stride_tricks.sliding_window_view(x, frame_len)
    return view[::hop_len]


def zero_crossing_rate(clip, frame_len=WINDOW_LEN, hop_len=HOP_LEN):
    """Fraction of adjacent sample pairs per frame whose signs strictly differ."""
    if frame_len < 2:
        raise ValueError(f"frame_len must be >= 2, got {frame_len}")
    frames = _frames(clip.samples, frame_len, hop_len)
    crossings = np.sum(frames[:, 1:] * frames[:, :-1] < 0, axis=1)
    return crossings / frame_len


def amplitude_envelope(clip, frame_len=WINDOW_LEN, hop_len=HOP_LEN):
    if frame_len < 1:
        raise ValueError(f"frame_len must be >= 1, got {frame_len}")
    return np.abs(_frames(clip.samples, frame_len, hop_len)).max(axis=1)
