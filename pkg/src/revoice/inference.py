"""Generator inference over arbitrary-length waveforms.

Long inputs are processed in overlapping windows crossfaded at the seams to
bound memory and avoid boundary clicks.
"""

from __future__ import annotations

import numpy as np
import torch

from .dsp import Waveform

CHUNK_SIZE = 2**18
CHUNK_OVERLAP = 4096


def restore_waveform(generator, w: Waveform, chunk_size: int = CHUNK_SIZE,
                     overlap: int = CHUNK_OVERLAP) -> Waveform:
    """Run the generator over one waveform, chunked with crossfaded overlap."""
    cfg = generator.cfg
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"waveform rate {w.sample_rate} does not match model rate {cfg.sample_rate}"
        )
    x = w.samples
    if len(x) <= chunk_size:
        return Waveform(_run(generator, x), w.sample_rate)
    hop = chunk_size - overlap
    fade_in = np.linspace(0.0, 1.0, overlap)
    out = np.zeros(len(x))
    weight = np.zeros(len(x))
    start = 0
    while start < len(x):
        stop = min(start + chunk_size, len(x))
        piece = _run(generator, x[start:stop])
        win = np.ones(stop - start)
        if start > 0:
            win[:overlap] = fade_in[: stop - start]
        if stop < len(x):
            win[-overlap:] = fade_in[::-1]
        out[start:stop] += piece * win
        weight[start:stop] += win
        if stop == len(x):
            break
        start += hop
    return Waveform(out / np.maximum(weight, 1e-12), w.sample_rate)


def _run(generator, samples: np.ndarray) -> np.ndarray:
    # the generator pads to its own length multiple and crops back
    x = torch.from_numpy(samples).float().unsqueeze(0)
    with torch.no_grad():
        y = generator(x)
    return y[0].numpy().astype(np.float64)
