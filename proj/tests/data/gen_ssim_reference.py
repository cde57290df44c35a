"""Regenerates ssim_reference.inc: SSIM and MS-SSIM of 20 image pairs computed
with pytorch_msssim in float64. The pairs come from the splitmix64 generator
mirrored in test_support.hpp."""

import numpy as np
import torch
from pytorch_msssim import ms_ssim, ssim

H = W = 192
PAIRS = 20
M64 = (1 << 64) - 1


def splitmix_uniform(seed, n):
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + idx * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def make_pair(k):
    n = 3 * H * W
    u = splitmix_uniform(1000 + k, 2 * n)
    i = np.arange(H, dtype=np.float64).reshape(1, H, 1)
    j = np.arange(W, dtype=np.float64).reshape(1, 1, W)
    c = np.arange(3, dtype=np.float64).reshape(3, 1, 1)
    fx = 0.01 + 0.004 * k
    fy = 0.02 - 0.0007 * k
    base = 0.5 + 0.3 * np.sin(2 * np.pi * (fx * j + fy * i) + c)
    a = np.clip(base + 0.2 * (u[:n].reshape(3, H, W) - 0.5), 0.0, 1.0).astype(np.float32)
    amp = 0.05 * (k + 1)
    b = np.clip(a.astype(np.float64) + amp * (u[n:].reshape(3, H, W) - 0.5), 0.0, 1.0).astype(np.float32)
    return a, b


def main():
    rows = []
    for k in range(PAIRS):
        a, b = make_pair(k)
        x = torch.from_numpy(a.astype(np.float64))[None]
        y = torch.from_numpy(b.astype(np.float64))[None]
        s = ssim(x, y, data_range=1.0).item()
        m = ms_ssim(x, y, data_range=1.0).item()
        rows.append(f"    {{{s:.12f}, {m:.12f}}},")
    with open("ssim_reference.inc", "w") as f:
        f.write("// Generated by gen_ssim_reference.py (pytorch_msssim, float64).\n")
        f.write("// {ssim, ms_ssim} for pair k = 0..19.\n")
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
