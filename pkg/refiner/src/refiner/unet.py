"""Image-to-image UNet for reconstruction refinement."""

from __future__ import annotations

import torch
import torch.nn as nn


def _conv_block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class UNet(nn.Module):
    """Standard encoder/decoder with skip connections.

    depth counts the down/up level pairs; channel width doubles per level
    from base_channels. Input and output are single-channel images.
    In residual mode the network predicts a correction added to its
    input, the usual choice for reconstruction post-processing.
    """

    def __init__(self, depth: int = 4, base_channels: int = 32,
                 residual: bool = True):
        super().__init__()
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.depth = depth
        self.residual = residual
        widths = [base_channels * (1 << i) for i in range(depth + 1)]

        self.encoders = nn.ModuleList()
        c_in = 1
        for w in widths[:-1]:
            self.encoders.append(_conv_block(c_in, w))
            c_in = w
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(widths[-2], widths[-1])

        self.upsample = nn.Upsample(scale_factor=2, mode="bilinear",
                                    align_corners=False)
        self.up_convs = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for w_skip, w_in in zip(reversed(widths[:-1]), reversed(widths[1:])):
            self.up_convs.append(nn.Conv2d(w_in, w_skip, 1))
            self.decoders.append(_conv_block(2 * w_skip, w_skip))
        self.head = nn.Conv2d(widths[0], 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        inputs = x
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.up_convs, self.decoders,
                                 reversed(skips)):
            x = up(self.upsample(x))
            x = dec(torch.cat([skip, x], dim=1))
        out = self.head(x)
        return inputs + out if self.residual else out
