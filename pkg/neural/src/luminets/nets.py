"""Three small networks: image->map, image->normals, sparse->dense.

These are deliberately toy-scale stand-ins: the layer counts follow the
published descriptions (conv stacks with batch norm, ReLU and pooling
down to 1x1 for the direct net; a fully convolutional normal estimator
decoding to half the input size; a sparse-map densifier whose decoder
concatenates matching encoder features), with small channel widths
chosen for CPU training.
"""

from __future__ import annotations

import torch
from torch import nn


def _conv_bn(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=1, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
        nn.MaxPool2d(2),
    )


def _deconv(cin, cout, activate=True):
    # no norm on the way up: it slows memorization badly at toy scale
    layers = [nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1)]
    if activate:
        layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


class DirectNet(nn.Module):
    """32x32 image in, 32x32x3 reflectance map out; 5 conv, 2 dense, 5 deconv."""

    def __init__(self, width: int = 24):
        super().__init__()
        w = width
        self.encoder = nn.Sequential(
            _conv_bn(3, w),  # 32 -> 16
            _conv_bn(w, w),  # -> 8
            _conv_bn(w, 2 * w),  # -> 4
            _conv_bn(2 * w, 2 * w),  # -> 2
            _conv_bn(2 * w, 4 * w),  # -> 1
        )
        self.dense = nn.Sequential(
            nn.Linear(4 * w, 4 * w), nn.ReLU(inplace=True), nn.Linear(4 * w, 4 * w), nn.ReLU(inplace=True)
        )
        self.decoder = nn.Sequential(
            _deconv(4 * w, 2 * w),  # 1 -> 2
            _deconv(2 * w, 2 * w),  # -> 4
            _deconv(2 * w, w),  # -> 8
            _deconv(w, w),  # -> 16
            _deconv(w, 3, activate=False),  # -> 32
        )

    def init_output_bias(self, rgb):
        """Start from the dataset's mean color instead of zero."""
        self.decoder[-1][0].bias.data[:] = torch.as_tensor(rgb).float()

    def forward(self, x):
        z = self.encoder(x)
        z = self.dense(z.flatten(1))[:, :, None, None]
        return self.decoder(z)


class NormalNet(nn.Module):
    """Fully convolutional: image in, 3-channel orientation field at half size."""

    def __init__(self, width: int = 16):
        super().__init__()
        w = width
        self.down = nn.Sequential(
            _conv_bn(3, w),  # H -> H/2
            _conv_bn(w, 2 * w),  # -> H/4
        )
        self.mid = nn.Sequential(nn.Conv2d(2 * w, 2 * w, 3, padding=1), nn.ReLU(inplace=True))
        self.up = _deconv(2 * w, w)  # -> H/2
        self.head = nn.Conv2d(w, 3, 3, padding=1)

    def forward(self, x):
        return self.head(self.up(self.mid(self.down(x))))


class SparseNet(nn.Module):
    """Sparse map (rgb + definedness) in, dense map out, skip concatenation."""

    def __init__(self, width: int = 16):
        super().__init__()
        w = width
        self.enc1 = nn.Sequential(nn.Conv2d(4, w, 3, padding=1), nn.ReLU(inplace=True))
        self.enc2 = nn.Sequential(nn.MaxPool2d(2), nn.Conv2d(w, 2 * w, 3, padding=1), nn.ReLU(inplace=True))
        self.enc3 = nn.Sequential(nn.MaxPool2d(2), nn.Conv2d(2 * w, 4 * w, 3, padding=1), nn.ReLU(inplace=True))
        self.up2 = _deconv(4 * w, 2 * w)
        self.dec2 = nn.Sequential(nn.Conv2d(4 * w, 2 * w, 3, padding=1), nn.ReLU(inplace=True))
        self.up1 = _deconv(2 * w, w)
        self.dec1 = nn.Sequential(nn.Conv2d(2 * w, w, 3, padding=1), nn.ReLU(inplace=True))
        self.head = nn.Conv2d(w, 3, 3, padding=1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        d2 = self.dec2(torch.cat([self.up2(e3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return self.head(d1)


def dual_normal_loss(pred, target, mask):
    """Euclidean loss on xyz plus a second one on xy only."""
    diff = (pred - target) * mask
    denom = mask.sum().clamp(min=1.0)
    loss_xyz = (diff**2).sum() / denom
    loss_xy = (diff[:, :2] ** 2).sum() / denom
    return loss_xyz + loss_xy, loss_xyz, loss_xy
