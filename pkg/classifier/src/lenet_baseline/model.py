"""The LeNet-5 archetype, sized for 28x28 single-channel input.

Two 5x5 sigmoid convolutions with 2x2 average pooling after each, then
three dense layers narrowing 400 -> 120 -> 84 -> 10. The first
convolution pads by 2 so the 28x28 input behaves like the classical
32x32 one; all activations are sigmoid, as in the original network.
"""

import torch
from torch import nn


class LeNet5(nn.Module):
    """Classical LeNet-5 with sigmoid activations.

    Input: float tensor of shape (batch, 1, 28, 28).
    Output: unnormalized class scores of shape (batch, 10).
    """

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 6, kernel_size=5, padding=2),
            nn.Sigmoid(),
            nn.AvgPool2d(kernel_size=2, stride=2),
            nn.Conv2d(6, 16, kernel_size=5),
            nn.Sigmoid(),
            nn.AvgPool2d(kernel_size=2, stride=2),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(16 * 5 * 5, 120),
            nn.Sigmoid(),
            nn.Linear(120, 84),
            nn.Sigmoid(),
            nn.Linear(84, 10),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x))
