import torch

from city2scene.models.encoder import (
    Encoder,
    EncoderSpec,
    ReferenceArchitecture,
    register_encoder,
)


class ResidualBlock(torch.nn.Module):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = torch.nn.Conv2d(
            in_channels, out_channels, kernel_size=3, padding=1, bias=False
        )
        self.bn1 = torch.nn.BatchNorm2d(out_channels)
        self.conv2 = torch.nn.Conv2d(
            out_channels, out_channels, kernel_size=1, bias=False
        )
        self.bn2 = torch.nn.BatchNorm2d(out_channels)
        self.shortcut = torch.nn.Identity()
        if in_channels != out_channels:
            self.shortcut = torch.nn.Sequential(
                torch.nn.Conv2d(in_channels, out_channels, kernel_size=1, bias=False),
                torch.nn.BatchNorm2d(out_channels),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = torch.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return torch.relu(y + self.shortcut(x))


class ReferenceCNN(Encoder):
    """
    Small residual CNN: a 3x3 stem, one residual block per width with 2x2 max
    pooling between blocks, then global average pooling over frequency and time.
    """

    def __init__(self, spec: EncoderSpec):
        super().__init__(spec)
        widths = (*spec.channel_widths, spec.embedding_dim)
        self.stem = torch.nn.Sequential(
            torch.nn.Conv2d(1, spec.stem_width, kernel_size=3, padding=1, bias=False),
            torch.nn.BatchNorm2d(spec.stem_width),
            torch.nn.ReLU(),
        )
        layers = []
        in_channels = spec.stem_width
        for i, width in enumerate(widths):
            layers.append(ResidualBlock(in_channels, width))
            if i < len(widths) - 1:
                layers.append(torch.nn.MaxPool2d(2, ceil_mode=True))
            in_channels = width
        self.blocks = torch.nn.Sequential(*layers)
        self.pool = torch.nn.AdaptiveAvgPool2d(1)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stem(x.unsqueeze(1))
        x = self.blocks(x)
        return self.pool(x).flatten(1)


@register_encoder(ReferenceArchitecture)
def reference_cnn(spec: EncoderSpec) -> ReferenceCNN:
    return ReferenceCNN(spec)
