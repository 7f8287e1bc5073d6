import abc
import dataclasses
import importlib
import logging
from typing import Callable, ClassVar

import torch

from city2scene.base.errors import ShapeError
from city2scene.base.settings import ConfigurationError, Settings

ReferenceArchitecture = "reference_cnn"


@dataclasses.dataclass
class EncoderSpec(Settings):
    """
    Describes the encoder: everything in front of the final fully connected layer.
    architecture is either a registered name or a "package.module:factory" plugin.
    The reference CNN uses (*channel_widths, embedding_dim) as its block widths.
    """

    LoggerName: ClassVar[str] = "[city2scene::EncoderSpec]"

    architecture: str = dataclasses.field(default=None)
    n_mels: int = dataclasses.field(default=None)
    embedding_dim: int = dataclasses.field(default=None)
    channel_widths: tuple[int, ...] = dataclasses.field(default=None)
    stem_width: int = dataclasses.field(default=None)
    plugin_options: dict = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.architecture is None:
            self.architecture = ReferenceArchitecture

        if self.n_mels is None:
            self.n_mels = 64

        if self.embedding_dim is None:
            self.embedding_dim = 128

        if self.channel_widths is None:
            self.channel_widths = (32, 64)
        self.channel_widths = tuple(self.channel_widths)

        if self.stem_width is None:
            self.stem_width = 32

        if self.plugin_options is None:
            self.plugin_options = {}

    def problems(self) -> list[str]:
        problems = []
        if self.n_mels < 1:
            problems.append(f"n_mels must be at least 1 (got {self.n_mels})")
        if self.embedding_dim < 1:
            problems.append(
                f"embedding_dim must be at least 1 (got {self.embedding_dim})"
            )
        if any(w < 1 for w in self.channel_widths) or self.stem_width < 1:
            problems.append("channel widths must be positive")
        if (
            self.architecture not in _EncoderRegistry
            and ":" not in self.architecture
        ):
            problems.append(
                f"architecture '{self.architecture}' is neither registered"
                f" ({sorted(_EncoderRegistry)}) nor a 'module:factory' plugin"
            )
        return problems


class Encoder(torch.nn.Module, abc.ABC):
    """
    Maps a (B, F, T) batch of log-mel spectrograms to (B, D) embeddings, pooling
    away the time axis so that D does not depend on T.
    """

    def __init__(self, spec: EncoderSpec):
        super().__init__()
        self.n_mels = spec.n_mels
        self.embedding_dim = spec.embedding_dim

    @abc.abstractmethod
    def embed(self, x: torch.Tensor) -> torch.Tensor:
        pass

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != self.n_mels:
            raise ShapeError(
                "encoder input", f"(B, {self.n_mels}, T)", tuple(x.shape)
            )
        embeddings = self.embed(x)
        if embeddings.shape != (x.shape[0], self.embedding_dim):
            raise ShapeError(
                "encoder output",
                (x.shape[0], self.embedding_dim),
                tuple(embeddings.shape),
            )
        return embeddings


EncoderFactory = Callable[[EncoderSpec], Encoder]

_EncoderRegistry: dict[str, EncoderFactory] = {}


def register_encoder(name: str) -> Callable[[EncoderFactory], EncoderFactory]:
    def decorator(factory: EncoderFactory) -> EncoderFactory:
        _EncoderRegistry[name] = factory
        return factory

    return decorator


def _load_plugin(identifier: str) -> EncoderFactory:
    module_name, _, attribute = identifier.partition(":")
    try:
        module = importlib.import_module(module_name)
        factory = getattr(module, attribute)
    except (ImportError, AttributeError) as err:
        raise ConfigurationError(
            [f"cannot load encoder plugin '{identifier}' ({err})"]
        ) from err
    if not callable(factory):
        raise ConfigurationError([f"encoder plugin '{identifier}' is not callable"])
    return factory


def build_encoder(spec: EncoderSpec) -> Encoder:
    spec.validate()
    if spec.architecture in _EncoderRegistry:
        factory = _EncoderRegistry[spec.architecture]
    else:
        factory = _load_plugin(spec.architecture)
        logging.getLogger("[city2scene::Encoder]").info(
            f"Using encoder plugin {spec.architecture}."
        )
    encoder = factory(spec)
    if not isinstance(encoder, Encoder):
        raise ConfigurationError(
            [f"{spec.architecture} did not build an Encoder ({type(encoder)})"]
        )
    return encoder
