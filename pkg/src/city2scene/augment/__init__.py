from . import augmenter, impulse_response, masking, mixing, mixstyle, settings
from .augmenter import BatchAugmenter
from .impulse_response import dir_aug, load_impulse_responses
from .masking import spec_augment
from .mixing import MixupDraw, mixup
from .mixstyle import freq_mixstyle
from .settings import AugmentConfig, SoftLabel
