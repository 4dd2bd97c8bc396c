from .encoder import BodyPatchEmbed, MotionEncoder
from .context import ContextMap
from .characterizer import AdaIN, Characterizer, DecoderBlock, Expand, adain_transform
from .ncm import NcmState, NeuralContextMatcher

__all__ = [
    "AdaIN",
    "BodyPatchEmbed",
    "Characterizer",
    "ContextMap",
    "DecoderBlock",
    "Expand",
    "MotionEncoder",
    "NcmState",
    "NeuralContextMatcher",
    "adain_transform",
]
