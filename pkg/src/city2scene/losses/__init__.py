from . import classification, distillation, ensemble, logits
from .classification import cross_entropy, log_softmax, softmax
from .distillation import KDConfig, KLDirection, TeacherMode, combined_loss, kd_loss
from .ensemble import ensemble_logits
from .logits import Logits, LogitsKind
