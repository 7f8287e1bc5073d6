from . import main
from .main import run
