from .cli_base import cli
from .lambdasym import check, evolve, find, limit, reduce
