"""cqrsketch Parsers Package"""

from .json_parser import read_checkpoint, read_json, read_manifest, read_sketch
from .table_parser import AssignmentTableParser

__all__ = ["AssignmentTableParser", "read_checkpoint", "read_json", "read_manifest", "read_sketch"]
