"""cqrsketch Writers Package"""

from .csv_writer import CSVWriter, write_assignment_table
from .json_writer import write_checkpoint, write_json, write_manifest, write_sketch

__all__ = [
    "CSVWriter",
    "write_assignment_table",
    "write_checkpoint",
    "write_json",
    "write_manifest",
    "write_sketch",
]
