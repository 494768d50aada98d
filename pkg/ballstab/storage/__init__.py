"""Storage - run directories on disk."""

from .trajectory_store import CSV_HEADER, TrajectoryStore, read_big, write_big

__all__ = ["CSV_HEADER", "TrajectoryStore", "read_big", "write_big"]
