from .store import MergeError, Resolution, ReviewConflict, ReviewStore, merge_final_dataset

__all__ = ["MergeError", "Resolution", "ReviewConflict", "ReviewStore", "merge_final_dataset"]
