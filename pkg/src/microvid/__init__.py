"""Creativity-oriented feature extraction and classification for short videos."""

from .groups import Group
from .learn import GroupClassifier, fuse_median, split_dataset
from .novelty import AttributeSpace, NoveltyModel
from .svm import KernelSVC

__all__ = ["AttributeSpace", "Group", "GroupClassifier", "KernelSVC", "NoveltyModel", "fuse_median", "split_dataset"]
__version__ = "0.1.0"
