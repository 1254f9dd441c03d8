"""maskforge: weak-supervision dataset curation for first-person clipping detection.

The engine turns unlabeled gameplay frames plus a handful of labeled good
exemplars into a self-supervised training corpus: segmentation masks are
filtered (clustering, resampling, dedup, text prompts) and composited over or
under the weapon region of target frames to manufacture pseudo-clip positives
and no-clip negatives, which are validated with probe training and
low-prevalence evaluation.
"""

__version__ = "0.1.0"
