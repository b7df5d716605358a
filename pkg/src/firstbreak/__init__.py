"""Multi-stage first-arrival picking: coarse segmentation, velocity-constrained windowing, refined segmentation, robust QC."""
