"""Published evaluation numbers for the 16 solar generative models, used by
the agreement-replay workflow and its tests.

Units follow the source report: rFID, KID, and CLIP-FID columns are the
reported x10^3 values, FD columns are raw. Scale factors do not matter for
rank statistics. The reported headline numbers themselves require trained
1024^2 generators and 50K-sample runs to recompute, so they enter the
toolkit as data, not as targets.
"""

from __future__ import annotations

from .metrics import MetricReport
from .statlab import MetricTable

REFERENCE_METRIC_NAMES = [
    "FID",
    "rFID",
    "KID",
    "CLIP-FID",
    "precision",
    "recall",
    "MAE-IN-FD",
    "MAE-SOL-FD",
    "VIC-IN-FD",
    "VIC-SOL-FD",
    "FID-p64",
    "FID-p128",
    "FID-p256",
]

# model: FID, rFID, KID, CLIP-FID, prec, rec, MAE-IN, MAE-SOL, VIC-IN, VIC-SOL,
#        FID-p64, FID-p128, FID-p256
_ROWS = [
    ("ProjectedGAN (Baseline)", 2.37, 10.79, 0.74, 12.10, 0.60, 0.84,
     8.44, 29.49, 3.29, 4.99, 1.01, 0.84, 0.97),
    ("EfficientNet-Lite3", 3.80, 13.08, 1.61, 20.42, 0.54, 0.71,
     12.44, 29.87, 4.88, 5.80, 0.96, 0.99, 1.24),
    ("EfficientNet-Lite2", 4.07, 13.17, 0.99, 13.43, 0.58, 0.75,
     11.14, 29.88, 4.45, 5.52, 1.05, 0.90, 0.96),
    ("Augmentations off", 4.19, 17.34, 1.62, 10.81, 0.66, 0.51,
     9.55, 29.07, 5.03, 5.59, 3.68, 3.55, 1.62),
    ("Discriminator 1,2,3", 6.45, 19.25, 2.50, 20.48, 0.65, 0.29,
     14.10, 29.77, 7.84, 6.68, 1.07, 1.18, 1.79),
    ("Trainable Projections", 7.22, 15.12, 3.88, 31.89, 0.48, 0.57,
     16.09, 30.72, 8.42, 6.20, 2.37, 2.15, 2.60),
    ("EfficientNet-Lite1", 7.42, 18.14, 4.31, 24.91, 0.63, 0.47,
     18.53, 30.11, 8.33, 6.53, 1.28, 1.59, 2.08),
    ("Discriminator 1,2", 7.43, 24.99, 3.15, 26.35, 0.54, 0.33,
     20.29, 31.50, 8.40, 7.08, 1.37, 1.73, 2.26),
    ("No Cross Scale Mixing", 9.60, 28.75, 2.89, 22.91, 0.60, 0.15,
     18.79, 33.27, 10.21, 8.46, 1.18, 1.51, 2.55),
    ("Discriminator 1", 10.69, 22.40, 6.15, 37.54, 0.47, 0.39,
     27.06, 31.71, 10.40, 7.76, 2.54, 2.86, 4.00),
    ("No Cross Scale/Channel Mixing", 10.99, 32.29, 4.74, 27.56, 0.62, 0.16,
     21.73, 32.09, 10.04, 8.90, 1.65, 1.53, 2.85),
    ("Diffusion (ADM)", 15.27, 140.63, 15.59, 111.25, 0.43, 0.63,
     53.80, 28.92, 19.55, 12.10, 8.99, 7.92, 11.83),
    ("Random feature network", 17.72, 9.01, 16.44, 267.15, 0.15, 0.57,
     27.16, 28.67, 23.40, 4.59, 21.80, 36.15, 55.84),
    ("Unfreeze feature network", 171.56, 3366.57, 199.23, 2440.33, 0.01, 0.00,
     1141.76, 66.04, 365.75, 494.73, 134.92, 128.03, 162.78),
    ("Randomly initialized feature network (unfrozen)", 252.43, 5119.63,
     299.56, 3111.04, 0.00, 0.00, 1727.87, 78.49, 565.27, 1068.64,
     191.38, 175.69, 187.80),
    ("Unfreeze feature network+Trainable Projections", 328.04, 7221.13,
     405.74, 4784.95, 0.00, 0.00, 4162.40, 148.02, 555.81, 140.88,
     414.97, 441.43, 506.61),
]

# Five-run FID variation of the baseline configuration as reported: a mean
# of 4.2 with a +-2.0 spread. The raw run values were not published.
REFERENCE_RUN_SUMMARY = {"mean": 4.2, "std": 2.0, "n_runs": 5}

# Observer study: 20 subjects, 10 questions each, 91 correct in total
# (mean 4.55), self-rated expertise mean 2.6 on a 1-5 scale.
REFERENCE_STUDY_SUMMARY = {
    "n_subjects": 20,
    "n_questions": 10,
    "mean_correct": 4.55,
    "std_correct": 1.39,
    "mean_expertise": 2.6,
    "expertise_correlation": 0.46,
}

# Pixel-intensity diagnostics of 8-bit renderings: real data and the best
# GAN average 113, the diffusion model 127; tails compared at cutoff 150.
REFERENCE_PIXEL_MEANS = {"real": 113.0, "projected_gan": 113.0, "adm": 127.0}
REFERENCE_TAIL_CUTOFF = 150


def reference_table() -> MetricTable:
    reports = [
        MetricReport(
            model_id=row[0],
            values=dict(zip(REFERENCE_METRIC_NAMES, row[1:])),
        )
        for row in _ROWS
    ]
    return MetricTable(rows=reports, metric_names=list(REFERENCE_METRIC_NAMES))
