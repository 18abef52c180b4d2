#!/usr/bin/env python3
"""Observer-study statistics from a response CSV.

Without a file, analyzes a built-in 20-subject roster whose pooled score is
91 correct out of 200 (mean 4.55 of 10): the exact two-sided binomial test
shows such a group is consistent with guessing.

Run: python scripts/study_stats.py [study.csv]
"""

import sys

from heliometrics.statlab import StudyResponse, read_study_csv, study_report

DEFAULT_CORRECT = [5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 4, 4, 4, 4, 4, 4, 4, 5, 5, 3]


def main():
    if len(sys.argv) > 1:
        responses = read_study_csv(sys.argv[1])
    else:
        responses = [
            StudyResponse(f"s{i:02d}", expertise=1 + (i * 7) % 5, correct=c,
                          n_questions=10)
            for i, c in enumerate(DEFAULT_CORRECT)
        ]
    report = study_report(responses)
    print(f"subjects            : {report.n_subjects}")
    print(f"correct (mean +- sd): {report.mean_correct:.2f} +- "
          f"{report.std_correct if report.std_correct is not None else float('nan'):.2f}")
    print(f"pooled              : {report.pooled_correct}/{report.pooled_questions}")
    print(f"two-sided exact p   : {report.pooled_p_value:.4f}")
    print(f"expertise mean      : {report.mean_expertise:.2f}")
    corr = report.expertise_correlation
    print(f"expertise~correct r : "
          f"{'undefined' if corr is None else f'{corr:+.2f}'}")
    print(f"correct histogram   : {report.correct_histogram}")
    print(f"expertise histogram : {report.expertise_histogram}")


if __name__ == "__main__":
    main()
