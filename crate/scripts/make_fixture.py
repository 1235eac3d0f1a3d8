"""Generate the synthetic 29-patient dose-escalation fixture.

Seven cohorts of daily records. The 210mg cohort is built to respond and stay
on study; the 70mg cohort has early high-grade toxicity and early progression.
The remaining cohorts share one "typical" course with random variation.

Usage: python3 scripts/make_fixture.py > fixtures/dose_escalation_29.csv
"""

import random
import sys

COHORTS = [("20mg", 3), ("40mg", 3), ("70mg", 3), ("100mg", 5), ("140mg", 3), ("210mg", 7), ("280mg", 5)]
SCAN = 56


def toxicity(rng, days, episodes, grades):
    g = [0] * (days + 1)
    for _ in range(episodes):
        start = rng.randint(1, max(1, days - 1))
        length = rng.randint(3, 12)
        grade = rng.choice(grades)
        for d in range(start, min(days, start + length) + 1):
            g[d] = max(g[d], grade)
    return g


def typical(rng):
    exit_day = rng.randint(100, 190)
    recist = {}
    pd_day = rng.randint(90, exit_day)
    for d in range(SCAN, exit_day + 1, SCAN):
        recist[d] = "PD" if d >= pd_day else rng.choice(["SD", "SD", "PR"])
    recist[exit_day] = "PD"
    return exit_day, recist, toxicity(rng, exit_day, rng.randint(1, 3), [1, 1, 2, 2, 3])


def responder(rng):
    exit_day = rng.randint(250, 340)
    recist = {}
    for d in range(SCAN, exit_day + 1, SCAN):
        recist[d] = "PR" if d < 2 * SCAN else rng.choice(["PR", "CR", "CR"])
    return exit_day, recist, toxicity(rng, exit_day, rng.randint(0, 2), [1, 1, 2])


def poor(rng):
    death = rng.randint(55, 95)
    pd_day = rng.randint(25, 45)
    recist = {pd_day: "PD", death: "DEATH"}
    return death, recist, toxicity(rng, death, rng.randint(2, 3), [2, 3, 3])


def main(seed):
    rng = random.Random(seed)
    out = ["patient_id,cohort,day,ctcae_grade,recist,off_study"]
    pid = 0
    for cohort, n in COHORTS:
        course = {"210mg": responder, "70mg": poor}.get(cohort, typical)
        for _ in range(n):
            pid += 1
            exit_day, scans, grades = course(rng)
            state = "SD"
            for d in range(exit_day + 1):
                state = scans.get(d, state)
                out.append(f"P{pid:02d},{cohort},{d},{grades[d]},{state},{'true' if d == exit_day else 'false'}")
    sys.stdout.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20)
