#!/usr/bin/env python3
"""Regenerates the synthetic survey fixtures under data/.

anes_shaped/: 6,475 respondents whose unweighted marginals reproduce the
ANES 2020 descriptive counts for sex, race, education, religion and the two
opinion items (including missing answers), with exactly 395 populated
sex x race x education x religion cells. Answers and weights are synthetic.

fixture/: a small weighted dataset (four attributes, two questions) whose
modal answers vary by race, used by the consistency and homogenization tests.

Output is deterministic for a given seed.
"""

import argparse
import csv
import math
import random
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

SEX = [("S1", 3101), ("S2", 3374)]
RACE = [("R1", 4936), ("R2", 614), ("R3", 362), ("R4", 265), ("R5", 188), ("R6", 110)]
EDU = [("E1", 275), ("E2", 973), ("E3", 2118), ("E4", 1754), ("E5", 1355)]
RELG = [("relgA", 2061), ("relgB", 1600), ("relgC", 1420), ("relgD", 452), ("relgE", 333),
        ("relgF", 153), ("relgG", 185), ("relgH", 113), ("relgI", 46), ("relgJ", 72),
        ("relgK", 40)]
ABORTION = [627, 1463, 890, 3228, 235]
ABORTION_MISSING = 32
IMMIGRATION = [800, 958, 3549, 1131]
IMMIGRATION_MISSING = 37
TARGET_CELLS = 395


def expand(levels):
    out = []
    for level, count in levels:
        out.extend([level] * count)
    return out


def build_demographics(rng):
    columns = [expand(SEX), expand(RACE), expand(EDU), expand(RELG)]
    for col in columns:
        rng.shuffle(col)
    n = len(columns[0])
    rows = [[columns[a][i] for a in range(4)] for i in range(n)]
    cells = Counter(tuple(r) for r in rows)

    # Swap one attribute between two respondents (marginals preserved) until
    # the number of populated cells hits the target.
    while len(cells) != TARGET_CELLS:
        i, j = rng.randrange(n), rng.randrange(n)
        a = rng.randrange(1, 4)
        if rows[i][a] == rows[j][a]:
            continue
        old_i, old_j = tuple(rows[i]), tuple(rows[j])
        new_i = list(rows[i])
        new_j = list(rows[j])
        new_i[a], new_j[a] = rows[j][a], rows[i][a]
        new_i, new_j = tuple(new_i), tuple(new_j)
        before = len(cells)
        cells[old_i] -= 1
        cells[old_j] -= 1
        cells[new_i] += 1
        cells[new_j] += 1
        after = sum(1 for c in cells.values() if c > 0)
        if abs(after - TARGET_CELLS) <= abs(before - TARGET_CELLS):
            rows[i], rows[j] = list(new_i), list(new_j)
            cells = +cells
        else:
            cells[old_i] += 1
            cells[old_j] += 1
            cells[new_i] -= 1
            cells[new_j] -= 1
            cells = +cells
    return rows


def pick_missing(rng, rows, count):
    cells = Counter(tuple(r) for r in rows)
    order = list(range(len(rows)))
    rng.shuffle(order)
    missing = set()
    for i in order:
        if len(missing) == count:
            break
        cell = tuple(rows[i])
        if cells[cell] >= 2:
            cells[cell] -= 1
            missing.add(i)
    return missing


def assign_ordinal(rng, rows, missing, counts, other_index, lean):
    """Assigns exact option counts; options 1..m ordered by a latent score."""
    answers = [None] * len(rows)
    pool = [i for i in range(len(rows)) if i not in missing]
    if other_index is not None:
        rng.shuffle(pool)
        for i in pool[:counts[other_index - 1]]:
            answers[i] = other_index
        pool = pool[counts[other_index - 1]:]
    scored = sorted(pool, key=lambda i: lean(rows[i]) + rng.gauss(0.0, 1.0))
    pos = 0
    for option, c in enumerate(counts, start=1):
        if option == other_index:
            continue
        for i in scored[pos:pos + c]:
            answers[i] = option
        pos += c
    return answers


def cell_lean(seed, scale):
    effects = {}
    r = random.Random(seed)

    def lean(row):
        total = 0.0
        for level in row:
            if level not in effects:
                effects[level] = r.gauss(0.0, scale)
            total += effects[level]
        return total

    return lean


def synthetic_weight(rng):
    return round(math.exp(rng.gauss(0.0, 0.6)), 6)


def write_survey(path, attr_ids, question_ids, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "weight", *attr_ids, *question_ids])
        for r in rows:
            w.writerow(r)


def make_anes_shaped(seed):
    rng = random.Random(seed)
    demo = build_demographics(rng)
    ab_missing = pick_missing(rng, demo, ABORTION_MISSING)
    im_missing = pick_missing(rng, demo, IMMIGRATION_MISSING)
    ab = assign_ordinal(rng, demo, ab_missing, ABORTION, 5, cell_lean(seed + 1, 0.8))
    im = assign_ordinal(rng, demo, im_missing, IMMIGRATION, None, cell_lean(seed + 2, 0.8))
    out = []
    for i, d in enumerate(demo):
        out.append([f"R{i + 1:05d}", f"{synthetic_weight(rng):.6f}", *d,
                    "" if ab[i] is None else ab[i], "" if im[i] is None else im[i]])
    write_survey(ROOT / "data/anes_shaped/survey.csv",
                 ["sex", "race", "education", "religion"], ["abortion", "immigration"], out)


def sample(rng, probs):
    u = rng.random()
    acc = 0.0
    for j, p in enumerate(probs, start=1):
        acc += p
        if u < acc:
            return j
    return len(probs)


def make_small_fixture(seed):
    rng = random.Random(seed)
    # Race drives the modal answer; other attributes perturb it mildly.
    q1_by_race = {"A": [0.62, 0.23, 0.15], "B": [0.18, 0.64, 0.18], "C": [0.2, 0.25, 0.55]}
    q2_by_race = {"A": [0.1, 0.55, 0.2, 0.15], "B": [0.45, 0.2, 0.2, 0.15],
                  "C": [0.15, 0.15, 0.2, 0.5]}
    sexes, races, edus, regions = ["M", "F"], ["A", "B", "C"], ["lo", "mid", "hi"], ["N", "S"]
    rows = []
    idx = 0
    for sex in sexes:
        for race in races:
            for edu in edus:
                for region in regions:
                    n = rng.randint(4, 9)
                    for _ in range(n):
                        idx += 1
                        shift = 0.08 if sex == "F" else 0.0
                        q1 = list(q1_by_race[race])
                        q1[1] += shift
                        q1 = [x / sum(q1) for x in q1]
                        a1 = sample(rng, q1)
                        a2 = sample(rng, q2_by_race[race])
                        if rng.random() < 0.02:
                            a2 = ""
                        weight = round(0.3 + 2.2 * rng.random(), 4)
                        rows.append([f"P{idx:04d}", f"{weight:.4f}", sex, race, edu, region, a1, a2])
    write_survey(ROOT / "data/fixture/survey.csv", ["sex", "race", "education", "region"],
                 ["policy", "spending"], rows)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=2020)
    args = parser.parse_args()
    make_anes_shaped(args.seed)
    make_small_fixture(args.seed)


if __name__ == "__main__":
    main()
