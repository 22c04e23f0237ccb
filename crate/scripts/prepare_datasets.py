#!/usr/bin/env python3
"""Convert the raw public benchmark files into headered CSVs under data/.

Usage: prepare_datasets.py RAW_DIR OUT_DIR

RAW_DIR may contain any of:
  adult.data, adult.test                    (UCI Adult)
  compas-scores-two-years.csv               (ProPublica COMPAS)
  law_data.csv or bar_pass_prediction.csv   (LSAC bar passage study)

Only row-level cleanup happens here (whitespace, label suffixes, the
ProPublica screening filter). Missing values are left in place; the loader
drops incomplete rows according to each schema.
"""
import csv
import os
import sys

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

COMPAS_COLUMNS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "c_charge_desc",
    "two_year_recid",
]


def prepare_adult(raw_dir, out_dir):
    rows = []
    for name in ("adult.data", "adult.test"):
        path = os.path.join(raw_dir, name)
        with open(path, newline="") as fh:
            for rec in csv.reader(fh, skipinitialspace=True):
                if len(rec) != len(ADULT_COLUMNS):
                    continue
                rec = [v.strip() for v in rec]
                rec[-1] = rec[-1].rstrip(".")
                rows.append(rec)
    write(os.path.join(out_dir, "adult.csv"), ADULT_COLUMNS, rows)


def prepare_compas(raw_dir, out_dir):
    path = os.path.join(raw_dir, "compas-scores-two-years.csv")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        # the raw file repeats some column names; keep the first occurrence
        index = {}
        for i, name in enumerate(header):
            index.setdefault(name, i)
        for rec in reader:
            get = lambda c: rec[index[c]]
            try:
                days = int(get("days_b_screening_arrest"))
            except ValueError:
                continue
            if not -30 <= days <= 30:
                continue
            if get("is_recid") == "-1":
                continue
            if get("c_charge_degree") == "O":
                continue
            if get("score_text") == "N/A":
                continue
            rows.append([get(c) for c in COMPAS_COLUMNS])
    write(os.path.join(out_dir, "compas.csv"), COMPAS_COLUMNS, rows)


def prepare_law(raw_dir, out_dir):
    for name in ("law_data.csv", "bar_pass_prediction.csv"):
        path = os.path.join(raw_dir, name)
        if os.path.exists(path):
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                rows = [rec for rec in reader]
            write(os.path.join(out_dir, "law.csv"), header, rows)
            return True
    return False


def write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{path}: {len(rows)} rows")


def main():
    if len(sys.argv) != 3:
        print(__doc__)
        sys.exit(2)
    raw_dir, out_dir = sys.argv[1], sys.argv[2]
    os.makedirs(out_dir, exist_ok=True)
    if os.path.exists(os.path.join(raw_dir, "adult.data")):
        prepare_adult(raw_dir, out_dir)
    if os.path.exists(os.path.join(raw_dir, "compas-scores-two-years.csv")):
        prepare_compas(raw_dir, out_dir)
    if not prepare_law(raw_dir, out_dir):
        print("law: no raw file found, skipped")


if __name__ == "__main__":
    main()
