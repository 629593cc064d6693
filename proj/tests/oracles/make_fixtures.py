# Copyright 2026 The predgap Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the fixture CSVs under tests/data and prints reference values.

The printed numbers are pasted into tests/test_oracles.cpp. Rerun only when a
fixture changes; the C++ side never calls Python.
"""

import json
import pathlib

import numpy as np
import statsmodels.api as sm
from sklearn.decomposition import PCA
from sklearn.metrics import matthews_corrcoef, roc_auc_score, log_loss

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def write_csv(name, header, rows):
    with open(DATA / name, "w") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in r) + "\n")


def logit_fixture(rng):
    n = 400
    x = rng.normal(size=(n, 3))
    x[:, 2] = (x[:, 2] > 0.3).astype(float)
    eta = -0.4 + 0.9 * x[:, 0] - 0.6 * x[:, 1] + 0.8 * x[:, 2]
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-eta))).astype(int)
    write_csv("logit.csv", ["x0", "x1", "x2", "y"], [[*map(float, x[i]), int(y[i])] for i in range(n)])
    fit = sm.Logit(y, sm.add_constant(x)).fit(disp=0, tol=1e-12, maxiter=200)
    return {"params": fit.params.tolist(), "llf": float(fit.llf), "n": n}


def scores_fixture(rng):
    n = 300
    y = rng.integers(0, 2, size=n)
    # Rounded scores produce many ties, which the pair-count AUC must handle.
    p = np.clip(np.round(0.35 * y + rng.uniform(size=n) * 0.65, 2), 0.01, 0.99)
    write_csv("scores.csv", ["y", "p"], [[int(y[i]), float(p[i])] for i in range(n)])
    pred = (p >= 0.5).astype(int)
    return {
        "auc": float(roc_auc_score(y, p)),
        "mcc": float(matthews_corrcoef(y, pred)),
        "log_loss": float(log_loss(y, p)),
    }


def pca_fixture(rng):
    n = 200
    z = rng.normal(size=(n, 2))
    x = np.column_stack([
        z[:, 0] * 3 + rng.normal(scale=0.3, size=n),
        z[:, 0] - z[:, 1] + rng.normal(scale=0.3, size=n),
        z[:, 1] * 2 + 5,
        rng.normal(size=n) * 0.5,
    ])
    write_csv("pca.csv", ["a", "b", "c", "d"], [list(map(float, r)) for r in x])
    std = (x - x.mean(0)) / x.std(0, ddof=1)
    p = PCA().fit(std)
    return {"ratio": p.explained_variance_ratio_.tolist(), "variance": p.explained_variance_.tolist()}


def main():
    DATA.mkdir(exist_ok=True)
    rng = np.random.default_rng(20240611)
    out = {"logit": logit_fixture(rng), "scores": scores_fixture(rng), "pca": pca_fixture(rng)}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
