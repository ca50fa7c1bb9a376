import csv
import math
import random

import pytest

N_AP = 520


def write_campus(path, seed=1):
    """Two buildings, two floors each, a few locations per floor."""
    rng = random.Random(seed)
    aps = []
    for b in range(2):
        for f in range(2):
            for k in range(6):
                aps.append((b, f, 150 * b + rng.uniform(0, 40), rng.uniform(0, 40)))
    header = [f"WAP{i:03d}" for i in range(1, N_AP + 1)] + [
        "LONGITUDE", "LATITUDE", "FLOOR", "BUILDINGID", "SPACEID",
        "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP",
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for b in range(2):
            for f in range(2):
                for loc in range(4):
                    x, y = 150 * b + 10 * loc, 10.0 * (loc % 2)
                    for _ in range(6):
                        rss = [100] * N_AP
                        for i, (ab, af, ax, ay) in enumerate(aps):
                            d = max(1.0, math.hypot(ax - x, ay - y))
                            v = -30 - 22 * math.log10(d) - 14 * abs(af - f) - (25 if ab != b else 0)
                            v += rng.gauss(0, 2)
                            if v >= -100:
                                rss[i] = int(round(min(0, v)))
                        w.writerow(rss + [x, y, f, b, 100 + loc, 1, 0, 0, 0])


@pytest.fixture(scope="session")
def campus_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "campus.csv"
    write_campus(path)
    return str(path)


@pytest.fixture(scope="session")
def trained(campus_csv, tmp_path_factory):
    import hiloc

    cfg = hiloc.RunConfig()
    cfg.data_path = campus_csv
    cfg.model_path = str(tmp_path_factory.mktemp("model") / "m.hlm")
    cfg.sae_hidden = [64, 32, 64]
    cfg.classifier_hidden = [32, 32]
    cfg.epochs = 15
    info = hiloc.train(cfg)
    return cfg, info
