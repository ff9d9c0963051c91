"""High-resolution reference campaign for the Bargmann-Fock(2) component density.

Halved spacing, N=1000, R=32.  The output JSON is frozen in tests/data and
keyed by the config hash; rerun only when the estimator definition changes.
"""

import json
import sys
import time
from pathlib import Path

from nodalbetti.config import canonical, config_hash
from nodalbetti.harness import ExperimentConfig, estimate_betti_density
from nodalbetti.models import SpectralModel

OUT = Path(__file__).resolve().parent.parent / "data" / "c0_oracle.json"


def main(replicates=1000, seed=20240601):
    model = SpectralModel.bargmann_fock(2)
    config = ExperimentConfig(
        model, R_list=(32.0,), replicates=replicates, master_seed=seed,
        spacing=model.default_spacing() / 2,
    )
    t0 = time.time()
    result = estimate_betti_density(config)
    row = result.row(32.0, 0)
    record = {
        "config_hash": config_hash(config),
        "config": canonical(config),
        "c0_mean": row.mean,
        "c0_std": row.std,
        "ci_lo": row.ci_lo,
        "ci_hi": row.ci_hi,
        "N": row.N,
        "seconds": round(time.time() - t0, 1),
    }
    OUT.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    print(json.dumps(record, indent=2))


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
