"""Smoke test for the srv6pm_py extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import os
import sys
import tempfile

import srv6pm_py as pm


def main():
    names = [name for name, _ in pm.scenarios()]
    assert "paper-experiment" in names, names

    q = pm.decode_query(pm.encode_query(42, 9000, 5))
    assert (q["sender_seq"], q["sender_tx_counter"], q["block_number"]) == (42, 9000, 5), q

    sim = pm.Simulation.preset("out-of-band", seed=11)
    sim.run()
    checks = sim.block_checks()
    assert checks and all(c["measured"] == c["oracle"] for c in checks), checks

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "records.jsonl")
        n = sim.export(path)
        with open(path) as f:
            lines = [json.loads(line) for line in f]
    assert n == len(lines) == len(sim.records())

    print(f"ok: {len(checks)} blocks exact, trace {sim.trace_digest()[:16]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
