"""Time the batched return map under the numba and pure-numpy backends.

Each backend runs in its own interpreter because COINBILLIARD_NUMBA is read
once at import.  Results from both are compared point by point.

    python3 benchmarks/bench_kernels.py --points 100000 --repeat 5
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
from coinbilliard import backend_name
from coinbilliard.core import CoinParams
from coinbilliard.dynamics import return_map_batch

n, repeat, seed, out = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3]), sys.argv[4]
rng = np.random.default_rng(seed)
theta = np.where(rng.random(n) < 0.5, 0.0, np.pi) + rng.uniform(0.2, np.pi - 0.2, n)
theta_dot = rng.uniform(-1.0, 1.0, n)
params = CoinParams()

t0 = time.perf_counter()
return_map_batch(theta[:8], theta_dot[:8], params)
warm = time.perf_counter() - t0

times = []
for _ in range(repeat):
    t0 = time.perf_counter()
    th1, td1, st = return_map_batch(theta, theta_dot, params)
    times.append(time.perf_counter() - t0)
np.savez(out, theta=th1, theta_dot=td1, status=st)
print(json.dumps({"backend": backend_name(), "warmup": warm, "best": min(times), "mean": sum(times) / len(times)}))
"""


def run(flag: str, n: int, repeat: int, seed: int, out: str) -> dict:
    env = dict(os.environ, COINBILLIARD_NUMBA=flag)
    res = subprocess.run(
        [sys.executable, "-c", WORKER, str(n), str(repeat), str(seed), out],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        paths = {flag: os.path.join(tmp, f"{flag}.npz") for flag in ("1", "0")}
        rows = {flag: run(flag, args.points, args.repeat, args.seed, p) for flag, p in paths.items()}
        a, b = (np.load(p) for p in paths.values())
        same_status = bool(np.array_equal(a["status"], b["status"]))
        ok = a["status"] == 0
        dev = float(np.max(np.abs(a["theta"][ok] - b["theta"][ok]), initial=0.0))

    print(f"{'backend':<8} {'warmup s':>10} {'best s':>10} {'mean s':>10}")
    for r in rows.values():
        print(f"{r['backend']:<8} {r['warmup']:>10.3f} {r['best']:>10.4f} {r['mean']:>10.4f}")
    fast, slow = rows["1"]["best"], rows["0"]["best"]
    print(f"points={args.points}  speedup={slow / fast:.1f}x  status_equal={same_status}  max|dtheta|={dev:.2e}")
    return 0 if same_status else 1


if __name__ == "__main__":
    sys.exit(main())
