"""Wall-clock comparison of the numba and numpy backends.

Each backend runs in its own interpreter because the choice is fixed at
import time.  Numba compile time is measured separately from the timed runs.

    python benchmarks/bench_backends.py [--once 128] [--spikes 8] [--repeat 1]
"""
import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
from mmo_fhn import BACKEND
from mmo_fhn.params import derive_params, params_from_scaled
from mmo_fhn.poincare import count_saos_batch, default_chart, run_spike_train
from mmo_fhn.rng import make_rng_stream

n_once, n_spikes, repeat = map(int, sys.argv[1:4])
d_once = derive_params(params_from_scaled(0.05, 0.1, 1e-4))
d_train = derive_params(params_from_scaled(0.0, 0.1, 1e-2))
ch_once, ch_train = default_chart(d_once), default_chart(d_train)


def once(n):
    rs = [(i + 0.5) / n for i in range(n)]
    return count_saos_batch(d_once, ch_once, rs, [make_rng_stream(1, i) for i in range(n)], dt=1e-3)


def train(n):
    return run_spike_train(d_train, ch_train, n, 3, dt_scaled=1e-3)


t = time.perf_counter()
once(2)
train(1)
warm = time.perf_counter() - t
out = {"backend": BACKEND, "warmup_s": warm}
for name, fn, n in (("once", once, n_once), ("train", train, n_spikes)):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        res = fn(n)
        best = min(best, time.perf_counter() - t)
    out[name + "_s"] = best
    out[name + "_digest"] = hash(repr(res.N.tolist() if name == "train" else [repr(o) for o in res]))
print(json.dumps(out))
"""


def run(backend, args):
    env = dict(os.environ, MMO_FHN_BACKEND=backend, PYTHONHASHSEED="0")
    res = subprocess.run([sys.executable, "-c", _WORKER, str(args.once), str(args.spikes), str(args.repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--once", type=int, default=128, help="single-count runs from F (eps=1e-4)")
    ap.add_argument("--spikes", type=int, default=8, help="spikes in the train workload (eps=1e-2)")
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()
    rows = [run(b, args) for b in ("numba", "numpy")]
    print(f"{'backend':8} {'warmup[s]':>10} {'once[s]':>10} {'train[s]':>10}")
    for r in rows:
        print(f"{r['backend']:8} {r['warmup_s']:10.3f} {r['once_s']:10.3f} {r['train_s']:10.3f}")
    nb, np_ = rows
    print(f"speed-up: once x{np_['once_s'] / nb['once_s']:.1f}, train x{np_['train_s'] / nb['train_s']:.1f}")
    same = nb["once_digest"] == np_["once_digest"] and nb["train_digest"] == np_["train_digest"]
    print("outputs identical" if same else "OUTPUTS DIFFER")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
