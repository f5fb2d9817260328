"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--frames 600] [--repeat 20]

Both paths are called directly, so the env flag is not needed here.  Each
kernel is called once before timing so JIT compilation is excluded.
"""

import argparse
import timeit

import numpy as np

from rdlnlab import _kernels, _kernels_numpy
from rdlnlab.hmm import build_hmm


def make_inputs(frames, seed):
    hmm = build_hmm(10, 3, 13, 0.5, seed=seed)
    rng = np.random.default_rng(seed)
    post = rng.dirichlet(np.full(hmm.num_pdfs, 0.5), size=frames)
    log_obs = np.log(post)
    chain = np.arange(min(frames // 2, hmm.num_pdfs))
    log_stay = hmm.log_transitions[chain, chain]
    log_adv = np.full(len(chain), -np.inf)
    log_adv[:-1] = np.log(0.5)
    ref = rng.integers(0, 10, size=frames // 4)
    hyp = rng.integers(0, 10, size=frames // 4)
    return {
        "forward": (hmm.log_initial, hmm.log_transitions, log_obs),
        "viterbi": (hmm.log_initial, hmm.log_transitions, log_obs),
        "chain_viterbi": (0.0, log_stay, log_adv, np.ascontiguousarray(log_obs[:, chain])),
        "edit_distance_table": (ref, hyp),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=600)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    inputs = make_inputs(args.frames, args.seed)
    print(f"{'kernel':<22}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, call_args in inputs.items():
        fast = _kernels.NUMBA_KERNELS[name]
        slow = getattr(_kernels_numpy, name)
        fast(*call_args)
        slow(*call_args)
        t_np = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<22}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
