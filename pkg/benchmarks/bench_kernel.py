"""Compare the compiled and pure-Python acceptance kernels.

Two measurements on the same synthetic corpus:
  * accepts-all: repeated whole-corpus acceptance checks against the prefix
    tree (the exact call the inference inner loop makes per candidate merge)
  * infer: a full red-blue inference run, which is dominated by those checks

Usage: python benchmarks/bench_kernel.py [--traces N] [--length N] [--seed N]
"""
import argparse
import random
import sys
import time

from tacinfer import _kernel
from tacinfer.efsm import accepts_all, build_prefix_tree
from tacinfer.inference import InferenceConfig, infer
from tacinfer.traces import Corpus, Trace, TraceElement


def synthetic_corpus(n_traces: int, max_len: int, seed: int) -> Corpus:
    rng = random.Random(seed)
    labels = [f"tac{i}" for i in range(12)]
    params = ["", "with arith", "x", "y", "H", "in H", "by auto", "at 1"]
    traces = []
    for i in range(n_traces):
        elements = tuple(
            TraceElement(rng.choice(labels), rng.choice(params))
            for _ in range(rng.randint(1, max_len))
        )
        traces.append(Trace(f"lemma{i}", elements, "bench"))
    return Corpus(tuple(traces))


def time_accepts_all(corpus: Corpus, repeats: int) -> float:
    machine = build_prefix_tree(corpus)
    start = time.perf_counter()
    for _ in range(repeats):
        assert accepts_all(machine, corpus)
    return time.perf_counter() - start


def time_infer(corpus: Corpus) -> float:
    start = time.perf_counter()
    infer(corpus, InferenceConfig(k=1))
    return time.perf_counter() - start


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--traces", type=int, default=300)
    parser.add_argument("--length", type=int, default=12)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=200, help="accepts-all repetitions")
    args = parser.parse_args(argv)

    if not _kernel.have_compiled_kernel():
        print("compiled kernel not built; run `python setup.py build_ext --inplace`")
        return 1

    corpus = synthetic_corpus(args.traces, args.length, args.seed)
    tree = build_prefix_tree(corpus)
    print(
        f"corpus: {len(corpus)} traces, prefix tree: {tree.num_states} states, "
        f"{len(tree.transitions)} transitions"
    )

    results = {}
    for impl in ("python", "cython"):
        _kernel.set_kernel(impl)
        results[impl] = (
            time_accepts_all(corpus, args.repeats),
            time_infer(corpus),
        )
    _kernel.set_kernel("auto")

    print(f"\n{'kernel':<10} {'accepts-all x' + str(args.repeats):>20} {'infer':>12}")
    for impl, (t_acc, t_inf) in results.items():
        print(f"{impl:<10} {t_acc:>19.3f}s {t_inf:>11.3f}s")
    py, cy = results["python"], results["cython"]
    print(
        f"\nspeedup (python/cython): accepts-all {py[0] / cy[0]:.1f}x, "
        f"infer {py[1] / cy[1]:.1f}x"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
