"""Compare the compiled and pure-Python matching kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--size 30] [--repeat 5]
"""
import argparse
import json

from portraitguard.bench import kernel_report, matching_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rep = kernel_report(size=args.size, repeat=args.repeat)
    if args.json:
        print(json.dumps(rep, indent=2))
        return
    print(f"kernel inputs: {args.size} x {args.size}, best of {args.repeat}")
    for name, row in rep["kernels"].items():
        line = f"{name:10s} python {row['python'] * 1e6:9.1f} us"
        if "cython" in row:
            line += f"   cython {row['cython'] * 1e6:8.1f} us   x{row['speedup']:.1f}"
        print(line)
    mr = matching_report()
    print(f"full match, dense preset [{mr['backend']}]: plain {mr['seconds']['plain']['total'] * 1e3:.2f} ms"
          f", hashed {mr['seconds']['hashed']['total'] * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
