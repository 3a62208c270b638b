"""Weak/strong revealed-preference checks for the built-in families and the swapped anti-example."""

import argparse

from integrability.demand import DemandSpec, builtin_specs
from integrability.revealed import strong_axiom_check, weak_axiom_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=40)
    ap.add_argument("--chains", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    specs = builtin_specs() + [DemandSpec.external("swapped_cobb_douglas")]
    for spec in specs:
        weak = weak_axiom_check(spec, args.samples, args.seed)
        for length in (3, 4):
            strong = strong_axiom_check(spec, length, args.chains, args.seed)
            print(f"{spec.label():<28} weak {len(weak.violations):>4}/{weak.tested:<5} "
                  f"chains(len {length}) {len(strong.violations):>3}/{strong.tested:<4} "
                  f"unfinished {strong.failed_chains}")


if __name__ == "__main__":
    main()
