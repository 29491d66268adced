"""Static cost tables for every model combination.

Prints parameter counts and multiply-accumulate counts (at 256x256 input)
for combinations I, II, and III in both train and deploy modes, with the
per-module breakdown for combination II. Run with no arguments:

    python3 demos/cost_accounting.py
"""

from lvunet import build, count_flops, count_params, to_deploy


def human(n):
    if n >= 1e9:
        return f"{n / 1e9:.2f}G"
    if n >= 1e6:
        return f"{n / 1e6:.2f}M"
    return str(n)


def main():
    print(f"{'combination':<14}{'mode':<9}{'params':>10}{'macs @256':>12}")
    for name in ("I", "II", "III"):
        model = build(name, series_n=1, num_classes=1, seed=0)
        deployed, _ = to_deploy(model)
        for mode, m in (("train", model), ("deploy", deployed)):
            p, _ = count_params(m)
            f, _ = count_flops(m, 256, 256)
            print(f"{name:<14}{mode:<9}{human(p):>10}{human(f):>12}")

    print("\ncombination II breakdown (train mode, 256x256):")
    model = build("II", series_n=1, num_classes=1, seed=0)
    params_total, params = count_params(model)
    flops_total, flops = count_flops(model, 256, 256)
    print(f"  {'module':<10}{'params':>10}{'macs':>14}")
    for key in params:
        print(f"  {key:<10}{params[key]:>10}{flops[key]:>14}")
    print(f"  {'total':<10}{params_total:>10}{flops_total:>14}")


if __name__ == "__main__":
    main()
