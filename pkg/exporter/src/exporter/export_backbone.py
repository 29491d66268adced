"""Export the reference backbone prefix as an LVWT container.

    python3 -m exporter.export_backbone --out backbone.lvw [--seed 0]

The container holds every tensor of the initial conv through block r14
under the engine's naming convention, including a per-layer bn.eps
entry. Re-running with the same seed reproduces the file byte for byte.
"""

import argparse
from pathlib import Path

from .container import write_lvwt
from .reference import backbone_entries, build_reference


def export(out_path, seed=0):
    model = build_reference(seed)
    entries = backbone_entries(model)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_lvwt(entries, out_path)
    return entries


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    entries = export(args.out, args.seed)
    total = sum(a.size for _, a in entries)
    print(f"wrote {args.out}: {len(entries)} tensors, {total} values, seed {args.seed}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
