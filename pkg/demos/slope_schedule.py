"""Compare the two slope schedules used to anneal the fusible blocks.

The leaky-ReLU between each block's two convolutions starts as a plain
ReLU (slope 0) and must end as the identity (slope 1) for the deploy-time
fold to be exact. This prints both schedules side by side with a crude
bar chart. Run:

    python3 demos/slope_schedule.py [epochs]
"""

import sys

from lvunet import ScheduleSpec, slope


def main():
    total = int(sys.argv[1]) if len(sys.argv) > 1 else 40
    cosine = ScheduleSpec("cosine", total)
    linear = ScheduleSpec("linear", total)
    step = max(1, total // 20)
    print(f"{'epoch':>6} {'cosine':>8} {'linear':>8}  cosine ramp")
    epochs = list(range(0, total, step)) + [total]
    for e in epochs:
        c = slope(cosine, e)
        l = slope(linear, e)
        bar = "#" * round(40 * c)
        print(f"{e:>6} {c:>8.4f} {l:>8.4f}  {bar}")
    print("\nThe cosine ramp stays below the linear one, spending more epochs "
          "near ReLU before committing to the identity.")


if __name__ == "__main__":
    main()
