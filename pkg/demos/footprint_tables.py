"""Storage accounting for the built-in model/budget presets.

Prints the parameter-table and byte-table presets grouped by backbone, so the
headline numbers (dense adapter vs seeded sparse coefficients) are easy to
compare at a glance.
"""

from solar import PRESETS, preset_report


def run() -> None:
    params = [(n, preset_report(n)) for n in PRESETS
              if preset_report(n).param_count is not None]
    bytes_ = [(n, preset_report(n)) for n in PRESETS
              if preset_report(n).byte_count is not None]

    print("parameter accounting")
    print(f"{'preset':<28}{'params':>10}")
    for name, report in params:
        print(f"{name:<28}{report.param_count:>10}")

    print("\nbyte accounting")
    print(f"{'preset':<28}{'bytes':>10}")
    for name, report in bytes_:
        print(f"{name:<28}{report.byte_count:>10}")


if __name__ == "__main__":
    run()
