"""Independent trainable-parameter enumeration for both model variants.

Walks the layer stack shape by shape (no closed form), checks every count
against the reference thousands, and, given the path of the slcnn binary,
checks that `slcnn params --table` reports the same exact integers.
"""
import json
import subprocess
import sys

T_S, D, K = 46, 100, 128

# dataset -> (T_d, classes, reference thousands: slcnn small, slcnn large,
# slcnn+v small, slcnn+v large)
REFERENCE = {
    "AG": (4, 4, (783, 1835, 653, 1508)),
    "DBPedia": (6, 14, (920, 2107, 723, 1649)),
    "Yelp.P": (20, 2, (1831, 3930, 1176, 2554)),
    "Yelp.F": (20, 5, (1832, 3933, 1177, 2557)),
    "Amazon.P": (10, 2, (1176, 2619, 848, 1899)),
    "Amazon.F": (10, 5, (1177, 2622, 850, 1902)),
}


def enumerate_layers(t_d, classes, fc, vertical):
    rows, width, depth = t_d, T_S, D
    layers = []

    def conv(h, w):
        nonlocal rows, width, depth
        layers.append(("conv", K * h * w * depth + K))
        rows, width, depth = rows - h + 1, width - w + 1, K

    for _ in range(4):
        conv(1, 2)
        conv(1, 2)
        width //= 2
    assert width == 1, width
    if vertical:
        conv(2, 1)
        conv(2, 1)
        rows //= 2
    flat = rows * width * depth
    for n_in, n_out in ((flat, fc), (fc, fc), (fc, classes)):
        layers.append(("dense", n_in * n_out + n_out))
    return layers


def main():
    exact = {}
    failures = 0
    for name, (t_d, classes, reference) in REFERENCE.items():
        for i, (vertical, fc) in enumerate(((False, 512), (False, 1024), (True, 512), (True, 1024))):
            n = sum(c for _, c in enumerate_layers(t_d, classes, fc, vertical))
            exact[(name, "slcnn+v" if vertical else "slcnn", "small" if fc == 512 else "large")] = n
            if round(n / 1000) != reference[i]:
                print(f"FAIL {name} vertical={vertical} fc={fc}: {n} vs {reference[i]}k")
                failures += 1
    print(f"oracle: {len(exact) - failures}/{len(exact)} counts match the reference thousands")

    if len(sys.argv) > 1:
        out = subprocess.run([sys.argv[1], "params", "--table"], check=True, capture_output=True, text=True).stdout
        rows = json.loads(out)["rows"]
        assert len(rows) == len(exact), len(rows)
        for r in rows:
            want = exact[(r["dataset"], r["variant"], r["fc"])]
            if r["parameters"] != want:
                print(f"FAIL slcnn params {r['dataset']} {r['variant']} {r['fc']}: {r['parameters']} vs {want}")
                failures += 1
        print(f"binary: {len(rows)} rows compared")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
