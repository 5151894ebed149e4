"""Walk through the network weight interchange format.

Weights travel between the trainer and the filter as a single JSON
document: architecture metadata, input normalization statistics, and
flat row-major tensors. This demo loads the test fixture, prints what
the inference engine sees, and evaluates the network on a synthetic
input window, showing that the last-frame output depends on the whole
receptive field but on nothing in the future.

Run:  python3 demos/03_weight_interchange.py
"""

import numpy as np

from imo import tcn


def main():
    model = tcn.load_weights("fixtures/tcn_fixture.json")
    for key, value in tcn.describe(model).items():
        print(f"{key:>16}: {value}")

    rng = np.random.default_rng(0)
    x = rng.normal(0.0, 1.0, (model.input_channels, model.window))
    y = tcn.forward(model, x)
    print(f"\ndisplacement prediction for a random window: {y}")

    # With kernel 3 and dilations (8, 16) every tap offset is a
    # multiple of 8, so the last frame sees only samples congruent to
    # it mod 8 -- a comb over the window, not a dense span.
    for k in (0, 1):
        x_k = x.copy()
        x_k[:, k] += 1.0
        moved = np.linalg.norm(tcn.forward(model, x_k) - y)
        print(f"perturbing sample {k} (offset {model.window - 1 - k} "
              f"from the head) moves the output by {moved:.3e}")

    # ... and a shorter history evaluated on its own matches the
    # prefix of the full evaluation (no information flows backwards).
    half = model.window // 2
    x_pad = np.concatenate([np.zeros((model.input_channels, half)),
                            x[:, :half]], axis=1)
    y_pad = tcn.forward(model, x_pad)
    print("zero-padded prefix evaluates independently of the future: "
          f"{y_pad}")


if __name__ == "__main__":
    main()
