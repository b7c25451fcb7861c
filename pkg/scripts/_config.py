"""Turn a dataclass of experiment settings into command-line flags."""

import argparse
import dataclasses


def parse_config(cls, description=None):
    ap = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        ap.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    return cls(**vars(ap.parse_args()))
