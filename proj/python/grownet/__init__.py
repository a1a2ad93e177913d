"""Growing residual networks guided by the topological derivative."""

import json

from ._grownet import (
    Activation,
    Dataset,
    IoError,
    Network,
    NetworkSpec,
    NumericError,
    RbfChain,
    TrainConfig,
    gen_gaussian_regression,
    gen_rbf_dataset,
    grow,
    grow_rbf,
    load_csv,
    make_admissible,
    max_gradient_error,
    rbf_scan_json,
    save_csv,
    scan_json,
    transfer_rank,
)
from ._grownet import cli as _cli


def scan(net, data, m=1, eps_s=None):
    """Topological-derivative report of every interface as a dict."""
    return json.loads(scan_json(net, data, m, eps_s))


def rbf_scan(chain, data):
    return json.loads(rbf_scan_json(chain, data))


def events(result):
    """Growth events of a grow() result as a list of dicts."""
    return [json.loads(line) for line in result["events_jsonl"].splitlines() if line]


def run_cli(*args):
    """Runs the command-line front end in-process; returns its exit code."""
    return _cli([str(a) for a in args])


__all__ = [
    "Activation",
    "Dataset",
    "IoError",
    "Network",
    "NetworkSpec",
    "NumericError",
    "RbfChain",
    "TrainConfig",
    "events",
    "gen_gaussian_regression",
    "gen_rbf_dataset",
    "grow",
    "grow_rbf",
    "load_csv",
    "make_admissible",
    "max_gradient_error",
    "rbf_scan",
    "run_cli",
    "save_csv",
    "scan",
    "transfer_rank",
]
