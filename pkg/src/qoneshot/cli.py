"""Command line front end.

Exit codes: 0 success, 1 selftest failure, 2 input validation error,
3 numerical computation failure. Results are emitted as canonical JSON
(stable bytes for identical runs); `--timing` adds wall-clock time to the
manifest at the cost of that stability. `--format csv` flattens the report
into `key,value` rows with the manifest on a leading comment line.

States referenced by --rho/--sigma live in their own JSON files shaped like
the embedded config entries: {"density": {...}} or {"pure": {...}}.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

from . import __version__
from .errors import BadParam, ComputeError, ValidationError
from .linalg import max_dim_limit
from .states import density_from_json, pure_from_json
from .channels import channel_from_json
from .divergences import (
    d_max,
    hypothesis_testing_divergence,
    hypothesis_testing_from_error,
    i_max,
    info_spectrum_detailed,
    relative_entropy,
    relative_entropy_variance,
    second_order_estimate,
)
from .smoothing import restricted_smooth_pipeline, smooth_dmax_upper
from .protocols import (
    BroadcastConfig,
    GPConfig,
    P2PConfig,
    SubsetCodeConfig,
    simulate_broadcast,
    simulate_gelfand_pinsker,
    simulate_iid_subset,
    simulate_p2p,
)
from .serialize import RunManifest, dumps_canonical
from .selftest import run_selftest

_DIVERGENCE_KINDS = (
    "rel-entropy",
    "dmax",
    "dh",
    "ds",
    "imax",
    "second-order",
    "smooth-upper",
    "restricted-pipeline",
)
_PROTOCOLS = ("p2p", "gp", "broadcast", "iid")


def _state(obj, what="state"):
    if isinstance(obj, dict) and "density" in obj:
        return density_from_json(obj["density"])
    if isinstance(obj, dict) and "pure" in obj:
        return pure_from_json(obj["pure"]).density()
    raise BadParam(f"{what} must be an object with a 'density' or 'pure' entry")


def _pure(obj, what="state"):
    if isinstance(obj, dict) and "pure" in obj:
        return pure_from_json(obj["pure"])
    raise BadParam(f"{what} must be an object with a 'pure' entry")


def _pure_or_density(obj, what="state"):
    if isinstance(obj, dict) and "pure" in obj:
        return pure_from_json(obj["pure"])
    if isinstance(obj, dict) and "density" in obj:
        return density_from_json(obj["density"])
    raise BadParam(f"{what} must be an object with a 'pure' or 'density' entry")


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _ht_record(r):
    return {
        "alpha": r.alpha,
        "alpha_min": r.alpha_min,
        "beta": r.beta,
        "value_bits": r.value_bits,
        "dual_value_bits": r.dual_value_bits,
        "dual_t": r.dual_t,
        "gap": r.gap,
        "gap_relative": r.gap_relative,
        "route": r.route,
    }


def _cert_record(cert):
    return {
        "epsilon": cert.epsilon,
        "achieved_distance": cert.achieved_distance,
        "distance_bound": cert.distance_bound,
        "dmax_bound_bits": cert.dmax_bound_bits,
        "dmax_actual_bits": cert.dmax_actual_bits,
        "inflation_a": cert.inflation_a,
        "inflation_b": cert.inflation_b,
        "reference": cert.reference,
        "state_dim": cert.state.dim,
        "state": {"density": cert.state.to_json()},
        "details": cert.details,
    }


def _run_divergence(kind, cfg, tolerance=None):
    if kind == "rel-entropy":
        rho, sigma = _state(cfg["rho"], "rho"), _state(cfg["sigma"], "sigma")
        return {
            "relative_entropy_bits": relative_entropy(rho, sigma),
            "variance_bits2": relative_entropy_variance(rho, sigma),
        }
    if kind == "dmax":
        rho, sigma = _state(cfg["rho"], "rho"), _state(cfg["sigma"], "sigma")
        return {"dmax_bits": d_max(rho, sigma)}
    if kind == "dh":
        rho, sigma = _state(cfg["rho"], "rho"), _state(cfg["sigma"], "sigma")
        if "alpha_min" in cfg:
            r = hypothesis_testing_divergence(rho, sigma, float(cfg["alpha_min"]))
        else:
            r = hypothesis_testing_from_error(
                rho, sigma, float(cfg["epsilon"]), cfg.get("convention", "squared")
            )
        if tolerance is not None and r.gap_relative > tolerance:
            raise ComputeError(
                f"duality gap {r.gap_relative:.3e} exceeds --tolerance {tolerance:.3e}"
            )
        return _ht_record(r)
    if kind == "ds":
        rho, sigma = _state(cfg["rho"], "rho"), _state(cfg["sigma"], "sigma")
        r = info_spectrum_detailed(
            rho, sigma, float(cfg["epsilon"]), cfg.get("variant", "standard")
        )
        return {
            "value_bits": r.value_bits,
            "monotone": r.monotone,
            "route": r.route,
            "variant": r.variant,
        }
    if kind == "imax":
        rho = _state(cfg["rho"], "rho")
        return {"imax_bits": i_max(rho, list(cfg["left"]))}
    if kind == "second-order":
        rho, sigma = _state(cfg["rho"], "rho"), _state(cfg["sigma"], "sigma")
        return {
            "estimate_bits": second_order_estimate(
                rho, sigma, int(cfg["n"]), float(cfg["epsilon"])
            ),
            "relative_entropy_bits": relative_entropy(rho, sigma),
            "variance_bits2": relative_entropy_variance(rho, sigma),
        }
    if kind == "smooth-upper":
        rho = _state(cfg["rho"], "rho")
        sigma_a = _state(cfg["sigma_a"], "sigma_a")
        cert = smooth_dmax_upper(rho, sigma_a, list(cfg["left"]), float(cfg["epsilon"]))
        return _cert_record(cert)
    if kind == "restricted-pipeline":
        rho = _state(cfg["rho"], "rho")
        cert = restricted_smooth_pipeline(
            rho, list(cfg["left"]), int(cfg["n"]), float(cfg["epsilon"])
        )
        return _cert_record(cert)
    raise BadParam(f"unknown divergence kind {kind!r}")


def _run_simulate(protocol, cfg, seed_flag):
    if protocol == "p2p":
        c = P2PConfig(
            channel=channel_from_json(cfg["channel"]),
            psi=_pure(cfg["psi"], "psi"),
            rate_bits=int(cfg["rate_bits"]),
            epsilon=float(cfg["epsilon"]),
            delta=float(cfg["delta"]) if "delta" in cfg else None,
        )
        return simulate_p2p(c)
    if protocol == "iid":
        seed = seed_flag if seed_flag is not None else int(cfg.get("seed", 0))
        c = SubsetCodeConfig(
            channel=channel_from_json(cfg["channel"]),
            psi=_pure(cfg["psi"], "psi"),
            n=int(cfg["n"]),
            w=int(cfg["w"]),
            rate_bits=float(cfg["rate_bits"]),
            epsilon=float(cfg["epsilon"]),
            samples=int(cfg.get("samples", 200)),
            seed=seed,
        )
        return simulate_iid_subset(c)
    if protocol == "gp":
        c = GPConfig(
            channel=channel_from_json(cfg["channel"]),
            psi=_pure_or_density(cfg["psi"], "psi"),
            phi=_pure(cfg["phi"], "phi"),
            rate_bits=int(cfg["rate_bits"]),
            band_bits=int(cfg["band_bits"]),
            epsilon=float(cfg["epsilon"]),
            delta=float(cfg["delta"]),
            state_label=cfg.get("state_label", "S"),
        )
        return simulate_gelfand_pinsker(c)
    if protocol == "broadcast":
        c = BroadcastConfig(
            channel=channel_from_json(cfg["channel"]),
            psi=_pure_or_density(cfg["psi"], "psi"),
            b_labels=tuple(cfg["b_labels"]),
            c_labels=tuple(cfg["c_labels"]),
            a1_label=cfg["a1_label"],
            a2_label=cfg["a2_label"],
            rate1_bits=int(cfg["rate1_bits"]),
            rate2_bits=int(cfg["rate2_bits"]),
            band1_bits=int(cfg["band1_bits"]),
            band2_bits=int(cfg["band2_bits"]),
            epsilon=float(cfg["epsilon"]),
            delta=float(cfg["delta"]),
            k_bits=float(cfg["k_bits"]) if "k_bits" in cfg else None,
        )
        return simulate_broadcast(c)
    raise BadParam(f"unknown protocol {protocol!r}")


def _sweep_rows(cfg, seed_flag):
    protocol = cfg.get("protocol")
    if protocol not in _PROTOCOLS:
        raise BadParam(f"sweep protocol must be one of {_PROTOCOLS}")
    base = cfg.get("base")
    param = cfg.get("param")
    values = cfg.get("values")
    if not isinstance(base, dict) or not param or not isinstance(values, list):
        raise BadParam("sweep config needs 'base' (object), 'param', 'values' (list)")
    rows = []
    for v in values:
        point = dict(base)
        point[param] = v
        rep = _run_simulate(protocol, point, seed_flag)
        rows.append((v, rep.max_error, rep.theory_bound, rep.bound_applicable))
    return rows


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k in sorted(obj, key=str):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, dumps_canonical(obj)))


def _render(doc, manifest, fmt):
    """Canonical JSON, or key,value CSV with the manifest on a comment line."""
    payload = dict(doc)
    if fmt == "json":
        payload["manifest"] = manifest.to_json()
        return dumps_canonical(payload)
    if fmt == "csv":
        rows = []
        _flatten("", payload, rows)
        lines = ["# manifest: " + dumps_canonical(manifest.to_json()), "key,value"]
        lines.extend(f"{k},{v}" for k, v in rows)
        return "\n".join(lines) + "\n"
    raise BadParam(f"unknown format {fmt!r}")


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="ascii") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def _add_common(p, timing=True):
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="report format (default json)")
    p.add_argument("--max-dim", type=int,
                   help="override the dense-operation dimension guard for this run")
    p.add_argument("--tolerance", type=float,
                   help="fail (exit 3) if a reported duality gap exceeds this; recorded in the manifest")
    if timing:
        p.add_argument("--timing", action="store_true", help="record wall-clock time")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qoneshot",
        description="One-shot quantum information quantities and coded-transmission simulations.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    d = sub.add_parser("divergence", help="evaluate a divergence or certificate")
    d.add_argument("kind", choices=_DIVERGENCE_KINDS)
    d.add_argument("--config", help="JSON input file (optional when flags cover the inputs)")
    d.add_argument("--rho", help="JSON file holding the first state")
    d.add_argument("--sigma", help="JSON file holding the second state")
    d.add_argument("--alpha-min", type=float, help="type-I success floor for dh")
    d.add_argument("--epsilon", type=float, help="error parameter (overrides the config)")
    d.add_argument("--delta", type=float, help="slack parameter (overrides the config)")
    _add_common(d)

    s = sub.add_parser("simulate", help="run a protocol simulation")
    s.add_argument("protocol", choices=_PROTOCOLS)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override the config seed (iid protocol)")
    s.add_argument("--epsilon", type=float, help="override the config epsilon")
    s.add_argument("--delta", type=float, help="override the config delta")
    _add_common(s)

    w = sub.add_parser("sweep", help="sweep one parameter; emit CSV rows")
    w.add_argument("--config", required=True)
    w.add_argument("--seed", type=int)
    _add_common(w, timing=False)
    w.set_defaults(format="csv")

    sub.add_parser("selftest", help="run built-in closed-form checks")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        if args.cmd == "selftest":
            results = run_selftest()
            for name, err in results:
                if err is None:
                    print(f"ok   {name}")
                else:
                    print(f"FAIL {name}: {err}")
            failed = sum(1 for _, err in results if err is not None)
            print(f"{len(results) - failed}/{len(results)} checks passed")
            return 1 if failed else 0

        if getattr(args, "max_dim", None) is not None:
            if args.max_dim < 1:
                raise BadParam(f"--max-dim must be positive, got {args.max_dim}")
            os.environ["QONESHOT_MAX_DIM"] = str(args.max_dim)

        def manifest(command, seed=None):
            return RunManifest(
                command=command,
                version=__version__,
                max_dim=max_dim_limit(),
                seed=seed,
                config_path=args.config,
                wall_clock_ms=(time.perf_counter() - started) * 1000.0
                if getattr(args, "timing", False)
                else None,
                format=args.format,
                out_path=args.out,
                tolerance=args.tolerance,
            )

        if args.cmd == "divergence":
            cfg = _load_json(args.config) if args.config else {}
            if args.rho:
                cfg["rho"] = _load_json(args.rho)
            if args.sigma:
                cfg["sigma"] = _load_json(args.sigma)
            if args.alpha_min is not None:
                cfg["alpha_min"] = args.alpha_min
            if args.epsilon is not None:
                cfg["epsilon"] = args.epsilon
            if args.delta is not None:
                cfg["delta"] = args.delta
            result = _run_divergence(args.kind, cfg, tolerance=args.tolerance)
            _emit(_render({"result": result}, manifest(f"divergence {args.kind}"), args.format),
                  args.out)
            return 0
        if args.cmd == "simulate":
            cfg = _load_json(args.config)
            if args.epsilon is not None:
                cfg["epsilon"] = args.epsilon
            if args.delta is not None:
                cfg["delta"] = args.delta
            rep = _run_simulate(args.protocol, cfg, args.seed)
            _emit(
                _render({"report": asdict(rep)},
                        manifest(f"simulate {args.protocol}", seed=args.seed), args.format),
                args.out,
            )
            return 0
        if args.cmd == "sweep":
            cfg = _load_json(args.config)
            rows = _sweep_rows(cfg, args.seed)
            man = manifest("sweep", seed=args.seed)
            if args.format == "json":
                doc = {"rows": [
                    {"param": v, "max_error": e, "theory_bound": t, "applicable": a}
                    for v, e, t, a in rows
                ]}
                _emit(_render(doc, man, "json"), args.out)
            else:
                lines = ["# manifest: " + dumps_canonical(man.to_json())]
                lines.append("param,max_error,theory_bound,applicable")
                lines.extend(
                    "%s,%.17g,%.17g,%s" % (v, e, t, "true" if a else "false")
                    for v, e, t, a in rows
                )
                _emit("\n".join(lines) + "\n", args.out)
            return 0
        raise BadParam(f"unknown command {args.cmd!r}")
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except ComputeError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"validation error: bad config ({exc})", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
