"""Command-line front end: design construction and certification, RB runs,
channel metrics, and standalone curve fitting.

Every command is a pure function of (arguments, config files, seed): reruns
write byte-identical artifacts except for the manifest's wall-clock field.
Each output file embeds the digest of the run manifest that produced it.

Exit codes: 0 success or verified pass, 1 verified fail, 2 usage or parse
error, 3 construction failure, 4 fit flags under --strict.

Only the standard library is imported at module level so that --threads can
pin the numeric backend's thread pools before numpy is first loaded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

from . import __version__

_THREAD_ENV = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_CONSTRUCTION = 3
EXIT_STRICT_FIT = 4


@dataclass
class RunManifest:
    """Provenance record for one CLI invocation.

    The digest covers everything except the wall clock, so identical
    reruns produce identical digests (and identical artifacts).
    """

    command_line: list
    config_digest: str
    master_seed: int | None
    version: str
    wall_clock: str
    outputs: list = field(default_factory=list)

    def digest(self) -> str:
        doc = {
            "command_line": self.command_line,
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "version": self.version,
            "outputs": sorted(self.outputs),
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_json_dict(self) -> dict:
        return {
            "command_line": self.command_line,
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "version": self.version,
            "wall_clock": self.wall_clock,
            "outputs": sorted(self.outputs),
            "digest": self.digest(),
        }

    def write(self, path: str) -> None:
        _write_json(path, self.to_json_dict())


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _sha256_args(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _manifest(argv, config_digest, seed, outputs) -> RunManifest:
    return RunManifest(
        command_line=list(argv),
        config_digest=config_digest,
        master_seed=seed,
        version=__version__,
        wall_clock=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        outputs=list(outputs),
    )


def _load_design_arg(design_doc):
    """Design from a config entry: {"file": path} or {"type": ..., ...}."""
    from . import designs

    if "file" in design_doc:
        return designs.load_design(design_doc["file"])
    kind = design_doc["type"]
    if kind == "w1":
        return designs.w1(int(design_doc["t"]))
    if kind == "qudit":
        return designs.build_qudit_design(int(design_doc["d"]), int(design_doc["t"]),
                                          cap=int(design_doc.get("cap", 10 ** 7)))
    if kind == "icosahedral":
        return designs.icosahedral_group()
    if kind == "clifford":
        return designs.clifford_group(int(design_doc.get("q", 1)))
    if kind == "interleaved-4design":
        return designs.interleaved_clifford_design()
    if kind == "qubit-circuit":
        desc = designs.build_qubit_circuit_descriptor(
            int(design_doc["n"]), int(design_doc["t"]),
            angle_tables=design_doc.get("angle_tables"))
        return desc.to_ensemble()
    raise ValueError("unknown design type %r" % kind)


def cmd_design_build(args, argv) -> int:
    from . import designs

    design_doc = {"type": args.type, "t": args.t, "d": args.d, "q": args.q,
                "n": args.n, "cap": args.cap}
    if args.angles:
        with open(args.angles) as fh:
            raw = json.load(fh)
        tables = {}
        for k, v in raw.items():
            n_val, part = json.loads(k) if isinstance(k, str) else k
            tables[(int(n_val), tuple(part))] = v
        design_doc["angle_tables"] = tables
    try:
        clean = {k: v for k, v in design_doc.items() if v is not None}
        ensemble = _load_design_arg(clean)
    except (ValueError, KeyError, TypeError) as exc:
        print("construction failed: %s" % exc, file=sys.stderr)
        return EXIT_CONSTRUCTION
    designs.save_design(ensemble, args.out)
    man = _manifest(argv, _sha256_args({k: str(v) for k, v in design_doc.items()}),
                    None, [args.out])
    with open(args.out) as fh:
        doc = json.load(fh)
    doc["manifest_digest"] = man.digest()
    with open(args.out, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
    man.write(args.out + ".manifest.json")
    print("wrote %s (%d elements)" % (args.out, ensemble.size))
    return EXIT_PASS


def cmd_design_verify(args, argv) -> int:
    from . import designs

    try:
        ensemble = designs.load_design(args.design)
    except (OSError, ValueError, KeyError) as exc:
        print("cannot load design: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    report = designs.verify_strong_design(
        ensemble, args.t, tol=args.tol, mc_samples=args.mc_samples,
        strong=args.strong, seed=args.seed)
    man = _manifest(argv, _sha256_file(args.design), args.seed, [args.out])
    doc = report.to_json_dict()
    doc["manifest_digest"] = man.digest()
    _write_json(args.out, doc)
    man.write(args.out + ".manifest.json")
    print("design %s at t=%d: %s (worst residual %.3g)"
          % (args.design, args.t, "PASS" if report.passed else "FAIL",
             max(report.residuals.values())))
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_design_sample(args, argv) -> int:
    import numpy as np

    from . import designs

    try:
        ensemble = designs.load_design(args.design)
    except (OSError, ValueError, KeyError) as exc:
        print("cannot load design: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    us = ensemble.sample(rng, args.n)
    man = _manifest(argv, _sha256_file(args.design), args.seed, [args.out])
    doc = {
        "d": ensemble.d,
        "n": args.n,
        "seed": args.seed,
        "unitaries": [designs._matrix_to_json(u) for u in us],
        "manifest_digest": man.digest(),
    }
    _write_json(args.out, doc)
    man.write(args.out + ".manifest.json")
    print("wrote %d samples to %s" % (args.n, args.out))
    return EXIT_PASS


def _named_or_matrix(doc, q):
    import numpy as np

    from . import paulis

    if isinstance(doc, str):
        return paulis.named_operator(doc)
    return np.array([[complex(c[0], c[1]) for c in row] for row in doc])


def _estimates_json(est) -> dict:
    return {
        "f": est.f, "F": est.F, "u": est.u, "h": est.h, "H": est.H,
        "stderr": est.stderr,
        "rates": est.rates,
        "rate_stderr": est.rate_stderr,
        "flags": list(est.flags),
        "alpha_norm_sq": est.alpha_norm_sq,
    }


def _write_curve(curve, path, digest) -> None:
    curve.to_csv(path)
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        fh.write("# manifest: %s\n" % digest)
        fh.write(body)


def cmd_rb(args, argv) -> int:
    from . import channels, irreps, paulis, rb

    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        pipeline = cfg["pipeline"]
        if pipeline not in ("1q", "2q"):
            raise ValueError("pipeline must be '1q' or '2q'")
        noise = channels.noise_from_config(cfg["noise"])
        m_list = [int(m) for m in cfg["sequence_lengths"]]
        seed = int(cfg.get("seed", 0))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print("bad rb config: %s" % exc, file=sys.stderr)
        return EXIT_USAGE

    os.makedirs(args.out_dir, exist_ok=True)
    q = 1 if pipeline == "1q" else 2
    settings_1q = [("v1", 1, "Z", "P0"), ("v2", 2, "Z", "P0")]
    settings_2q = [("v1", 1, "ZZ", "P00"), ("v2_zz_p00", 2, "ZZ", "P00"),
                   ("v2_zz_zz", 2, "ZZ", "ZZ"), ("v2_rm_rm", 2, "rho_minus", "rho_minus")]
    settings = settings_1q if q == 1 else settings_2q

    outputs = [os.path.join(args.out_dir, name + ".csv") for name, *_ in settings]
    outputs += [os.path.join(args.out_dir, "metrics.json")]
    man = _manifest(argv, _sha256_file(args.config), seed, outputs)
    digest = man.digest()

    curves = {}
    if args.mode == "exact":
        pset = irreps.projector_set(q)
        for name, t_order, ini, meas in settings:
            o_ini = paulis.named_operator(ini)
            o_meas = paulis.named_operator(meas)
            if t_order == 1:
                curves[name] = rb.v1_exact(noise, o_ini, o_meas, m_list)
            else:
                curves[name] = rb.v2_exact(noise, o_ini, o_meas, m_list, pset,
                                           noisy_inverse=False)
    else:
        try:
            design = _load_design_arg(cfg.get(
                "design", {"type": "icosahedral" if q == 1 else "clifford", "q": 2}))
            spam = None
            if cfg.get("spam"):
                em = cfg["spam"].get("eta_meas", 0.0)
                spam = rb.SPAMModel(eta_prep=cfg["spam"].get("eta_prep", 0.0),
                                    eta_meas=tuple(em) if isinstance(em, list) else em)
            for name, t_order, ini, meas in settings:
                rcfg = rb.RBConfig(
                    design=design, noise=noise, t_order=t_order,
                    sequence_lengths=tuple(m_list),
                    n_sequences=int(cfg["n_sequences"]),
                    n_shots=int(cfg.get("n_shots", 0)),
                    seed=seed + sum(name.encode()),
                    o_ini=paulis.named_operator(ini),
                    o_meas=paulis.named_operator(meas), spam=spam)
                curves[name] = rb.v_t_monte_carlo(rcfg)
        except (ValueError, KeyError) as exc:
            print("bad rb config: %s" % exc, file=sys.stderr)
            return EXIT_USAGE

    for (name, *_), path in zip(settings, outputs):
        _write_curve(curves[name], path, digest)

    try:
        if q == 1:
            est = rb.estimate_metrics_1q(curves["v1"], curves["v2"],
                                         alpha_norm_sq=cfg.get("alpha_norm_sq"))
        else:
            table = {"zz_p00": curves["v2_zz_p00"], "zz_zz": curves["v2_zz_zz"],
                     "rm_rm": curves["v2_rm_rm"], "v1": curves["v1"]}
            est = rb.estimate_metrics_2q(table, u_external=cfg.get("u_external"),
                                         alpha_norm_sq=cfg.get("alpha_norm_sq"))
    except ValueError as exc:
        print("estimation failed: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    doc = _estimates_json(est)
    doc["manifest_digest"] = digest
    _write_json(os.path.join(args.out_dir, "metrics.json"), doc)
    man.write(os.path.join(args.out_dir, "manifest.json"))
    print("wrote %d curves and metrics to %s" % (len(curves), args.out_dir))

    bad = [f for f in est.flags if f in ("non_converged", "ill_conditioned")]
    if args.strict and bad:
        print("strict mode: fit flags %s" % bad, file=sys.stderr)
        return EXIT_STRICT_FIT
    return EXIT_PASS


def cmd_metrics(args, argv) -> int:
    from . import channels

    try:
        noise = channels.load_noise_config(args.noise)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print("bad noise config: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    m = channels.metrics(noise)
    man = _manifest(argv, _sha256_file(args.noise), None, [args.out])
    doc = m.to_json_dict()
    doc["manifest_digest"] = man.digest()
    _write_json(args.out, doc)
    man.write(args.out + ".manifest.json")
    print("F=%.6f u=%.6f H=%.6f |alpha|^2=%.3g" % (m.F, m.u, m.H, m.alpha_norm_sq))
    return EXIT_PASS


def cmd_fit(args, argv) -> int:
    import numpy as np

    from . import rb

    try:
        curve = rb.DecayCurve.from_csv(args.curve)
        known = [float(x) for x in args.known.split(",")] if args.known else None
        fit = rb.fit_exponentials(curve, args.terms, known_rates=known)
    except (OSError, ValueError) as exc:
        print("fit failed: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    man = _manifest(argv, _sha256_file(args.curve), None, [args.out])
    doc = {
        "amplitudes": list(fit.amplitudes),
        "rates": list(fit.rates),
        "residual_norm": fit.residual_norm,
        "covariance": np.asarray(fit.covariance).tolist(),
        "flags": list(fit.flags),
        "n_evaluations": fit.n_evaluations,
        "manifest_digest": man.digest(),
    }
    _write_json(args.out, doc)
    man.write(args.out + ".manifest.json")
    print("rates:", " ".join("%.6f" % r for r in fit.rates), "flags:", list(fit.flags))
    if args.strict and fit.flags:
        return EXIT_STRICT_FIT
    return EXIT_PASS


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="exactrb",
        description="Exact unitary designs and higher-order randomized benchmarking.")
    p.add_argument("--threads", type=int, default=None,
                   help="thread count for the numeric backend (default: all cores, "
                        "or EXACTRB_THREADS); results do not depend on it")
    sub = p.add_subparsers(dest="cmd", required=True)

    pd = sub.add_parser("design", help="build, verify, or sample unitary designs")
    dsub = pd.add_subparsers(dest="subcmd", required=True)

    pb = dsub.add_parser("build", help="construct a design and write it as JSON")
    pb.add_argument("--type", required=True,
                    choices=["w1", "qudit", "icosahedral", "clifford",
                             "interleaved-4design", "qubit-circuit"])
    pb.add_argument("--t", type=int, default=None)
    pb.add_argument("--d", type=int, default=None)
    pb.add_argument("--q", type=int, default=None)
    pb.add_argument("--n", type=int, default=None)
    pb.add_argument("--cap", type=int, default=None)
    pb.add_argument("--angles", default=None,
                    help="JSON file of rotation-angle tables for qubit-circuit")
    pb.add_argument("--out", required=True)

    pv = dsub.add_parser("verify", help="certify a design file at order t")
    pv.add_argument("--design", required=True)
    pv.add_argument("--t", type=int, required=True)
    pv.add_argument("--strong", action="store_true",
                    help="check all mixed moments r,s <= t, not only r = s")
    pv.add_argument("--tol", type=float, default=1e-10)
    pv.add_argument("--mc-samples", type=int, default=None,
                    help="sample count for layered designs (default: exact)")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--out", default="design_report.json")

    ps = dsub.add_parser("sample", help="draw unitaries from a design file")
    ps.add_argument("--design", required=True)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)

    pr = sub.add_parser("rb", help="run the RB pipeline from a JSON config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--mode", choices=["exact", "mc"], required=True,
                    help="exact theoretical curves or Monte Carlo simulation")
    pr.add_argument("--out-dir", required=True)
    pr.add_argument("--strict", action="store_true",
                    help="exit 4 if any fit is flagged")

    pm = sub.add_parser("metrics", help="channel metrics from a noise config")
    pm.add_argument("--noise", required=True)
    pm.add_argument("--out", default="metrics.json")

    pf = sub.add_parser("fit", help="fit exponential decays to an external CSV")
    pf.add_argument("--curve", required=True)
    pf.add_argument("--terms", type=int, required=True)
    pf.add_argument("--known", default=None,
                    help="comma-separated rates to pin")
    pf.add_argument("--strict", action="store_true")
    pf.add_argument("--out", default="fit.json")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        threads = args.threads
        if threads is None and os.environ.get("EXACTRB_THREADS"):
            try:
                threads = int(os.environ["EXACTRB_THREADS"])
            except ValueError:
                parser.error("EXACTRB_THREADS must be an integer")
        if threads is not None:
            if threads < 1:
                parser.error("--threads must be positive")
            for var in _THREAD_ENV:
                os.environ[var] = str(threads)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    if args.cmd == "design":
        handler = {"build": cmd_design_build, "verify": cmd_design_verify,
                   "sample": cmd_design_sample}[args.subcmd]
        return handler(args, argv)
    if args.cmd == "rb":
        return cmd_rb(args, argv)
    if args.cmd == "metrics":
        return cmd_metrics(args, argv)
    return cmd_fit(args, argv)


if __name__ == "__main__":
    sys.exit(main())
