"""Command-line entry point: ``gravvortex <command> ...``.

Exit codes: 0 success, 2 rejected input or configuration, 3 numerical
non-convergence or failed verification.  Output files go to ``--out``;
the ``GRAVVORTEX_OUTDIR`` environment variable sets its default.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io, plotting, profile
from .config import SolverConfig
from .coupled import check_inputs, continue_path, initial_state, residual_norms
from .divisor import antipodal, classify, equatorial, is_admissible
from .errors import ArgumentError, ConfigurationError, GravVortexError, InfeasibleError, NumericalError
from .estimates import run_all
from .futaki import ZonalPair, futaki
from .sphere_spectral import ScalarField, lambda1, make_grid
from .state import alpha_max

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

PRESETS = {
    "antipodal": lambda m: antipodal(m or (1, 1)),
    "equatorial": lambda m: equatorial(len(m) if m else 3, m),
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage already; keep messages on stderr
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_fail(EXIT_INPUT, message))


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _out_dir(args):
    d = Path(args.out or os.environ.get("GRAVVORTEX_OUTDIR", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _divisor(args):
    if args.divisor and args.preset:
        raise ArgumentError("give either --divisor or --preset, not both")
    if args.divisor:
        if args.mults:
            raise ArgumentError("--mults only applies to --preset")
        return io.load_divisor(args.divisor)
    if args.preset:
        return PRESETS[args.preset](tuple(args.mults) if args.mults else None)
    raise ArgumentError("a divisor is required (--divisor FILE|JSON or --preset)")


def _config(args):
    kw = {"L": args.L}
    if getattr(args, "tol", None) is not None:
        kw["newton_tol"] = args.tol
    return SolverConfig(**kw)


def _check_tau(D, tau):
    if tau <= 2 * D.N:
        raise ArgumentError(
            f"tau = {tau:g} <= 2N = {2 * D.N}: the vortex equation needs tau * Vol/(2 pi) > 2N"
        )


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1, default=_jsonable))
    return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serializable: {type(x)}")


def _verify_state(state, tol):
    """Residuals and estimates of ``state`` recomputed from its fields."""
    norms = residual_norms(state)
    rep = run_all(state)
    ok = max(norms) < tol and rep.passed
    return ok, norms, rep


# --- commands ---------------------------------------------------------------


def cmd_stability(args):
    D = _divisor(args)
    cls = classify(D)
    out = {"class": str(cls), "N": D.N, "mults": list(D.mults), "polystable": cls.polystable}
    if args.tau is not None:
        out["tau"] = args.tau
        out["admissible"] = bool(is_admissible(D, args.tau))
    print(str(cls))
    if args.tau is not None:
        verdict = "admissible" if out["admissible"] else "not admissible"
        print(f"{verdict} at tau={args.tau:g} (alpha range (0, {alpha_max(args.tau, D.N):.6g}))")
    if args.json:
        print(json.dumps(out))
    return EXIT_OK


def _run_continuation(args, start, target, cfg, outdir, stem):
    D = start.divisor
    rep = continue_path(start, target, cfg, force=args.force)
    final = rep.final_state
    est = run_all(final)
    reached = rep.outcome == "reached"
    doc = {
        "command": args.command,
        "config": cfg.to_dict(),
        "divisor": D.to_json(),
        "tau": start.tau,
        "alpha_start": start.alpha,
        "alpha_target": target,
        "force": bool(args.force),
        "continuation": rep.to_dict(),
        "final_alpha": final.alpha,
        "final_residuals": list(final.residual_norms),
        "estimates": est.to_dict(),
    }
    sol = io.save_state(final, outdir / f"{stem}.json", extra={"outcome": rep.outcome})
    _write_json(doc, outdir / f"{stem}_report.json")
    plotting.plot_continuation(rep, outdir / f"{stem}_continuation.png", title=f"{classify(D)} N={D.N} tau={start.tau:g}")
    print(f"outcome: {rep.outcome}; final alpha = {final.alpha:.10g} (target {target:.10g})")
    if not reached:
        print(f"stalled at alpha* = {rep.stall_alpha:.10g} after {len(rep.rejected)} rejected steps")
        for r in rep.rejected[-6:]:
            print(f"  rejected alpha={r['alpha']:.8g} step={r['step']:.3g} merit={r['last_merit']}")
    print(f"residuals R1={final.residual_norms[0]:.3e} R2={final.residual_norms[1]:.3e}")
    print(est.table())
    print(f"wrote {sol}")
    return EXIT_OK if reached and est.passed else EXIT_NUMERIC


def _start_state(args, cfg):
    if args.warm:
        st = io.load_state(args.warm)
        if st.L != cfg.L:
            g = make_grid(cfg.L)
            st = st.copy_with(phi=ScalarField(g, coeffs=st.phi.coeffs), v=ScalarField(g, coeffs=st.v.coeffs))
        norms = residual_norms(st)
        if max(norms) >= 10 * cfg.newton_tol:
            raise ArgumentError(f"warm start is not a converged solution (residuals {norms[0]:.2e}, {norms[1]:.2e})")
        return st.copy_with(converged=True, residual_norms=norms)
    D = _divisor(args)
    _check_tau(D, args.tau)
    check_inputs(D, args.tau, 0.0, args.force)
    st = initial_state(D, args.tau, cfg)
    if not st.converged:
        raise NumericalError("decoupled vortex solve did not converge")
    return st


def cmd_solve(args):
    cfg = _config(args)
    st = _start_state(args, cfg)
    check_inputs(st.divisor, st.tau, args.alpha, args.force)
    return _run_continuation(args, st, args.alpha, cfg, _out_dir(args), args.name)


def cmd_continue(args):
    cfg = _config(args)
    st = _start_state(args, cfg)
    check_inputs(st.divisor, st.tau, args.to, args.force)
    going_up = args.to >= st.alpha
    if args.direction and (args.direction == "up") != going_up:
        raise ArgumentError(
            f"--direction {args.direction} is inconsistent with alpha {st.alpha:g} -> {args.to:g}"
        )
    return _run_continuation(args, st, args.to, cfg, _out_dir(args), args.name)


def cmd_verify(args):
    st = io.load_state(args.solution)
    ok, norms, rep = _verify_state(st, args.tol)
    doc = {"solution": str(args.solution), "alpha": st.alpha, "tau": st.tau, "residuals": list(norms), "tol": args.tol, "passed": ok,
           "estimates": rep.to_dict()}
    print(f"residuals R1={norms[0]:.3e} R2={norms[1]:.3e} (tol {args.tol:.1e})")
    print(rep.table())
    print("PASS" if ok else "FAIL")
    if args.report:
        _write_json(doc, args.report)
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_futaki(args):
    if args.pair:
        path = Path(args.pair)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentError(f"cannot read pair file {path}: {exc}") from exc
        if data.get("format") == io.FORMAT:
            pair = ZonalPair.from_state(io.state_from_dict(data))
        else:
            try:
                pair = ZonalPair(args.N, args.ell, np.polynomial.Chebyshev(data["phi"]), np.polynomial.Chebyshev(data["f"]),
                                 label=str(path))
            except (KeyError, TypeError, ValueError) as exc:
                raise ArgumentError(f"pair file needs Chebyshev coefficient lists 'phi' and 'f': {exc}") from exc
    elif args.seed is not None:
        pair = ZonalPair.random(args.N, args.ell, seed=args.seed)
    else:
        pair = ZonalPair.fubini_study(args.N, args.ell)
    res = futaki(args.alpha, args.tau, args.N, args.ell, pair)
    d = res.to_dict()
    print(json.dumps(d, indent=1))
    return EXIT_OK if res.rel_diff < args.rtol else EXIT_NUMERIC


def cmd_profile(args):
    st = io.load_state(args.solution)
    rows = profile.profile_table(st, n=args.n, full_grid=True if args.full_grid else None)
    out = Path(args.output)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        profile.write_csv(rows, out, meta={"alpha": st.alpha, "tau": st.tau, "N": st.N, "mass": st.mass()})
    except OSError as exc:
        raise ArgumentError(f"cannot write {out}: {exc}") from exc
    png = out.with_suffix(".png")
    plotting.plot_profile(profile.read_csv(out), png, title=f"alpha={st.alpha:.6g}, tau={st.tau:g}")
    print(f"wrote {out} and {png}")
    return EXIT_OK


def cmd_eigen(args):
    if args.solution:
        phi = io.load_state(args.solution).phi
    else:
        phi = ScalarField.constant(make_grid(args.L), args.phi_const)
    lam = lambda1(phi)
    print(f"lambda1 = {lam:.12g}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_divisor(p, required_tau=True):
    p.add_argument("--divisor", help="divisor JSON file or inline JSON {'points': [{'lon','lat'}...], 'mults': [...]}")
    p.add_argument("--preset", choices=sorted(PRESETS), help="antipodal pair or equally spaced equatorial points")
    p.add_argument("--mults", type=int, nargs="+", help="multiplicities for --preset")
    if required_tau:
        p.add_argument("--tau", type=float, help="symmetry breaking parameter")


def _add_run(p):
    _add_divisor(p)
    p.add_argument("--warm", help="warm-start solution file (replaces --divisor/--tau)")
    p.add_argument("--L", type=int, default=64, help="spectral degree (default 64)")
    p.add_argument("--tol", type=float, default=None, help="Newton sup-norm tolerance")
    p.add_argument("--force", action="store_true", help="accept divisors that are not polystable")
    p.add_argument("--out", help="output directory (default $GRAVVORTEX_OUTDIR or .)")
    p.add_argument("--name", default="solution", help="file stem for outputs")


def build_parser():
    p = _Parser(prog="gravvortex", description="Gravitating vortices on the 2-sphere")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stability", help="GIT class of a divisor")
    _add_divisor(s)
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=cmd_stability)

    s = sub.add_parser("solve", help="continue from alpha=0 (or a warm start) to --alpha")
    _add_run(s)
    s.add_argument("--alpha", type=float, required=True)
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("continue", help="alpha-continuation with per-step report")
    _add_run(s)
    s.add_argument("--to", type=float, required=True, help="target alpha")
    s.add_argument("--direction", choices=("up", "down"))
    s.set_defaults(fn=cmd_continue)

    s = sub.add_parser("verify", help="recheck residuals and estimates of a solution file")
    s.add_argument("solution")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--report", help="write the verification report as JSON")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("futaki", help="Futaki character of a two-point divisor")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--ell", type=int, required=True)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--pair", help="zonal pair JSON (Chebyshev 'phi', 'f') or a solution file")
    s.add_argument("--seed", type=int, help="use a seeded random zonal pair")
    s.add_argument("--rtol", type=float, default=1e-6)
    s.set_defaults(fn=cmd_futaki)

    s = sub.add_parser("profile", help="CSV profiles of Phi, S_g, b, S_k plus a PNG")
    s.add_argument("solution")
    s.add_argument("output", help="CSV path; the PNG goes next to it")
    s.add_argument("--n", type=int, default=181)
    s.add_argument("--full-grid", action="store_true")
    s.set_defaults(fn=cmd_profile)

    s = sub.add_parser("eigen", help="first nonzero eigenvalue of Delta_g")
    s.add_argument("solution", nargs="?")
    s.add_argument("--phi-const", type=float, default=0.0)
    s.add_argument("--L", type=int, default=32)
    s.set_defaults(fn=cmd_eigen)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    if args.command in ("solve", "continue") and not args.warm and args.tau is None:
        return _fail(EXIT_INPUT, "--tau is required without --warm")
    try:
        return args.fn(args)
    except (ArgumentError, ConfigurationError, InfeasibleError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, str(exc))
    except GravVortexError as exc:
        return _fail(EXIT_NUMERIC, str(exc))


if __name__ == "__main__":
    sys.exit(main())
