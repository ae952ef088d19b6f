"""Command-line front end. Every report embeds the tool version, a hash of the resolved
config and the seed; outputs are written atomically."""
import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .counting import (count_profile, lce_verdict, predict_lce, rotation_counterexample,
                       shear_counterexample, volume_packing_check)
from .dioph import nu_profile, skriganov_experiment, substream, ubiquity_experiment
from .errors import InvalidInput, LatscopeError
from .lattice import Lattice, dual, preset as lattice_preset
from .region import (Box, dyadic_annulus, region_from_json, sample_annulus, tiling_annulus,
                     tiling_check)
from .spectral import Dilation, classify_dilation, eigen_decompose
from .wavelet import (FreqFunction, TestFunction, calderon_sum, char_eq_residual,
                      dual_eq_residual, lic_counterexample_psi, lic_functional, msf_certificate,
                      msf_from_tiling, shannon_msf)

GOLDEN = (math.sqrt(5) - 1) / 2
PAIR_PRESETS = {
    "shear-golden": lambda: shear_counterexample(GOLDEN),
    "rotation-jordan": lambda: rotation_counterexample(1.0, math.sqrt(2) - 1),
}
LATTICE_PRESETS = ("Zn", "hex", "sqrt2-norm")
EXCLUDED = {"threads", "output", "config", "func"}


def _json_arg(text, what):
    try:
        return json.loads(text)
    except (TypeError, json.JSONDecodeError) as e:
        raise InvalidInput(f"--{what}: not valid JSON ({e})") from None


def _json_file_or_inline(text, what):
    if text and os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    return _json_arg(text, what)


def _dilation(a):
    if getattr(a, "preset", None):
        if a.preset not in PAIR_PRESETS:
            raise InvalidInput(f"unknown preset {a.preset!r}; choose from {sorted(PAIR_PRESETS)}")
        return PAIR_PRESETS[a.preset]()[0]
    if a.matrix is None:
        raise InvalidInput("give --matrix or --preset")
    return Dilation(_json_arg(a.matrix, "matrix"))


def _lattice(a, n):
    if getattr(a, "preset", None) and getattr(a, "lattice", None) is None:
        return PAIR_PRESETS[a.preset]()[1]
    spec = getattr(a, "lattice", None) or "Zn"
    if spec in LATTICE_PRESETS:
        return lattice_preset(spec, n)
    return Lattice(_json_arg(spec, "lattice"))


def _psi(text, n=1):
    if text is None or text == "shannon":
        return shannon_msf(1)
    return FreqFunction.from_json(_json_file_or_inline(text, "psi"))


def _xi(a, n):
    rng = substream(a.seed, 1)
    return sample_annulus(n, a.samples, a.r_min, a.r_max, rng)


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


# ------------------------------------------------------------------ subcommands

def cmd_classify(a):
    D = _dilation(a)
    cls = classify_dilation(D, a.tol)
    sd = eigen_decompose(D.matrix)
    return {"class": cls.kind, "det_abs": float(cls.det_abs),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in sd.eigenvalues],
            "blocks": [{"eigenvalue": [float(b.eigenvalue.real), float(b.eigenvalue.imag)],
                        "order": b.order, "complex": b.is_complex} for b in sd.blocks]}


def cmd_count_profile(a):
    A = _dilation(a)
    L = _lattice(a, A.n)
    return count_profile(A, L, a.radius, a.j_min, a.j_max, workers=a.threads)


def cmd_lce_check(a):
    A = _dilation(a)
    L = _lattice(a, A.n)
    prof = count_profile(A, L, a.radius, a.j_min, a.j_max, workers=a.threads)
    return {"prediction": predict_lce(A), "verdict": lce_verdict(prof, a.growth_factor).to_json(),
            "counts": prof.counts()}


def cmd_counterexample(a):
    if a.kind == "shear":
        A, L = shear_counterexample(a.alpha)
    else:
        A, L = rotation_counterexample(a.theta, a.alpha)
    prof = count_profile(A, L, a.radius, a.j_min, a.j_max, workers=a.threads)
    c = prof.counts()
    return {"kind": a.kind, "class": classify_dilation(A).kind,
            "verdict": lce_verdict(prof, a.growth_factor).to_json(),
            "max_count": max(c.values()), "count_at_0": c.get(0), "counts": c}


def cmd_nu_scan(a):
    L = _lattice(a, a.dim)
    res = nu_profile(L, _floats(a.rho))
    return [{"rho": x.rho, "nu": x.value, "witness": None if x.witness is None else list(map(float, x.witness))}
            for x in res]


def cmd_skriganov_scan(a):
    L = _lattice(a, a.dim)
    return skriganov_experiment(L, _floats(a.rho), a.epsilon, a.trials, a.seed, a.threads).to_json()


def cmd_ubiquity(a):
    A = _dilation(a)
    L = _lattice(a, A.n)
    return ubiquity_experiment(A, L, a.radius, a.trials, (a.j_min, a.j_max), a.seed,
                               a.growth_factor, a.force_identity, a.threads).to_json()


def cmd_tiling(a):
    if a.region == "dyadic-annulus":
        B, S = Dilation([[2.0]]), dyadic_annulus()
    else:
        B = _dilation(a)
        S = tiling_annulus(B) if a.region is None else region_from_json(_json_file_or_inline(a.region, "region"))
    rep = tiling_check(B, S, a.samples, a.J, a.seed, a.r_min, a.r_max)
    return {"region": S.to_json(), **rep.to_json()}


def cmd_calderon(a):
    psi = _psi(a.psi)
    B = Dilation(_json_arg(a.matrix, "matrix")) if a.matrix else Dilation([[2.0]])
    X = _xi(a, B.n)
    res = calderon_sum(psi, B, X, a.J)
    out = {"J": a.J, "min": float(res.sums.min()), "max": float(res.sums.max()),
           "fraction_equal_1": float(np.mean(res.sums == 1.0)),
           "growth_detected": res.growth_detected}
    if a.bound is not None:
        out["violations"] = int(np.sum(res.sums > a.bound + 1e-12))
    return out


def cmd_lic(a):
    A = Dilation(_json_arg(a.matrix, "matrix"))
    L = _lattice(a, A.n)
    psi = msf_from_tiling(tiling_annulus(A.transpose())) if a.psi is None else _psi(a.psi)
    T = region_from_json(_json_file_or_inline(a.support, "support"))
    return lic_functional(psi, A, L, TestFunction(T), a.J, n_samples=a.samples, seed=a.seed).to_json()


def cmd_lic_counterexample(a):
    A, G = PAIR_PRESETS[a.preset or "shear-golden"]()
    # frequency side of the pair (A^T, dual of G) is (A, G)
    psi, spec, f = lic_counterexample_psi(A, G, a.radius, a.side, a.I, seed=a.seed)
    out = {"spec": spec.to_json(), "psi": psi.to_json()}
    if a.J > 0:
        out["lic"] = lic_functional(psi, A.transpose(), dual(G), f, a.J, n_samples=a.samples,
                                    seed=a.seed).to_json()
    return out


def _alphas(text):
    return [np.atleast_1d(v).astype(float) for v in _json_arg(text, "alphas")]


def cmd_char_eq(a):
    A = Dilation(_json_arg(a.matrix, "matrix")) if a.matrix else Dilation([[2.0]])
    L = _lattice(a, A.n)
    rep = char_eq_residual(_psi(a.psi), A, L, _alphas(a.alphas), _xi(a, A.n), a.J, a.tol_mem)
    return rep.to_json()


def cmd_dual_eq(a):
    A = Dilation(_json_arg(a.matrix, "matrix")) if a.matrix else Dilation([[2.0]])
    L = _lattice(a, A.n)
    rep = dual_eq_residual(_psi(a.psi), _psi(a.phi), A, L, _alphas(a.alphas), _xi(a, A.n), a.J, a.tol_mem)
    return rep.to_json()


def cmd_msf_cert(a):
    B = _dilation(a)
    Gd = _lattice(a, B.n)
    return msf_certificate(B, Gd, a.radius, range(a.j_min, a.j_max + 1)).to_json()


def cmd_packing_check(a):
    L = _lattice(a, a.dim)
    M = np.eye(L.n) if a.matrix is None else np.asarray(_json_arg(a.matrix, "matrix"), dtype=float)
    return volume_packing_check(L, M, a.radius).to_json()


# ------------------------------------------------------------------ parser

def _common(p):
    p.add_argument("--config", help="JSON file of default flag values")
    p.add_argument("--seed", type=int, default=None, help="seed (falls back to $LATSCOPE_SEED, then 0)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--output", "-o", help="output path (stdout if omitted)")


def _pair_flags(p, lattice=True):
    p.add_argument("--matrix", help="dilation matrix as JSON rows")
    p.add_argument("--preset", help=f"named dilation/lattice pair: {', '.join(PAIR_PRESETS)}")
    if lattice:
        p.add_argument("--lattice", help="lattice preset (Zn, hex, sqrt2-norm) or JSON basis (columns generate)")


def _window(p, lo=-10, hi=10):
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--j-min", type=int, default=lo)
    p.add_argument("--j-max", type=int, default=hi)


def _samples(p, n=10000):
    p.add_argument("--samples", type=int, default=n)
    p.add_argument("--r-min", type=float, default=0.1)
    p.add_argument("--r-max", type=float, default=10.0)


def build_parser():
    ap = argparse.ArgumentParser(prog="latscope", description="lattice counting and wavelet diagnostics")
    ap.add_argument("--version", action="version", version=f"latscope {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        _common(p)
        return p

    p = add("classify", cmd_classify, "classify a dilation")
    _pair_flags(p, lattice=False)
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("count-profile", cmd_count_profile, "counts of lattice points in dilated balls (CSV)")
    _pair_flags(p)
    _window(p)

    p = add("lce-check", cmd_lce_check, "counting profile, verdict and prediction")
    _pair_flags(p)
    _window(p)
    p.add_argument("--growth-factor", type=float, default=4.0)

    p = add("counterexample", cmd_counterexample, "profile of the shear or rotation construction")
    p.add_argument("--kind", choices=["shear", "rotation"], default="shear")
    p.add_argument("--alpha", type=float, default=GOLDEN)
    p.add_argument("--theta", type=float, default=1.0)
    _window(p, -200, 0)
    p.add_argument("--growth-factor", type=float, default=4.0)

    p = add("nu-scan", cmd_nu_scan, "product-norm minima nu(L, rho)")
    p.add_argument("--lattice", default="Zn")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rho", default="10,100,1000")

    p = add("skriganov-scan", cmd_skriganov_scan, "Haar-rotated nu thresholds")
    p.add_argument("--lattice", default="Zn")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rho", default="10,100,1000")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=100)

    p = add("ubiquity", cmd_ubiquity, "counting verdicts over Haar-rotated lattices")
    _pair_flags(p)
    _window(p, -15, 15)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--growth-factor", type=float, default=4.0)
    p.add_argument("--force-identity", action="store_true")

    p = add("tiling", cmd_tiling, "check a multiplicative tiling set")
    _pair_flags(p, lattice=False)
    p.add_argument("--region", help="region JSON (file or inline) or 'dyadic-annulus'; default Lyapunov annulus")
    p.add_argument("--J", type=int, default=60)
    _samples(p)

    p = add("calderon", cmd_calderon, "truncated Calderón sums")
    p.add_argument("--psi", help="FreqFunction JSON (file or inline) or 'shannon'")
    p.add_argument("--matrix", help="frequency-side dilation B")
    p.add_argument("--J", type=int, default=30)
    p.add_argument("--bound", type=float, default=None)
    _samples(p)

    p = add("lic", cmd_lic, "local integrability functional L(f)")
    p.add_argument("--psi")
    p.add_argument("--matrix", required=True, help="dilation A of the wavelet system")
    p.add_argument("--lattice", default="Zn")
    p.add_argument("--support", required=True, help="region JSON for supp f_hat")
    p.add_argument("--J", type=int, default=30)
    p.add_argument("--samples", type=int, default=100000)

    p = add("lic-counterexample", cmd_lic_counterexample, "build the divergent psi and evaluate L(f)")
    p.add_argument("--preset", default="shear-golden", choices=list(PAIR_PRESETS))
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--side", choices=["a", "b"], default="b")
    p.add_argument("--I", type=int, default=5)
    p.add_argument("--J", type=int, default=0, help="evaluate L(f) up to |j| <= J (0 skips)")
    p.add_argument("--samples", type=int, default=20000)

    for name, func in (("char-eq", cmd_char_eq), ("dual-eq", cmd_dual_eq)):
        p = add(name, func, "characterizing-equation residuals" if name == "char-eq"
                else "dual-frame equation residuals for a pair")
        p.add_argument("--psi")
        if name == "dual-eq":
            p.add_argument("--phi")
        p.add_argument("--matrix")
        p.add_argument("--lattice", default="Zn")
        p.add_argument("--alphas", default="[0,1,-1,2,-2,3,-3]")
        p.add_argument("--J", type=int, default=30)
        p.add_argument("--tol-mem", type=float, default=1e-9)
        _samples(p, 1000)

    p = add("msf-cert", cmd_msf_cert, "exponents with a trivial dual-lattice intersection")
    _pair_flags(p)
    _window(p, -40, 0)

    p = add("packing-check", cmd_packing_check, "volume packing bounds")
    p.add_argument("--lattice", default="Zn")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--matrix")
    p.add_argument("--radius", type=float, default=1.0)
    return ap


# ------------------------------------------------------------------ output

def _jsonable(x):
    if hasattr(x, "to_json"):
        return _jsonable(x.to_json())
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def resolved_config(a):
    return {k: v for k, v in sorted(vars(a).items()) if k not in EXCLUDED}


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def render(a, result):
    cfg = resolved_config(a)
    h = config_hash(cfg)
    fmt = a.format or ("csv" if hasattr(result, "to_csv") else "json")
    if fmt == "csv":
        if not hasattr(result, "to_csv"):
            raise InvalidInput(f"{a.command} has no CSV form; use --format json")
        head = f"# latscope {__version__} config_hash={h} seed={a.seed}\n"
        return head + result.to_csv()
    doc = {"tool": "latscope", "version": __version__, "command": a.command, "seed": a.seed,
           "config_hash": h, "config": cfg, "result": _jsonable(result)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".latscope-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _apply_config(ap, argv):
    """--config supplies defaults; explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    a = ap.parse_args(argv)
    if known.config:
        with open(known.config) as fh:
            cfg = json.load(fh)
        explicit = ap.parse_args(argv)
        defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub = ap._subparsers._group_actions[0].choices[a.command]
        sub.set_defaults(**defaults)
        a = ap.parse_args(argv)
        del explicit
    return a


def run(argv=None):
    ap = build_parser()
    try:
        a = _apply_config(ap, argv)
    except SystemExit as e:
        return int(e.code or 0)
    except (OSError, json.JSONDecodeError) as e:
        print(f"latscope: bad --config: {e}", file=sys.stderr)
        return 2
    if a.seed is None:
        a.seed = int(os.environ.get("LATSCOPE_SEED", 0))
    try:
        text = render(a, a.func(a))
    except LatscopeError as e:
        print(f"latscope: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, TypeError, KeyError) as e:
        print(f"latscope: invalid input: {e}", file=sys.stderr)
        return 2
    if a.output:
        write_atomic(a.output, text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    return run(sys.argv[1:] if argv is None else argv)
