"""Command-line front end.

Each subcommand writes a CSV or JSON file into ``--out`` whose first line is a
``#`` comment recording the command, seed and key parameters. Exit codes: 0 on
success, 2 on invalid input, 3 when ``--oracle`` finds a mismatch between the
analytic model and the Fock-space simulation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import bell, gate, measurement, oracle, states, tomography, waveform
from .errors import OracleMismatchError, ValidationError

log = logging.getLogger("klmcnot")

NS = 1e-9
ORACLE_TOL = 1e-8
DEFAULT_TAU_INT = (0.5 * NS, 1 * NS, 2 * NS, 3.5 * NS, 4 * NS, 6 * NS, 10 * NS)


@dataclass
class ScenarioConfig:
    control: str = "memory"
    target: str = "source"
    align: bool = True
    eta: float | None = None
    gate: gate.GateConfig = field(default_factory=gate.GateConfig.ideal)
    window_offset: float = waveform.DEFAULT_WINDOW_OFFSET
    tau_int: tuple[float, ...] = DEFAULT_TAU_INT
    shots: int = 100_000
    seed: int = 0
    noise: float = 0.0
    out: Path = Path("out")
    bell_state: str = "PhiPlus"
    hom_delays: tuple[float, ...] = tuple(np.round(np.arange(-6, 6.001, 0.1), 10) * NS)
    hom_tau_int: float = 3.5 * NS
    explicit_waveforms: bool = False

    def __post_init__(self):
        if self.eta is not None:
            if self.explicit_waveforms:
                raise ValidationError("an eta override and waveform inputs are mutually exclusive")
            if not 0.0 <= self.eta <= 1.0:
                raise ValidationError(f"eta={self.eta} outside [0, 1]")
        if self.shots < 1:
            raise ValidationError("shots must be >= 1")
        if not 0.0 <= self.noise <= 1.0:
            raise ValidationError(f"noise={self.noise} outside [0, 1]")
        for spec in (self.control, self.target):
            if spec not in ("source", "memory") and not Path(spec).exists():
                raise ValidationError(f"waveform '{spec}' is neither a preset nor an existing file")
        if any(t <= 0 for t in self.tau_int) or self.hom_tau_int <= 0:
            raise ValidationError("integration windows must be positive")
        states.as_bell(self.bell_state)

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path | None = None) -> "ScenarioConfig":
        flat = _flatten(data)
        base_dir = base_dir or Path.cwd()
        kw: dict = {}

        def path_like(v):
            if v in ("source", "memory"):
                return v
            p = Path(v)
            return str(p if p.is_absolute() else base_dir / p)

        if "waveforms.control" in flat or "waveforms.target" in flat:
            kw["explicit_waveforms"] = True
        if "waveforms.control" in flat:
            kw["control"] = path_like(flat.pop("waveforms.control"))
        if "waveforms.target" in flat:
            kw["target"] = path_like(flat.pop("waveforms.target"))
        if "waveforms.align" in flat:
            kw["align"] = bool(flat.pop("waveforms.align"))
        if "eta" in flat:
            v = flat.pop("eta")
            kw["eta"] = None if v is None else float(v)
        gate_keys = {k: flat.pop(k) for k in list(flat) if k.startswith("gate.")}
        if "gate" in flat:
            gpath = Path(path_like(flat.pop("gate")))
            if not gpath.exists():
                raise ValidationError(f"gate config {gpath} not found")
            kw["gate"] = gate.GateConfig.load(gpath)
        elif gate_keys:
            kw["gate"] = gate.GateConfig.from_mapping({k[5:]: v for k, v in gate_keys.items()})
        if "window.offset" in flat:
            kw["window_offset"] = float(flat.pop("window.offset"))
        if "window.tau_int" in flat:
            v = flat.pop("window.tau_int")
            kw["tau_int"] = tuple(float(x) for x in (v if isinstance(v, list) else [v]))
        for key, name, conv in (
            ("shots", "shots", int),
            ("seed", "seed", int),
            ("noise", "noise", float),
            ("bell", "bell_state", str),
            ("hom.tau_int", "hom_tau_int", float),
        ):
            if key in flat:
                kw[name] = conv(flat.pop(key))
        if "out" in flat:
            kw["out"] = Path(path_like(flat.pop("out")))
        if "hom.delays" in flat:
            v = flat.pop("hom.delays")
            kw["hom_delays"] = tuple(float(x) for x in v)
        elif any(k.startswith("hom.delay_") for k in flat):
            start = float(flat.pop("hom.delay_start"))
            stop = float(flat.pop("hom.delay_stop"))
            step = float(flat.pop("hom.delay_step"))
            kw["hom_delays"] = tuple(np.arange(start, stop + 0.5 * step, step))
        if flat:
            raise ValidationError(f"unknown config keys: {sorted(flat)}")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        p = Path(path)
        if not p.exists():
            raise ValidationError(f"config file {p} not found")
        data = yaml.safe_load(p.read_text()) or {}
        if not isinstance(data, dict):
            raise ValidationError(f"{p}: top level must be a mapping")
        return cls.from_mapping(data, p.parent)

    def waveform_pair(self):
        """``(u_control, u_target)`` on a common grid, control aligned for maximal overlap."""
        grid = waveform.TimeGrid.centered()
        u_c = waveform.load_waveform(self.control, grid)
        u_t = waveform.load_waveform(self.target, grid)
        if self.align:
            d, _ = waveform.best_delay(u_t, u_c)
            u_c = waveform.delay(u_c, d)
        return u_c, u_t


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


# ---------------------------------------------------------------------------
# Commands (library-callable; return rows)
# ---------------------------------------------------------------------------


def cmd_fidelity_curve(v_grid: Sequence[float]) -> list[dict]:
    v = np.asarray(v_grid, dtype=float)
    if v.size == 0 or np.any(v < 0) or np.any(v > 1):
        raise ValidationError("visibility grid must lie in [0, 1]")
    return [{"V": float(x), "F_model": states.fidelity_vs_eta(x), "F_werner": states.werner_fidelity(x)} for x in v]


def _gate_metrics(eta: float, cfg: ScenarioConfig) -> dict:
    noise = measurement.NoiseConfig(cfg.noise)
    row = {}
    for b in states.BellState:
        c, t = gate.BELL_INPUTS[b.value]
        rho, _ = gate.cnot_density_matrix(c, t, eta, cfg.gate)
        rho = states.depolarize(rho, cfg.noise)
        row[f"F_{b.value}"] = states.fidelity_pure_target(rho, b)
        if b is states.BellState.PHI_PLUS:
            row["S_max"] = bell.chsh_optimize(rho)[0]
    _, f_zz = measurement.truth_table("ZZ", eta, cfg.gate, noise=noise)
    _, f_xx = measurement.truth_table("XX", eta, cfg.gate, noise=noise)
    lo, hi = measurement.process_bounds(f_zz, f_xx)
    row.update({"F_ZZ": f_zz, "F_XX": f_xx, "process_lower": lo, "process_upper": hi})
    return row


def cmd_window_sweep(cfg: ScenarioConfig) -> list[dict]:
    """Per integration window: acceptance, overlap and the downstream gate metrics."""
    if cfg.eta is not None:
        raise ValidationError("window-sweep needs waveform inputs, not an eta override")
    u_c, u_t = cfg.waveform_pair()
    rows = []
    for tau in cfg.tau_int:
        w = waveform.WindowConfig(cfg.window_offset, tau)
        eta, acc_c, acc_t = waveform.windowed_eta(u_c, u_t, w)
        row = {
            "tau_int_s": tau,
            "acceptance_control": acc_c,
            "acceptance_target": acc_t,
            "acceptance_pair": acc_c * acc_t,
            "eta": eta,
        }
        row.update(_gate_metrics(eta, cfg))
        row["F_werner"] = states.werner_fidelity(eta)
        row["bell_threshold"] = bell.bell_fidelity_threshold()
        row["chsh_classical_bound"] = 2.0
        rows.append(row)
    return rows


def resolve_eta(cfg: ScenarioConfig) -> float:
    """Overlap from the override, else from the waveforms in the first window."""
    if cfg.eta is not None:
        return cfg.eta
    u_c, u_t = cfg.waveform_pair()
    w = waveform.WindowConfig(cfg.window_offset, cfg.tau_int[0]) if cfg.tau_int else None
    return waveform.windowed_eta(u_c, u_t, w)[0]


def cmd_tomography(cfg: ScenarioConfig, bell_state=None) -> dict:
    """Gate output -> 36-setting counts -> MLE; returns dataset, rho and report."""
    target = states.as_bell(bell_state or cfg.bell_state)
    eta = resolve_eta(cfg)
    c, t = gate.BELL_INPUTS[target.value]
    rho_true, success = gate.cnot_density_matrix(c, t, eta, cfg.gate)
    data = measurement.simulate_counts(
        rho_true, measurement.tomography_schedule(), cfg.shots, cfg.seed, measurement.NoiseConfig(cfg.noise)
    )
    data.meta.update({"eta": repr(eta), "bell": target.value, "noise": cfg.noise})
    fit = tomography.mle_fit(data)
    fid = states.fidelity_pure_target(fit.rho, target)
    threshold = bell.bell_fidelity_threshold()
    report = {
        "bell_state": target.value,
        "eta": eta,
        "noise": cfg.noise,
        "shots_per_setting": cfg.shots,
        "seed": cfg.seed,
        "success_probability": success,
        "fidelity": fid,
        "model_fidelity": states.fidelity_vs_eta(eta),
        "bell_threshold": threshold,
        "violates_bell": bool(fid > threshold),
        "mle_iterations": fit.n_iter,
        "mle_converged": fit.converged,
    }
    return {"dataset": data, "rho": fit.rho, "rho_true": rho_true, "report": report}


def cmd_hom(cfg: ScenarioConfig) -> list[dict]:
    u_c, u_t = cfg.waveform_pair()
    w = waveform.WindowConfig(cfg.window_offset, cfg.hom_tau_int)
    pts = measurement.hom_scan(u_t, u_c, cfg.hom_delays, w)
    return [{"delay_s": p.delay, "coincidence": p.coincidence, "eta": p.eta} for p in pts]


def cmd_truth_table(cfg: ScenarioConfig) -> dict:
    eta = resolve_eta(cfg)
    noise = measurement.NoiseConfig(cfg.noise)
    tables = {b: measurement.truth_table(b, eta, cfg.gate, noise=noise)[0] for b in ("ZZ", "XX", "YY")}
    lo, hi = measurement.process_bounds(tables["ZZ"].fidelity, tables["XX"].fidelity)
    return {"eta": eta, "tables": tables, "process_bounds": (lo, hi)}


def cmd_chsh(cfg: ScenarioConfig, bell_state=None) -> dict:
    target = states.as_bell(bell_state or cfg.bell_state)
    eta = resolve_eta(cfg)
    c, t = gate.BELL_INPUTS[target.value]
    rho, _ = gate.cnot_density_matrix(c, t, eta, cfg.gate)
    rho = states.depolarize(rho, cfg.noise)
    s_max, angles = bell.chsh_optimize(rho)
    return {
        "bell_state": target.value,
        "eta": eta,
        "S_max": s_max,
        "angles_deg": list(angles),
        "S_standard_angles": bell.chsh_score(rho, bell.STANDARD_ANGLES),
        "violates_chsh": bool(s_max > 2.0),
    }


def oracle_crosscheck(cases, config: gate.GateConfig, tol: float = ORACLE_TOL) -> float:
    """Compare analytic and Fock-space outputs for ``(pol_m, pol_s, eta)`` cases."""
    worst = 0.0
    for pol_m, pol_s, eta in cases:
        r1, p1 = gate.cnot_density_matrix(pol_m, pol_s, eta, config)
        r2, p2 = oracle.simulate_eta(pol_m, pol_s, eta, config)
        worst = max(worst, float(np.max(np.abs(r1 - r2))), abs(p1 - p2))
    if worst > tol:
        raise OracleMismatchError(f"analytic and Fock-space results differ by {worst:.3g} > {tol:g}")
    return worst


def _all_inputs(etas):
    labels = "HVDA"
    return [(a, b, e) for e in etas for a in labels for b in labels]


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _header(command: str, cfg: ScenarioConfig | None, **extra) -> str:
    parts = [f"klmcnot {command}"]
    if cfg is not None:
        parts.append(f"seed={cfg.seed}")
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


def write_rows(path: Path, rows: list[dict], header: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def write_json(path: Path, payload: dict, header: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"_header": header.lstrip("# "), **payload}
    path.write_text(json.dumps(payload, indent=2, default=float) + "\n")


# ---------------------------------------------------------------------------
# argparse wiring
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario YAML file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--oracle", action="store_true", help="cross-check against the Fock-space oracle")
    common.add_argument("--eta", type=float, help="overlap override; bypasses waveforms")
    common.add_argument("--noise", type=float, help="depolarizing admixture epsilon")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="klmcnot",
        description="Simulate a post-selected linear-optical CNOT acting on partially distinguishable photons.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    fc = sub.add_parser("fidelity-curve", parents=[common], help="F(V) model and Werner curves")
    fc.add_argument("--v-grid", type=float, nargs="+", help="visibility values (default 0..1 step 0.05)")

    ws = sub.add_parser("window-sweep", parents=[common], help="metrics versus integration window")
    ws.add_argument("--tau-int-ns", type=float, nargs="+", help="window durations in ns")

    tm = sub.add_parser("tomography", parents=[common], help="simulated tomography of a Bell state")
    tm.add_argument("--bell", choices=[b.value for b in states.BellState])
    tm.add_argument("--shots", type=int, help="shots per setting")

    hm = sub.add_parser("hom", parents=[common], help="HOM delay scan of the two photons")
    hm.add_argument("--tau-int-ns", type=float, help="window duration in ns")

    sub.add_parser("truth-table", parents=[common], help="ZZ, XX, YY truth tables and process bounds")

    ch = sub.add_parser("chsh", parents=[common], help="optimized CHSH score of a gate output")
    ch.add_argument("--bell", choices=[b.value for b in states.BellState])
    return p


def _scenario(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out"] = args.out
    if args.eta is not None:
        updates["eta"] = args.eta
    if args.noise is not None:
        updates["noise"] = args.noise
    if getattr(args, "shots", None) is not None:
        updates["shots"] = args.shots
    if getattr(args, "bell", None):
        updates["bell_state"] = args.bell
    tau = getattr(args, "tau_int_ns", None)
    if tau is not None:
        if args.command == "hom":
            updates["hom_tau_int"] = tau * NS
        else:
            updates["tau_int"] = tuple(t * NS for t in tau)
    return replace(cfg, **updates) if updates else cfg


def run(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = _scenario(args)
    out = Path(cfg.out)
    cmd = args.command

    if cmd == "fidelity-curve":
        grid = args.v_grid if args.v_grid else np.round(np.linspace(0, 1, 21), 12)
        rows = cmd_fidelity_curve(grid)
        if args.oracle:
            oracle_crosscheck([("D", "H", r["V"]) for r in rows], gate.GateConfig.ideal())
            for r in rows:
                rho, _ = oracle.simulate_eta("D", "H", r["V"])
                if abs(states.fidelity_pure_target(rho, "PhiPlus") - r["F_model"]) > ORACLE_TOL:
                    raise OracleMismatchError(f"oracle fidelity disagrees with the model at V={r['V']}")
        path = out / "fidelity_curve.csv"
        write_rows(path, rows, _header(cmd, cfg))
        print(f"wrote {len(rows)} rows to {path}")

    elif cmd == "window-sweep":
        rows = cmd_window_sweep(cfg)
        if args.oracle:
            oracle_crosscheck(_all_inputs([r["eta"] for r in rows]), cfg.gate)
        path = out / "window_sweep.csv"
        write_rows(path, rows, _header(cmd, cfg, noise=cfg.noise, window_offset=cfg.window_offset))
        for r in rows:
            print(f"tau_int={r['tau_int_s'] / NS:5.2f} ns  acc={r['acceptance_pair']:.3f}  eta={r['eta']:.4f}  "
                  f"F={r['F_PhiPlus']:.4f}  S={r['S_max']:.3f}  "
                  f"process=[{r['process_lower']:.3f}, {r['process_upper']:.3f}]")
        print(f"wrote {path}")

    elif cmd == "tomography":
        res = cmd_tomography(cfg)
        rep = res["report"]
        if args.oracle:
            c, t = gate.BELL_INPUTS[rep["bell_state"]]
            oracle_crosscheck([(c, t, rep["eta"])], cfg.gate)
        head = _header(cmd, cfg, bell=rep["bell_state"], eta=rep["eta"], shots=cfg.shots, noise=cfg.noise)
        out.mkdir(parents=True, exist_ok=True)
        res["dataset"].to_csv(out / "tomography_counts.csv")
        (out / "tomography_rho.json").write_text(
            states.density_matrix_to_json(res["rho"], _header=head.lstrip("# ")) + "\n"
        )
        write_json(out / "tomography_report.json", rep, head)
        verdict = "violates" if rep["violates_bell"] else "does not violate"
        print(f"{rep['bell_state']}: fidelity {rep['fidelity']:.4f} (model {rep['model_fidelity']:.4f}); "
              f"{verdict} the Bell threshold {rep['bell_threshold']:.4f}")

    elif cmd == "hom":
        rows = cmd_hom(cfg)
        if args.oracle:
            u_c, u_t = cfg.waveform_pair()
            pair = oracle.gram_schmidt_temporal(u_t, u_c)
            if abs(pair.eta - waveform.overlap_eta(u_t, u_c)) > ORACLE_TOL:
                raise OracleMismatchError("Schmidt decomposition disagrees with the overlap integral")
        path = out / "hom.csv"
        write_rows(path, rows, _header(cmd, cfg, tau_int=cfg.hom_tau_int))
        cmin = min(r["coincidence"] for r in rows)
        print(f"dip minimum {cmin:.4f}, visibility {1 - 2 * cmin:.4f}; wrote {path}")

    elif cmd == "truth-table":
        res = cmd_truth_table(cfg)
        if args.oracle:
            for b in ("ZZ", "XX", "YY"):
                t_or, _ = measurement.truth_table(b, res["eta"], cfg.gate, run=measurement.oracle_runner,
                                                  noise=measurement.NoiseConfig(cfg.noise))
                if np.max(np.abs(t_or.probabilities - res["tables"][b].probabilities)) > ORACLE_TOL:
                    raise OracleMismatchError(f"{b} truth table differs from the oracle")
        rows = []
        for b, tab in res["tables"].items():
            for i, inp in enumerate(tab.inputs):
                for j, outp in enumerate(tab.outputs):
                    rows.append({"basis": b, "input": inp, "output": outp,
                                 "probability": float(tab.probabilities[i, j]), "correct": int(j in tab.correct[i])})
        path = out / "truth_table.csv"
        write_rows(path, rows, _header(cmd, cfg, eta=res["eta"], noise=cfg.noise))
        lo, hi = res["process_bounds"]
        fids = "  ".join(f"F_{b}={t.fidelity:.4f}" for b, t in res["tables"].items())
        print(f"eta={res['eta']:.4f}  {fids}  {lo:.3f} <= F_process <= {hi:.3f}")

    elif cmd == "chsh":
        res = cmd_chsh(cfg)
        if args.oracle:
            c, t = gate.BELL_INPUTS[res["bell_state"]]
            oracle_crosscheck([(c, t, res["eta"])], cfg.gate)
        path = out / "chsh.json"
        write_json(path, res, _header(cmd, cfg, noise=cfg.noise))
        print(f"{res['bell_state']}: S_max={res['S_max']:.4f} at angles {res['angles_deg']}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        code = run(argv)
    except OracleMismatchError as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        code = 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    return code


if __name__ == "__main__":
    sys.exit(main())
