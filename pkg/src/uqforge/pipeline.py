"""Pipeline stages behind the command-line interface.

Each stage reads the documented CSV / model-file formats produced by earlier
stages, writes its own outputs plus a JSON manifest (resolved configuration,
seeds, input/output hashes, package version), and never re-invokes anything
an earlier stage already computed. All outputs are deterministic for a fixed
configuration: rerunning a stage with the same config and seeds reproduces
byte-identical files.
"""

from __future__ import annotations

import configparser
import hashlib
import importlib.resources
import json
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import chaos, doe, kriging, models, pck, sensitivity, serialize
from .errors import ConfigError, PreconditionError
from .input_space import ParameterSpace, parse_space

VERSION = "0.1.0"


def _data_text(name: str) -> str:
    return (importlib.resources.files("uqforge") / f"data/{name}").read_text()


def default_study_ini() -> str:
    """Text of the packaged nozzle-study configuration."""
    return _data_text("nozzle_study.ini")


def table2_space_text() -> str:
    """Text of the packaged seven-parameter nozzle input space."""
    return _data_text("nozzle_table2.cfg")


@dataclass
class StudyConfig:
    """Fully resolved run configuration; serializable into a manifest."""

    space_text: str = ""
    model_kind: str = "builtin"
    model_name: str = "nozzle"
    stations: int = 50
    command: str = ""
    workdir: str = "."
    input_file: str = "input.csv"
    output_file: str = "output.csv"
    timeout: float = 60.0
    output_labels: tuple = ()
    doe_kind: str = "sobol"
    doe_count: int = 100
    doe_seed: int = 0
    doe_skip: int = 0
    surrogate_kind: str = "pck"
    order: int = 2
    kernel: str = "squared-exponential"
    starts: int = 4
    nugget: float = 1e-10
    draws: int = 100000
    draws_seed: int = 2718
    sobol_base: int = 4096
    sobol_seed: int = 0
    out_dir: str = "uq_out"
    jobs: int = 1

    def space(self) -> ParameterSpace:
        return parse_space(self.space_text)

    def model_spec(self) -> models.ModelSpec:
        if self.model_kind == "builtin":
            opts = {"stations": self.stations} if self.model_name == "nozzle" else {}
            return models.builtin_model(self.model_name, **opts)
        if self.model_kind == "external":
            if not self.command:
                raise ConfigError("[model] kind=external requires command=")
            labels = self.output_labels or ("y",)
            return models.external_model(self.command, self.workdir, self.input_file,
                                         self.output_file, self.timeout, labels)
        raise ConfigError(f"unknown model kind {self.model_kind!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["output_labels"] = list(self.output_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in known}
        if "output_labels" in kwargs:
            kwargs["output_labels"] = tuple(kwargs["output_labels"])
        return cls(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> StudyConfig:
    """Read an INI study config; ``overrides`` wins over file values.

    ``path=None`` loads the packaged nozzle-study defaults. The [space]
    section's ``file`` may be ``table2`` (the packaged seven-input space) or
    a path to a space config.
    """
    if path is None:
        text = default_study_ini()
    else:
        try:
            text = open(path, encoding="utf-8").read()
        except OSError as err:
            raise ConfigError(f"cannot read study config {path!r}: {err}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"bad study config: {err}") from None

    def get(section, key, fallback):
        return parser.get(section, key, fallback=fallback) if parser.has_section(section) \
            else fallback

    cfg = StudyConfig()
    space_file = get("space", "file", "table2")
    base_dir = os.path.dirname(os.path.abspath(path)) if path else "."
    if space_file == "table2":
        cfg.space_text = table2_space_text()
    else:
        resolved = space_file if os.path.isabs(space_file) else os.path.join(base_dir, space_file)
        try:
            cfg.space_text = open(resolved, encoding="utf-8").read()
        except OSError as err:
            raise ConfigError(f"cannot read space file {space_file!r}: {err}") from None
    try:
        cfg.model_kind = get("model", "kind", cfg.model_kind)
        cfg.model_name = get("model", "name", cfg.model_name)
        cfg.stations = int(get("model", "stations", cfg.stations))
        cfg.command = get("model", "command", cfg.command)
        cfg.workdir = get("model", "workdir", cfg.workdir)
        cfg.input_file = get("model", "input", cfg.input_file)
        cfg.output_file = get("model", "output", cfg.output_file)
        cfg.timeout = float(get("model", "timeout", cfg.timeout))
        labels = get("model", "labels", "")
        if labels:
            cfg.output_labels = tuple(s.strip() for s in labels.split(","))
        cfg.doe_kind = get("doe", "kind", cfg.doe_kind)
        cfg.doe_count = int(get("doe", "count", cfg.doe_count))
        cfg.doe_seed = int(get("doe", "seed", cfg.doe_seed))
        cfg.doe_skip = int(get("doe", "skip", cfg.doe_skip))
        cfg.surrogate_kind = get("surrogate", "kind", cfg.surrogate_kind)
        cfg.order = int(get("surrogate", "order", cfg.order))
        cfg.kernel = get("surrogate", "kernel", cfg.kernel)
        cfg.starts = int(get("surrogate", "starts", cfg.starts))
        cfg.nugget = float(get("surrogate", "nugget", cfg.nugget))
        cfg.draws = int(get("study", "draws", cfg.draws))
        cfg.draws_seed = int(get("study", "draws_seed", cfg.draws_seed))
        cfg.sobol_base = int(get("study", "sobol_base", cfg.sobol_base))
        cfg.sobol_seed = int(get("study", "sobol_seed", cfg.sobol_seed))
        cfg.out_dir = get("output", "dir", cfg.out_dir)
    except ValueError as err:
        raise ConfigError(f"bad value in study config: {err}") from None
    for key, val in (overrides or {}).items():
        if val is not None:
            setattr(cfg, key, val)
    if cfg.doe_kind not in ("sobol", "lhs", "mc"):
        raise ConfigError(f"unknown doe kind {cfg.doe_kind!r}")
    if cfg.surrogate_kind not in ("pce", "kriging", "pck"):
        raise ConfigError(f"unknown surrogate kind {cfg.surrogate_kind!r}")
    cfg.space()      # validate early
    cfg.model_spec()
    return cfg


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(outdir, stage: str, cfg: StudyConfig, inputs, outputs, extra=None):
    # out_dir is location, not content: dropping it keeps manifests identical
    # across reruns into different directories (rerun with any outdir)
    cfg_dict = cfg.to_dict()
    cfg_dict.pop("out_dir", None)
    doc = {
        "stage": stage,
        "version": VERSION,
        "config": cfg_dict,
        "config_sha256": hashlib.sha256(
            json.dumps(cfg_dict, sort_keys=True).encode()).hexdigest(),
        "inputs": [{"file": os.path.basename(p), "sha256": _sha256(p)} for p in inputs],
        "outputs": [{"file": os.path.basename(p), "sha256": _sha256(p)} for p in outputs],
    }
    if extra:
        doc["extra"] = extra
    path = os.path.join(outdir, f"manifest_{stage}.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _generate_design(cfg: StudyConfig, dim: int) -> doe.DesignMatrix:
    if cfg.doe_kind == "sobol":
        return doe.sobol_sequence(dim, cfg.doe_count, skip=cfg.doe_skip)
    if cfg.doe_kind == "lhs":
        return doe.lhs(dim, cfg.doe_count, cfg.doe_seed)
    return doe.monte_carlo(dim, cfg.doe_count, cfg.doe_seed)


def stage_sample(cfg: StudyConfig, outdir) -> list[str]:
    """Generate the DOE and write it in physical units as samples.csv."""
    os.makedirs(outdir, exist_ok=True)
    space = cfg.space()
    design = _generate_design(cfg, space.dim)
    physical = doe.scale(design, space)
    path = os.path.join(outdir, "samples.csv")
    doe.save_design(physical, path)
    _write_manifest(outdir, "sample", cfg, [], [path])
    return [path]


def _require(outdir, name) -> str:
    path = os.path.join(outdir, name)
    if not os.path.exists(path):
        raise PreconditionError(f"missing {name} in {outdir}; run the earlier stage first")
    return path


def stage_run(cfg: StudyConfig, outdir) -> list[str]:
    """Evaluate the model on samples.csv and write responses.csv."""
    sample_path = _require(outdir, "samples.csv")
    design = doe.load_design(sample_path)
    space = cfg.space()
    spec = cfg.model_spec()
    resp = models.evaluate_batch(spec, design, names=space.names, jobs=cfg.jobs)
    path = os.path.join(outdir, "responses.csv")
    models.save_responses(resp, path, model_tag=cfg.model_name or "external")
    extra = {"failed_rows": int(resp.mask.sum())}
    if resp.diagnostics:
        extra["diagnostics"] = resp.diagnostics[:20]
    _write_manifest(outdir, "run", cfg, [sample_path], [path], extra)
    return [path]


def _check_fit_precondition(cfg: StudyConfig, n_ok: int, dim: int):
    basis_size = chaos.total_degree_count(dim, cfg.order)
    if cfg.surrogate_kind == "pce" and n_ok < basis_size:
        raise PreconditionError(
            f"pce order {cfg.order} needs N >= {basis_size} samples, have {n_ok}")
    if cfg.surrogate_kind == "pck" and n_ok <= basis_size:
        raise PreconditionError(
            f"pck order {cfg.order} needs N > {basis_size} samples, have {n_ok}")
    if cfg.surrogate_kind == "kriging" and n_ok < 3:
        raise PreconditionError(f"kriging needs N >= 3 samples, have {n_ok}")


def _fit_models(cfg: StudyConfig, space, std_pts, resp) -> list[tuple]:
    """Fit one surrogate per response column; returns (label, model) pairs."""
    keep = resp.ok()
    X = std_pts[keep]
    Y = resp.Y[keep]
    if cfg.surrogate_kind == "pce":
        basis = chaos.basis_for_space(space, cfg.order)
        fitted = [chaos.fit_regression(space, basis, X, Y[:, j]) for j in range(Y.shape[1])]
    elif cfg.surrogate_kind == "pck":
        fitted = pck.fit_pck(space, X, Y, order=cfg.order, kernel_family=cfg.kernel,
                             n_starts=cfg.starts, nugget=cfg.nugget)
        fitted = fitted if isinstance(fitted, list) else [fitted]
    else:
        fitted = kriging.mle_train(X, Y, kernel_family=cfg.kernel,
                                   n_starts=cfg.starts, nugget=cfg.nugget)
        fitted = fitted if isinstance(fitted, list) else [fitted]
    return list(zip(resp.labels, fitted))


def stage_fit(cfg: StudyConfig, outdir) -> list[str]:
    """Fit surrogates from samples.csv + responses.csv; write model.uqm.

    Consumes only the stage files; the model itself is never re-invoked.
    """
    sample_path = _require(outdir, "samples.csv")
    resp_path = _require(outdir, "responses.csv")
    design = doe.load_design(sample_path)
    resp = models.load_responses(resp_path)
    if resp.count != design.count:
        raise PreconditionError("samples.csv and responses.csv row counts differ")
    space = cfg.space()
    _check_fit_precondition(cfg, int(resp.ok().sum()), space.dim)
    std_pts = space.to_standard(design.points)
    labeled = _fit_models(cfg, space, std_pts, resp)
    path = os.path.join(outdir, "model.uqm")
    serialize.save_models(path, labeled)
    loo = [getattr(m, "loo_error", 0.0) for _, m in labeled]
    _write_manifest(outdir, "fit", cfg, [sample_path, resp_path], [path],
                    {"max_loo_error": float(np.max(loo)), "n_models": len(labeled)})
    return [path]


def _surrogate_mean_fn(model, space):
    """Physical-points batch evaluator of a loaded surrogate's mean."""
    if isinstance(model, chaos.PceModel):
        return lambda P: model.predict(space.to_standard(np.atleast_2d(P)))
    krig = model.krig if isinstance(model, pck.PckModel) else model
    return lambda P: krig.predict_mean(space.to_standard(np.atleast_2d(P)))


def _surrogate_moments(model, space, draws, seed):
    if isinstance(model, chaos.PceModel):
        mean, var = model.moments()
        return mean, float(np.sqrt(var))
    if isinstance(model, pck.PckModel):
        return pck.pck_moments(model, draws, seed)
    unit = doe.monte_carlo(space.dim, draws, seed)
    std_pts = space.to_standard(doe.scale(unit, space).points)
    vals = model.predict_mean(std_pts)
    return float(np.mean(vals)), float(np.std(vals, ddof=1))


def stage_predict(cfg: StudyConfig, outdir, points_path) -> list[str]:
    """Evaluate fitted surrogates at new physical points from a DOE csv."""
    model_path = _require(outdir, "model.uqm")
    labeled = serialize.load_models(model_path)
    probe = doe.load_design(points_path)
    if probe.form != "physical":
        raise PreconditionError("prediction points must be a physical-form DOE csv")
    space = cfg.space()
    std_pts = space.to_standard(probe.points)
    cols, names = [], []
    for label, model in labeled:
        if isinstance(model, chaos.PceModel):
            cols.append(model.predict(std_pts))
            names.append(label)
        else:
            krig = model.krig if isinstance(model, pck.PckModel) else model
            mean, var = kriging.predict(krig, std_pts)
            cols.append(mean)
            names.append(label)
            cols.append(var)
            names.append(f"{label}_var")
    path = os.path.join(outdir, "predictions.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# predictions n={probe.count} m={len(names)}\n")
        fh.write(",".join(names) + "\n")
        block = np.column_stack(cols)
        for row in block:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    _write_manifest(outdir, "predict", cfg, [model_path, str(points_path)], [path])
    return [path]


def stage_moments(cfg: StudyConfig, outdir) -> list[str]:
    """Mean and standard deviation per output from the fitted surrogates.

    Chaos expansions use their closed-form moments; Kriging and PC-Kriging
    use seeded Monte Carlo through the predictor mean.
    """
    model_path = _require(outdir, "model.uqm")
    labeled = serialize.load_models(model_path)
    space = cfg.space()
    path = os.path.join(outdir, "moments.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("output,mean,std\n")
        for label, model in labeled:
            mean, std = _surrogate_moments(model, space, cfg.draws, cfg.draws_seed)
            fh.write(f"{label},{mean:.17g},{std:.17g}\n")
    _write_manifest(outdir, "moments", cfg, [model_path], [path],
                    {"draws": cfg.draws, "seed": cfg.draws_seed})
    return [path]


def stage_sobol(cfg: StudyConfig, outdir, base_count=None) -> tuple[list[str], str]:
    """Sensitivity indices of every surrogate output; CSV plus pretty text."""
    model_path = _require(outdir, "model.uqm")
    labeled = serialize.load_models(model_path)
    space = cfg.space()
    base = int(base_count or cfg.sobol_base)
    path = os.path.join(outdir, "sobol.csv")
    reports = []
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("output,input,S1,ST,S1_pce,ST_pce,delta\n")
        for label, model in labeled:
            mc = sensitivity.saltelli_sobol(_surrogate_mean_fn(model, space), space,
                                            base, seed=cfg.sobol_seed)
            if isinstance(model, chaos.PceModel):
                cmp = sensitivity.sobol_compare(model, mc)
                reports.append(f"== {label}\n{cmp}")
                for i, name in enumerate(space.names):
                    fh.write(f"{label},{name},{cmp.s1_mc[i]:.17g},{cmp.st_mc[i]:.17g},"
                             f"{cmp.s1_pce[i]:.17g},{cmp.st_pce[i]:.17g},{cmp.delta[i]:.17g}\n")
            else:
                lines = [f"== {label}"]
                for i, name in enumerate(space.names):
                    fh.write(f"{label},{name},{mc.first_order[i]:.17g},{mc.total[i]:.17g},"
                             f"nan,nan,nan\n")
                    lines.append(f"{name:<20} S1={mc.first_order[i]:8.4f} ST={mc.total[i]:8.4f}")
                reports.append("\n".join(lines))
    _write_manifest(outdir, "sobol", cfg, [model_path], [path],
                    {"base_count": base, "seed": cfg.sobol_seed})
    return [path], "\n\n".join(reports)


def _write_table(path, header: str, rows) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return path


def stage_study(cfg: StudyConfig, outdir, make_plots: bool = True) -> list[str]:
    """Full nozzle pipeline: DOE, model runs, per-station surrogates, reports.

    Writes the deterministic nominal-point profile, the per-sample centerline
    profiles, the surrogate mean/std per station, and the total sensitivity
    indices of every field at the exit station, plus rendered figures.
    """
    os.makedirs(outdir, exist_ok=True)
    space = cfg.space()
    if cfg.model_kind != "builtin" or cfg.model_name != "nozzle":
        raise ConfigError("the study pipeline drives the builtin nozzle model")
    stations = models.nozzle_stations(cfg.stations)
    written = []

    written += stage_sample(cfg, outdir)
    written += stage_run(cfg, outdir)
    resp = models.load_responses(os.path.join(outdir, "responses.csv"))

    nominal = models.nozzle_q1d(space.nominal(), cfg.stations)
    nom_rows = [(float(stations[i]),) + tuple(float(nominal[j * cfg.stations + i])
                                              for j in range(4))
                for i in range(cfg.stations)]
    written.append(_write_table(os.path.join(outdir, "nominal_centerline.csv"),
                                "x,p,T,M,rho",
                                [tuple(map(float, r)) for r in nom_rows]))

    sample_cols = ",".join(f"s{k:03d}" for k in range(resp.count))
    rows = []
    for f_idx, fname in enumerate(models.NOZZLE_FIELDS):
        for i in range(cfg.stations):
            col = resp.Y[:, f_idx * cfg.stations + i]
            rows.append((fname, float(stations[i])) + tuple(float(v) for v in col))
    written.append(_write_table(os.path.join(outdir, "samples_centerline.csv"),
                                "field,x," + sample_cols, rows))

    written += stage_fit(cfg, outdir)
    labeled = serialize.load_models(os.path.join(outdir, "model.uqm"))

    # one shared draw set for every per-station surrogate; trend regressors at
    # the draws are cached per distinct trend so the sweep stays cheap
    unit = doe.monte_carlo(space.dim, cfg.draws, cfg.draws_seed)
    std_draws = space.to_standard(doe.scale(unit, space).points)
    trend_cache = {}
    mrows = []
    for f_idx, fname in enumerate(models.NOZZLE_FIELDS):
        for i in range(cfg.stations):
            _, model = labeled[f_idx * cfg.stations + i]
            if isinstance(model, chaos.PceModel):
                mean, var = model.moments()
                std = float(np.sqrt(var))
            else:
                krig = model.krig if isinstance(model, pck.PckModel) else model
                key = (krig.trend.kind, krig.trend.basis)
                if key not in trend_cache:
                    trend_cache[key] = krig.trend.eval(std_draws)
                vals = krig.predict_mean(std_draws, trend_values=trend_cache[key])
                mean, std = float(np.mean(vals)), float(np.std(vals, ddof=1))
            mrows.append((fname, float(stations[i]), mean, std))
    written.append(_write_table(os.path.join(outdir, "mean_std_centerline.csv"),
                                "field,x,mean,std", mrows))

    srows = []
    for f_idx, fname in enumerate(models.NOZZLE_FIELDS):
        _, model = labeled[(f_idx + 1) * cfg.stations - 1]
        mc = sensitivity.saltelli_sobol(_surrogate_mean_fn(model, space), space,
                                        cfg.sobol_base, seed=cfg.sobol_seed)
        for i, name in enumerate(space.names):
            srows.append((fname, name, float(mc.first_order[i]), float(mc.total[i])))
    written.append(_write_table(os.path.join(outdir, "sobol_exit.csv"),
                                "field,input,S1,ST", srows))

    if make_plots:
        from . import plots
        written += plots.render_study_figures(outdir)

    _write_manifest(outdir, "study", cfg, [], written,
                    {"stations": cfg.stations, "fields": list(models.NOZZLE_FIELDS)})
    return written
