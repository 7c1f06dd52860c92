"""File formats: dataset CSV, run report JSON and figure-data CSV tables."""

import csv
import json
import re
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data_model import PanelDataset, validate
from .engine import AggregateResult, BootstrapConfig
from .errors import ParseError
from .inference import ReplicateResult
from .matching import daily_group_means
from .multiplicity import MultiplicitySummary
from .propensity import DesignSpec

SCHEMA_VERSION = "1.0"

_X_COL = re.compile(r"^x(\d+)$")
_Y_COL = re.compile(r"^y(\d+)$")


def _numbered(header, pattern, prefix, line):
    found = {}
    for pos, name in enumerate(header):
        m = pattern.match(name)
        if m:
            found[int(m.group(1))] = pos
    if not found:
        raise ParseError(f"header has no {prefix}1.. columns", line=line)
    expected = list(range(1, len(found) + 1))
    if sorted(found) != expected:
        raise ParseError(f"{prefix} columns must be numbered 1..{len(found)} without gaps", line=line)
    return [found[i] for i in expected]


def load_dataset(path, declared_t):
    """Read ``subject_id,group,x1..xk,y1..yT`` into a validated PanelDataset.

    Raises
    ------
    ParseError
        Malformed header or cell, with the 1-based line number.
    ValidationError
        The parsed data violate a dataset invariant.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file is empty", line=1) from None
        for required in ("subject_id", "group"):
            if required not in header:
                raise ParseError(f"header is missing required column {required!r}", line=1)
        dupes = {h for h in header if header.count(h) > 1}
        if dupes:
            raise ParseError(f"duplicate header column(s) {sorted(dupes)}", line=1)
        id_pos = header.index("subject_id")
        g_pos = header.index("group")
        x_pos = _numbered(header, _X_COL, "x", 1)
        y_pos = _numbered(header, _Y_COL, "y", 1)
        known = {id_pos, g_pos, *x_pos, *y_pos}
        extra = [header[i] for i in range(len(header)) if i not in known]
        if extra:
            raise ParseError(f"unexpected column(s) {extra}", line=1)
        width = len(header)
        ids, groups, feats, resp = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, found {len(row)}", line=lineno)
            ids.append(row[id_pos].strip())
            g = row[g_pos].strip()
            if g not in ("0", "1"):
                raise ParseError(f"group must be 0 or 1, got {g!r}", line=lineno, column="group")
            groups.append(int(g))
            try:
                feats.append([float(row[i]) for i in x_pos])
                resp.append([float(row[i]) for i in y_pos])
            except ValueError:
                for i in (*x_pos, *y_pos):
                    try:
                        float(row[i])
                    except ValueError:
                        raise ParseError(
                            f"non-numeric value {row[i]!r}", line=lineno, column=header[i]
                        ) from None
                raise
    if not groups:
        raise ParseError("file has a header but no data rows", line=2)
    dataset = PanelDataset(
        np.array(feats, dtype=float).reshape(len(groups), len(x_pos)),
        np.array(groups, dtype=np.int8),
        np.array(resp, dtype=float).reshape(len(groups), len(y_pos)),
        declared_t,
        ids,
    )
    validate(dataset)
    return dataset


def write_dataset(dataset, path):
    """Write ``dataset`` in the input CSV schema (floats use round-trip repr)."""
    k, T = dataset.n_features, dataset.n_periods
    header = ["subject_id", "group"] + [f"x{j}" for j in range(1, k + 1)] + [f"y{l}" for l in range(1, T + 1)]
    ids = dataset.subject_ids or tuple(str(i) for i in range(len(dataset)))
    feats = dataset.features.tolist()
    resp = dataset.responses.tolist()
    groups = dataset.group.tolist()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(dataset)):
            w.writerow([ids[i], groups[i], *map(repr, feats[i]), *map(repr, resp[i])])


@dataclass(frozen=True)
class RunReport:
    """Serialisable wrapper around an AggregateResult.

    ``extra_warnings`` holds notes raised outside the engine; the
    serialised ``warnings`` list is the engine's warnings followed by these.
    """

    aggregate: AggregateResult
    timings: dict = field(default_factory=dict)
    extra_warnings: tuple = ()
    schema_version: str = SCHEMA_VERSION

    @property
    def warnings(self):
        return tuple(self.aggregate.warnings) + tuple(self.extra_warnings)


def _replicate_to_json(r):
    return {
        "index": r.replicate_index,
        "effect": r.effect,
        "p_value": r.p_value,
        "z_value": r.z_value,
        "pre_balance_p": r.pre_balance_p,
        "n_pairs": r.n_pairs,
        "status": r.status,
        "reason": r.reason,
        "seed": r.replicate_seed,
        "unmatched_treated": r.unmatched_treated,
        "propensity_converged": r.propensity_converged,
        "pre_gaps": list(r.pre_gaps),
        "warnings": list(r.warnings),
    }


def _replicate_from_json(d):
    return ReplicateResult(
        replicate_index=d["index"],
        replicate_seed=d["seed"],
        status=d["status"],
        reason=d["reason"],
        effect=d["effect"],
        p_value=d["p_value"],
        z_value=d["z_value"],
        pre_balance_p=d["pre_balance_p"],
        n_pairs=d["n_pairs"],
        unmatched_treated=d["unmatched_treated"],
        propensity_converged=d["propensity_converged"],
        pre_gaps=tuple(d["pre_gaps"]),
        warnings=tuple(d["warnings"]),
    )


def _config_to_json(c):
    out = {f.name: getattr(c, f.name) for f in fields(c) if f.name != "workers"}
    out["design_spec"] = asdict(c.design_spec)
    return out


def _config_from_json(d):
    d = dict(d)
    d["design_spec"] = DesignSpec(**d["design_spec"])
    return BootstrapConfig(**d)


def _summary_to_json(s):
    out = asdict(s)
    for key, value in out.items():
        if isinstance(value, tuple):
            out[key] = list(value)
    return out


def _summary_from_json(d):
    return MultiplicitySummary(**{
        k: tuple(v) if isinstance(v, list) else v for k, v in d.items()
    })


def report_to_dict(report):
    agg = report.aggregate
    return {
        "schema_version": report.schema_version,
        "effect": agg.effect,
        "effect_sd": agg.effect_sd,
        "final_p": agg.final_p,
        "final_p_method": agg.multiplicity.final_p_method,
        "bonferroni_min": agg.multiplicity.bonferroni_min,
        "storey_pi0": agg.multiplicity.storey_pi0,
        "failed_count": agg.failed_count,
        "dataset_fingerprint": agg.dataset_fingerprint,
        "config": _config_to_json(agg.config),
        "multiplicity": _summary_to_json(agg.multiplicity),
        "replicates": [_replicate_to_json(r) for r in agg.replicates],
        "timings": dict(report.timings),
        "warnings": list(report.warnings),
        "engine_warning_count": len(agg.warnings),
    }


def serialize_report(report):
    """JSON text for ``report``; identical inputs give identical bytes."""
    return json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"


def parse_report(text):
    d = json.loads(text)
    if "schema_version" not in d:
        raise ParseError("report has no schema_version")
    agg = AggregateResult(
        effect=d["effect"],
        effect_sd=d["effect_sd"],
        final_p=d["final_p"],
        multiplicity=_summary_from_json(d["multiplicity"]),
        replicates=tuple(_replicate_from_json(r) for r in d["replicates"]),
        failed_count=d["failed_count"],
        config=_config_from_json(d["config"]),
        dataset_fingerprint=d["dataset_fingerprint"],
        warnings=tuple(d["warnings"][:d["engine_warning_count"]]),
    )
    return RunReport(
        aggregate=agg,
        timings=dict(d["timings"]),
        extra_warnings=tuple(d["warnings"][d["engine_warning_count"]:]),
        schema_version=d["schema_version"],
    )


def fig1_rows(dataset):
    """(period, treated_mean, control_mean) for every period, 1-based."""
    g = dataset.group
    treated, control = daily_group_means(dataset, np.flatnonzero(g == 1), np.flatnonzero(g == 0))
    return [(l + 1, float(a), float(b)) for l, (a, b) in enumerate(zip(treated, control))]


def fig2_rows(aggregate):
    """(replicate_index, period, matched treated minus control mean), pre-periods only."""
    rows = []
    for r in aggregate.replicates:
        if r.ok:
            rows.extend((r.replicate_index, l + 1, gap) for l, gap in enumerate(r.pre_gaps))
    return rows


def emit_fig1_data(dataset, path):
    _write_table(path, ("period", "treated_mean", "control_mean"), fig1_rows(dataset))


def emit_fig2_data(aggregate, path):
    _write_table(path, ("replicate_index", "period", "difference"), fig2_rows(aggregate))


def _write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])

