"""Command line interface.

Every subcommand is a thin client of the HTTP service layer. By default the
application is mounted in-process (no sockets, fully offline); pass
``--server URL`` or set ``POLYARIMA_SERVER`` to talk to a running instance
instead. Either way the payloads and results are identical.

Exit codes: 0 on success, 1 for data problems (unreadable series, degenerate
moments, rank or length failures), 2 for usage and configuration problems.
"""
from __future__ import annotations

import asyncio
import csv
import datetime
import io
import json
import pathlib

import click
import httpx

from . import __version__
from .numfmt import fmt

_TIMEOUT = 600.0
_MISSING = {"", "."}

# Error categories that indicate a misuse of the tool rather than bad data.
_USAGE_CATEGORIES = {"parameter", "admissibility", "config"}


class ServiceClient:
    """POSTs JSON to the service, in-process unless a base URL is given."""

    def __init__(self, server: str | None) -> None:
        self.server = server.rstrip("/") if server else None

    def post(self, path: str, payload: dict) -> dict:
        if self.server is None:
            response = asyncio.run(self._post_inprocess(path, payload))
        else:
            try:
                response = httpx.post(self.server + path, json=payload, timeout=_TIMEOUT)
            except httpx.HTTPError as exc:
                raise click.ClickException(f"cannot reach {self.server}: {exc}")
        if response.status_code == 200:
            return response.json()
        _raise_service_error(response)
        raise AssertionError("unreachable")

    async def _post_inprocess(self, path: str, payload: dict) -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service", timeout=_TIMEOUT
        ) as client:
            return await client.post(path, json=payload)


def _raise_service_error(response: httpx.Response) -> None:
    try:
        detail = response.json().get("detail")
    except (ValueError, AttributeError):
        detail = response.text
    if response.status_code == 422:
        raise click.UsageError(_format_validation(detail))
    if isinstance(detail, dict) and "category" in detail:
        message = f"{detail['category']} error: {detail.get('message', '')}"
        if detail["category"] in _USAGE_CATEGORIES:
            raise click.UsageError(message)
        raise click.ClickException(message)
    raise click.ClickException(f"service returned status {response.status_code}: {detail}")


def _format_validation(detail) -> str:
    if isinstance(detail, list):
        parts = []
        for item in detail:
            loc = ".".join(str(x) for x in item.get("loc", []) if x != "body")
            parts.append(f"{loc}: {item.get('msg', 'invalid')}")
        return "invalid request: " + "; ".join(parts)
    return f"invalid request: {detail}"


# ---------------------------------------------------------------------------
# Series files

def read_series(path: str) -> list[float]:
    """Load a numeric series from a CSV or plain text file.

    The last column holds the values. A header row is skipped when its last
    cell is not numeric. Empty cells and '.' count as missing and are
    dropped (with a note on stderr). When every first-column entry parses as
    a date the rows are sorted by it; otherwise file order is kept.
    """
    try:
        text = pathlib.Path(path).read_text()
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")

    rows = [row for row in csv.reader(io.StringIO(text))
            if row and any(cell.strip() for cell in row)]
    if rows and _looks_like_header(rows[0]):
        rows = rows[1:]
    if not rows:
        raise click.ClickException(f"{path}: no data rows")

    records: list[tuple[datetime.datetime | None, float]] = []
    dropped = 0
    for row in rows:
        cell = row[-1].strip()
        if cell in _MISSING:
            dropped += 1
            continue
        try:
            value = float(cell)
        except ValueError:
            raise click.ClickException(f"{path}: non-numeric value {cell!r}")
        stamp = _parse_date(row[0].strip()) if len(row) > 1 else None
        records.append((stamp, value))

    if not records:
        raise click.ClickException(f"{path}: every row was missing")
    if dropped:
        click.echo(f"note: dropped {dropped} missing value(s)", err=True)
    if all(stamp is not None for stamp, _ in records):
        records.sort(key=lambda rec: rec[0])
    return [value for _, value in records]


def _looks_like_header(row: list[str]) -> bool:
    cell = row[-1].strip()
    if cell in _MISSING:
        return False
    try:
        float(cell)
    except ValueError:
        return True
    return False


_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%Y-%m", "%Y-%m-%dT%H:%M:%S")


def _parse_date(cell: str) -> datetime.datetime | None:
    for pattern in _DATE_FORMATS:
        try:
            return datetime.datetime.strptime(cell, pattern)
        except ValueError:
            continue
    return None


# ---------------------------------------------------------------------------
# Option helpers

def _parse_order(_ctx, _param, value: str) -> tuple[int, int, int]:
    parts = value.split(",")
    if len(parts) != 3:
        raise click.BadParameter("expected p,d,q (three comma-separated integers)")
    try:
        p, d, q = (int(part) for part in parts)
    except ValueError:
        raise click.BadParameter(f"orders must be integers, got {value!r}")
    if min(p, d, q) < 0:
        raise click.BadParameter("orders must be nonnegative")
    return p, d, q


def _parse_kv(_ctx, _param, items: tuple[str, ...]) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in items:
        name, sep, raw = item.partition("=")
        if not sep or not name.strip():
            raise click.BadParameter(f"expected name=value, got {item!r}")
        try:
            out[name.strip()] = float(raw)
        except ValueError:
            raise click.BadParameter(f"{item!r}: value must be numeric")
    return out


def _order_option():
    return click.option("--order", required=True, callback=_parse_order, metavar="P,D,Q",
                        help="Model orders p,d,q.")


def _json_option():
    return click.option("--json", "as_json", is_flag=True,
                        help="Print the raw service response as JSON.")


def _emit_json(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# Commands

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--server", envvar="POLYARIMA_SERVER", default=None, metavar="URL",
              help="Base URL of a running service (default: run in-process).")
@click.version_option(__version__, prog_name="polyarima")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Estimation toolkit for ARIMA models with skewed innovations."""
    ctx.obj = ServiceClient(server)


@main.command()
@_order_option()
@click.option("--phi", multiple=True, type=float, help="AR coefficient (repeatable).")
@click.option("--theta", multiple=True, type=float, help="MA coefficient (repeatable).")
@click.option("--intercept", type=float, default=None, help="Constant term.")
@click.option("--innovation", type=click.Choice(["gaussian", "gamma", "lognormal", "chisquare"]),
              default="gaussian", show_default=True)
@click.option("--param", "params", multiple=True, callback=_parse_kv, metavar="NAME=VALUE",
              help="Innovation-law parameter (repeatable).")
@click.option("--n", required=True, type=click.IntRange(min=1), help="Series length.")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--burn-in", type=click.IntRange(min=0), default=200, show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None,
              help="Write the series as CSV instead of printing it.")
@_json_option()
@click.pass_obj
def simulate(client: ServiceClient, order, phi, theta, intercept, innovation, params,
             n, seed, burn_in, out, as_json) -> None:
    """Draw a synthetic series from a fully specified model."""
    p, d, q = order
    payload = {
        "order": {"p": p, "d": d, "q": q},
        "phi": list(phi),
        "theta": list(theta),
        "intercept": intercept,
        "innovation": {"kind": innovation, "params": params},
        "n": n,
        "seed": seed,
        "burn_in": burn_in,
    }
    result = client.post("/simulate", payload)
    if as_json:
        _emit_json(result)
        return
    values = result["values"]
    if out is not None:
        with open(out, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, value in enumerate(values, start=1):
                writer.writerow([t, fmt(value)])
        click.echo(f"wrote {len(values)} values to {out}")
    else:
        for value in values:
            click.echo(fmt(value))


@main.command()
@click.argument("series", type=click.Path(exists=False))
@_order_option()
@click.option("--method", type=click.Choice(["ols", "css", "pmm2", "both"]),
              default="both", show_default=True)
@click.option("--intercept", is_flag=True, help="Estimate a constant term.")
@click.option("--adaptive", is_flag=True, help="Re-estimate moment weights iteratively.")
@click.option("--lb-lags", type=click.IntRange(min=1), default=10, show_default=True,
              help="Lags for the residual autocorrelation test.")
@_json_option()
@click.pass_obj
def fit(client: ServiceClient, series, order, method, intercept, adaptive,
        lb_lags, as_json) -> None:
    """Estimate a model from a series file."""
    p, d, q = order
    payload = {
        "values": read_series(series),
        "order": {"p": p, "d": d, "q": q},
        "method": method,
        "intercept": intercept,
        "adaptive": adaptive,
        "lb_lags": lb_lags,
    }
    result = client.post("/fit", payload)
    if as_json:
        _emit_json(result)
        return
    click.echo(f"n={result['n']}  d={result['d']}  effective sample={result['n_eff']}")
    for name, block in result["blocks"].items():
        _print_fit_block(name, block)


def _print_fit_block(name: str, block: dict) -> None:
    click.echo(f"\n== {name} ==")
    state = "converged" if block["converged"] else "DID NOT CONVERGE"
    click.echo(f"{state} after {block['iterations']} iteration(s), "
               f"{block['timing_seconds']:.4f} s")
    if block.get("fallback_used"):
        click.echo("fallback: baseline estimate retained")
    width = max((len(n) for n in block["names"]), default=4)
    click.echo(f"{'param':<{width + 2}}{'estimate':>16}{'std.err':>16}")
    for pname, est, se in zip(block["names"], block["estimates"], block["se"]):
        click.echo(f"{pname:<{width + 2}}{fmt(est):>16}{fmt(se):>16}")
    click.echo(f"sigma2 {fmt(block['sigma2'])}")
    if block.get("score_norm") is not None:
        click.echo(f"score norm {fmt(block['score_norm'])}")
    moments = block.get("moments")
    if moments:
        click.echo("residual moments: "
                   + "  ".join(f"{key}={fmt(moments[key])}" for key in
                               ("mu2", "mu3", "mu4", "gamma3", "gamma4")))
    diag = block.get("diagnostics") or {}
    lb = diag.get("ljung_box")
    if lb:
        click.echo(f"ljung-box Q({lb['lags']})={fmt(lb['stat'])}  df={lb['df']}  "
                   f"p={fmt(lb['p_value'])}")
    jb = diag.get("jarque_bera")
    if jb:
        click.echo(f"jarque-bera {fmt(jb['stat'])}  p={fmt(jb['p_value'])}")
    ic = block.get("ic")
    if ic:
        caveat = "  (gaussian likelihood used descriptively)" if ic["posthoc_gaussian_caveat"] else ""
        click.echo(f"aic {fmt(ic['aic'])}  bic {fmt(ic['bic'])}{caveat}")
    for note in block.get("notes", []):
        click.echo(f"note: {note}")


@main.command()
@click.argument("series", type=click.Path(exists=False))
@_order_option()
@click.option("--intercept", is_flag=True)
@click.option("--gamma3-threshold", type=float, default=0.5, show_default=True,
              help="Skewness magnitude below which the baseline is kept.")
@click.option("--gamma4-threshold", type=float, default=1.0, show_default=True,
              help="Excess-kurtosis magnitude below which the baseline is kept.")
@click.option("--min-sample", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--min-re", type=float, default=1.2, show_default=True,
              help="Efficiency ratio required to justify the second stage.")
@_json_option()
@click.pass_obj
def select(client: ServiceClient, series, order, intercept, gamma3_threshold,
           gamma4_threshold, min_sample, min_re, as_json) -> None:
    """Recommend an estimation method for a series."""
    p, d, q = order
    payload = {
        "values": read_series(series),
        "order": {"p": p, "d": d, "q": q},
        "intercept": intercept,
        "thresholds": {
            "gamma3_symmetric": gamma3_threshold,
            "gamma4_normal": gamma4_threshold,
            "min_sample": min_sample,
            "min_re": min_re,
        },
    }
    result = client.post("/select", payload)
    if as_json:
        _emit_json(result)
        return
    click.echo(f"recommendation: {result['recommendation']}")
    click.echo(f"gamma3_hat {fmt(result['gamma3_hat'])}")
    click.echo(f"gamma4_hat {fmt(result['gamma4_hat'])}")
    re_value = result["re_theoretical"]
    click.echo(f"re_theoretical {fmt(re_value) if re_value is not None else 'undefined'}")
    click.echo(f"n (after differencing) {result['n']}")
    click.echo(f"rationale: {result['rationale']}")


@main.command()
@click.argument("series", type=click.Path(exists=False))
@_order_option()
@click.option("--mode", type=click.Choice(["fixed", "rolling"]), default="fixed",
              show_default=True)
@click.option("--split", type=click.FloatRange(min=0.0, max=1.0, min_open=True, max_open=True),
              default=0.8, show_default=True, help="Train fraction for fixed mode.")
@click.option("--window", type=click.IntRange(min=1), default=None,
              help="Train window length for rolling mode.")
@click.option("--refit-every", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--methods", default="css,pmm2", show_default=True, metavar="LIST",
              help="Comma-separated subset of ols,css,pmm2.")
@click.option("--intercept", is_flag=True)
@_json_option()
@click.pass_obj
def validate(client: ServiceClient, series, order, mode, split, window, refit_every,
             methods, intercept, as_json) -> None:
    """Compare methods on held-out one-step forecasts."""
    p, d, q = order
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    payload = {
        "values": read_series(series),
        "order": {"p": p, "d": d, "q": q},
        "mode": mode,
        "split": split,
        "window": window,
        "refit_every": refit_every,
        "methods": method_list,
        "intercept": intercept,
    }
    result = client.post("/validate", payload)
    if as_json:
        _emit_json(result)
        return
    scope = (f"split={fmt(result['split'])}" if result["mode"] == "fixed"
             else f"window={result['window']} refit_every={result['refit_every']}")
    click.echo(f"mode={result['mode']}  {scope}")
    click.echo(f"{'method':<8}{'rmse':>16}{'mae':>16}{'forecasts':>12}")
    for name, stats in result["methods"].items():
        click.echo(f"{name:<8}{fmt(stats['rmse']):>16}{fmt(stats['mae']):>16}"
                   f"{stats['n_forecasts']:>12}")
    if result["improvement_pct"] is not None:
        click.echo(f"second-stage rmse improvement over baseline: "
                   f"{fmt(result['improvement_pct'])}%")


@main.command()
@click.argument("config", type=click.Path(exists=False))
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help="Thread count for replications (default: POLYARIMA_WORKERS or 1).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for report files.")
@_json_option()
@click.pass_obj
def mc(client: ServiceClient, config, workers, out_dir, as_json) -> None:
    """Run a simulation experiment from a JSON config file."""
    try:
        text = pathlib.Path(config).read_text()
    except OSError as exc:
        raise click.UsageError(f"cannot read config {config}: {exc}")
    try:
        config_dict = json.loads(text)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"{config}: not valid JSON ({exc})")
    if not isinstance(config_dict, dict):
        raise click.UsageError(f"{config}: top level must be a JSON object")

    result = client.post("/mc", {"config": config_dict, "workers": workers})
    payload = result["report"]
    if as_json:
        _emit_json(payload)
        return

    directory = pathlib.Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "report.json").write_text(json.dumps(payload["report"], indent=2) + "\n")
    (directory / "report.csv").write_text(payload["csv"])
    written = ["report.json", "report.csv"]
    if "re_curve_csv" in payload:
        (directory / "re_curve.csv").write_text(payload["re_curve_csv"])
        written.append("re_curve.csv")
    click.echo(f"wrote {', '.join(written)} to {directory}")

    for index, cell in enumerate(payload["report"]["cells"]):
        _print_cell_summary(index, cell)


def _print_cell_summary(index: int, cell: dict) -> None:
    tag = f"{cell['model_label']} n={cell['n']} {cell['innovation']}"
    status = "" if cell["valid"] else "  [INVALID: failure rate too high]"
    click.echo(f"\ncell {index}: {tag}  failures={cell['failures']}{status}")
    for estimator, stats in cell["estimators"].items():
        for ps in stats:
            click.echo(f"  {estimator:<5} {ps['parameter']:<10} bias={fmt(ps['bias'])} "
                       f"mse={fmt(ps['mse'])} cover95={fmt(ps['coverage95'])}")
    if cell["re"]:
        pairs = "  ".join(
            f"{row['parameter']}={fmt(row['value'])}"
            f"[{fmt(row['ci'][0])},{fmt(row['ci'][1])}]"
            for row in cell["re"]
        )
        click.echo(f"  re vs {cell['re_baseline']}: {pairs}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("polyarima.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
